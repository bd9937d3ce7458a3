"""Term-kernel backend selection.

The hot operations (substitution, normalization, shifting) exist twice:
a compiled Cython extension (prover._termops_c) and a pure-Python fallback
(prover._termops_py) with identical semantics.  The compiled one is used
when it imported successfully; set PROVER_PURE_PYTHON=1 to force the
fallback.  benchmarks/bench_termops.py compares the two.
"""

import os

if os.environ.get("PROVER_PURE_PYTHON", "") not in ("", "0"):
    from . import _termops_py as _impl
else:
    try:
        from . import _termops_c as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _termops_py as _impl

BACKEND = _impl.BACKEND

incr_bv = _impl.incr_bv
incr_boundvars = _impl.incr_boundvars
loose_bvar = _impl.loose_bvar
loose_bvar1 = _impl.loose_bvar1
subst_bound = _impl.subst_bound
norm = _impl.norm
beta_norm = _impl.beta_norm
aconv = _impl.aconv
abstract_over = _impl.abstract_over
subst_typ = _impl.subst_typ
subst_term_types = _impl.subst_term_types
subst_vars = _impl.subst_vars
occs_var = _impl.occs_var

__all__ = [
    "BACKEND", "incr_bv", "incr_boundvars", "loose_bvar", "loose_bvar1",
    "subst_bound", "norm", "beta_norm", "aconv", "abstract_over",
    "subst_typ", "subst_term_types", "subst_vars", "occs_var",
]
