"""Equational evaluation and exhaustive counterexample search.

Execution reads a theory's [code] equations as left-to-right rewrite
rules over constructor terms (call-by-value, innermost, first-match).
The fast path is uncertified; certified replay goes through the
simplifier so every step is justified by kernel equality rules.

Quickcheck enumerates assignments for the free variables of a conjecture
in nondecreasing total size (a value's size = its non-nullary constructor
applications; invented atom elements count zero) and reports the first
falsifying assignment, re-validated by evaluation.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import kernel
from .errors import (
    Cancelled,
    NonLinearPattern,
    NotExecutable,
    ProverError,
    StepBudgetExceeded,
    StuckTerm,
    UnboundRHSVariable,
)
from .kernel import Theory, Thm, dest_equals, is_equals, strip_implies
from .term import (
    App,
    Const,
    Free,
    TCon,
    TVar,
    Term,
    Type,
    Var,
    list_comb,
    strip_comb,
    strip_funT,
    term_frees,
    term_vars,
    term_tvars,
)
from .termops import norm, subst_term_types, subst_vars

CODE_EQNS_KEY = "code.eqns"
CONSTRUCTORS_KEY = "constructors"
EQUALITY_KEY = "eval.equality"

STEP_BUDGET = 200_000


class EquationProgram:
    """Per-constant ordered equations plus the constructor set."""

    __slots__ = ("eqns", "constructors", "equality", "theory")

    def __init__(self, eqns, constructors, equality, theory):
        self.eqns = eqns                  # const -> tuple of (patterns, rhs)
        self.constructors = constructors  # set of constructor const names
        self.equality = equality          # object equality constant, if any
        self.theory = theory


def _equation_parts(thy: Theory, prop: Term):
    """Read an equation axiom as (constant, argument patterns, rhs)."""
    prems, concl = strip_implies(prop)
    if prems:
        raise NotExecutable("?", "conditional equations are not executable")
    if is_equals(concl):
        lhs, rhs = dest_equals(concl)
    else:
        head, args = strip_comb(concl)
        judgment = thy.lookup_data("syntax.judgment")
        if not (isinstance(head, Const) and head.name == judgment and args):
            raise NotExecutable("?", "not an equation")
        inner_head, inner_args = strip_comb(args[0])
        eqc = thy.lookup_data(EQUALITY_KEY)
        if not (isinstance(inner_head, Const) and inner_head.name == eqc
                and len(inner_args) == 2):
            raise NotExecutable("?", "not an equation")
        lhs, rhs = inner_args
    head, patterns = strip_comb(lhs)
    if not isinstance(head, Const):
        raise NotExecutable("?", "left side must be a constant application")
    return head.name, patterns, rhs


def _check_pattern(p: Term, constructors: set, seen: set):
    if isinstance(p, Var):
        if (p.name, p.index) in seen:
            raise NonLinearPattern(f"duplicate variable ?{p.name}")
        seen.add((p.name, p.index))
        return
    head, args = strip_comb(p)
    if isinstance(head, Const) and head.name in constructors:
        for a in args:
            _check_pattern(a, constructors, seen)
        return
    raise NotExecutable("?", f"non-constructor pattern {p!r}")


def compile_program(thy: Theory, constants) -> EquationProgram:
    """Collect executable equations for the constants and everything they
    reach."""
    ctors = set()
    for names in (thy.lookup_data(CONSTRUCTORS_KEY) or {}).values():
        ctors.update(names)
    equality = thy.lookup_data(EQUALITY_KEY)

    by_const: dict[str, list] = {}
    for name in thy.lookup_data(CODE_EQNS_KEY, ()):
        prop = thy.axioms.get(name)
        if prop is None:
            continue
        try:
            c, patterns, rhs = _equation_parts(thy, prop)
        except NotExecutable:
            continue
        by_const.setdefault(c, []).append((tuple(patterns), rhs))

    eqns: dict[str, tuple] = {}
    pending = list(constants)
    done = set()
    while pending:
        c = pending.pop()
        if c in done or c in ctors or c == equality:
            continue
        done.add(c)
        rows = by_const.get(c)
        if not rows:
            raise NotExecutable(c, "no executable equations")
        for (patterns, rhs) in rows:
            seen: set = set()
            for p in patterns:
                _check_pattern(p, ctors, seen)
            for key in term_vars(rhs):
                if key not in seen:
                    raise UnboundRHSVariable(
                        f"?{key[0]} not bound by the left side of a {c} equation")
            for dep in _rhs_consts(rhs):
                if dep not in done and dep not in ctors and dep != equality:
                    pending.append(dep)
        eqns[c] = tuple(rows)
    return EquationProgram(eqns, ctors, equality, thy)


def _rhs_consts(t: Term):
    from .term import term_consts
    return [c for c in term_consts(t)
            if not c.startswith("Pure.")]


# --------------------------------------------------------------------------
# Uncertified evaluation (the fast path)

def _match_pattern(p: Term, v: Term, binding: dict) -> bool:
    if isinstance(p, Var):
        binding[(p.name, p.index)] = v
        return True
    ph, pargs = strip_comb(p)
    vh, vargs = strip_comb(v)
    if not (isinstance(vh, Const) and isinstance(ph, Const)
            and vh.name == ph.name and len(pargs) == len(vargs)):
        return False
    return all(_match_pattern(a, b, binding) for a, b in zip(pargs, vargs))


def eval_term(prog: EquationProgram, term: Term,
              budget: int = STEP_BUDGET,
              cancelled: Optional[Callable[[], bool]] = None) -> Term:
    """Call-by-value innermost reduction to constructor normal form."""
    fuel = [budget]

    def ev(t: Term) -> Term:
        if fuel[0] <= 0:
            raise StepBudgetExceeded("evaluation step budget exhausted")
        if cancelled is not None and cancelled():
            raise Cancelled("evaluation cancelled")
        head, args = strip_comb(t)
        if isinstance(head, App):
            raise StuckTerm(f"ill-formed application {t!r}")
        from .term import Abs
        if isinstance(head, Abs):
            if not args:
                return t
            vals = [ev(a) for a in args]
            fuel[0] -= 1
            return ev(norm(list_comb(head, vals)))
        if not isinstance(head, Const):
            raise StuckTerm(f"cannot evaluate {t!r}")
        name = head.name
        vals = [ev(a) for a in args]
        if name in prog.constructors:
            return list_comb(head, vals)
        if prog.equality and name == prog.equality and len(vals) == 2:
            return _bool_const(prog, _values_equal(vals[0], vals[1]))
        rows = prog.eqns.get(name)
        if rows is None:
            raise StuckTerm(f"no equations for {name}")
        for (patterns, rhs) in rows:
            if len(patterns) > len(vals):
                continue
            binding: dict = {}
            if all(_match_pattern(p, v, binding)
                   for p, v in zip(patterns, vals)):
                fuel[0] -= 1
                reduced = subst_vars(rhs, binding)
                rest = vals[len(patterns):]
                return ev(norm(list_comb(reduced, rest)))
        raise StuckTerm(f"no equation of {name} matches")

    return ev(norm(term))


def _values_equal(a: Term, b: Term) -> bool:
    ah, aargs = strip_comb(a)
    bh, bargs = strip_comb(b)
    if not (isinstance(ah, Const) and isinstance(bh, Const)):
        return a == b
    if ah.name != bh.name or len(aargs) != len(bargs):
        return False
    return all(_values_equal(x, y) for x, y in zip(aargs, bargs))


def _bool_const(prog: EquationProgram, value: bool) -> Term:
    boolT = TCon("bool")
    return Const("True" if value else "False", boolT)


def is_true(prog: EquationProgram, t: Term) -> bool:
    return isinstance(t, Const) and t.name == "True"


def is_false(prog: EquationProgram, t: Term) -> bool:
    return isinstance(t, Const) and t.name == "False"


# --------------------------------------------------------------------------
# Certified replay (through the simplifier)

_code_ss_cache: dict = {}


def code_simpset(thy: Theory):
    from .objlogic import fact
    from .simp import Simpset, add_simp
    names = tuple(thy.lookup_data(CODE_EQNS_KEY, ())) + \
        tuple(thy.lookup_data("simp.rules", ()))
    cached = _code_ss_cache.get(thy.serial)
    if cached is not None and cached[0] == names:
        return cached[1]
    ss = Simpset()
    seen = set()
    for name in names:
        if name in seen:
            continue
        seen.add(name)
        try:
            ss = add_simp(ss, fact(thy, name), name=name)
        except ProverError:
            continue
    _code_ss_cache[thy.serial] = (names, ss)
    return ss


def certified_eval(thy: Theory, term: Term) -> Thm:
    """Replay an evaluation through the simplifier: |- term == result."""
    from .simp import SimpContext, core_rewrite
    return core_rewrite(code_simpset(thy), SimpContext(), thy, norm(term))


def eval_tac(i: int):
    """Close a subgoal whose conclusion evaluates to the truth constant."""
    from .simp import simp_tac

    def tac(state):
        thy = state.theory
        produced = []
        for st in simp_tac(code_simpset(thy), i)(state):
            if st.n < state.n:
                yield st
                return
            produced.append(st)
        return

    return tac


# --------------------------------------------------------------------------
# Quickcheck: exhaustive enumeration of small values

ATOM = Free("__atom__", TCon("nat"))


@dataclass
class QcOutcome:
    counterexample: Optional[dict] = None    # var name -> value Term
    exhausted_at: Optional[int] = None
    inapplicable: Optional[str] = None
    timeout: bool = False
    tested: int = 0

    @property
    def found(self) -> bool:
        return self.counterexample is not None


def _datatype_of(thy: Theory, ty: Type) -> Optional[tuple]:
    if not isinstance(ty, TCon):
        return None
    ctors = (thy.lookup_data(CONSTRUCTORS_KEY) or {}).get(ty.name)
    return ctors


def _values(thy: Theory, ty: Type, size: int, atom_types: set,
            depth: int = 0) -> list:
    """All values of the given exact size; invented atoms appear as the
    ATOM placeholder (size 0).  Deterministic order."""
    if depth > 40:
        return []
    if isinstance(ty, TCon) and ty.name in atom_types:
        return [ATOM] if size == 0 else []
    ctors = _datatype_of(thy, ty)
    if ctors is None:
        return []
    out = []
    for cname in ctors:
        declared = thy.consts.get(cname)
        if declared is None:
            continue
        # instantiate the constructor's type at ty
        from .sorts import match_types, resolve_type
        try:
            tsub = match_types(thy.class_graph, thy.arities,
                               _result_type(declared), ty)
        except ProverError:
            continue
        argTs0, _ = strip_funT(declared)
        argTs = [_subst(a, tsub) for a in argTs0]
        cost = 1 if argTs else 0
        budget = size - cost
        if budget < 0:
            continue
        if not argTs:
            if size == 0:
                out.append(Const(cname, ty))
            continue
        for split in _compositions(budget, len(argTs)):
            parts = [_values(thy, t, s, atom_types, depth + 1)
                     for t, s in zip(argTs, split)]
            for combo in itertools.product(*parts):
                out.append(list_comb(Const(cname, _subst(declared, tsub)),
                                     list(combo)))
    return out


def _subst(ty: Type, tsub: dict) -> Type:
    from .sorts import resolve_type
    return resolve_type(tsub, ty)


def _result_type(ty: Type) -> Type:
    from .term import dest_funT
    while isinstance(ty, TCon) and ty.name == "fun":
        ty = ty.args[1]
    return ty


def _compositions(total: int, k: int):
    if k == 0:
        if total == 0:
            yield ()
        return
    if k == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, k - 1):
            yield (first,) + rest


def _count_atoms(t: Term) -> int:
    n = 0
    for s in _subterm_iter(t):
        if s == ATOM:
            n += 1
    return n


def _subterm_iter(t: Term):
    from .term import subterms
    return subterms(t)


def _fill_atoms(t: Term, values: list, pos: list) -> Term:
    from .term import Abs
    cls = type(t)
    if t == ATOM:
        v = values[pos[0]]
        pos[0] += 1
        return v
    if cls is App:
        return App(_fill_atoms(t.fun, values, pos),
                   _fill_atoms(t.arg, values, pos))
    if cls is Abs:
        return Abs(t.var_name, t.var_type, _fill_atoms(t.body, values, pos))
    return t


def _numeral(n: int, thy: Theory) -> Term:
    zero = thy.consts.get("0")
    suc = thy.consts.get("Suc")
    t: Term = Const("0", zero)
    for _ in range(n):
        t = App(Const("Suc", suc), t)
    return t


def quickcheck(thy: Theory, conjecture: Term, size_bound: int = 6,
               time_budget: float = 1.0,
               cancelled: Optional[Callable[[], bool]] = None) -> QcOutcome:
    """Search for a counterexample by exhaustive enumeration.

    The conjecture is a proposition (judgment-wrapped boolean term); its
    free variables range over enumerable types.  Type variables are
    instantiated to an invented atom domain: naturals of size zero, so
    list structure drives the size while elements stay interchangeable
    labels, distinct-first in enumeration order.
    """
    judgment = thy.lookup_data("syntax.judgment")
    prop = norm(conjecture)
    head, args = strip_comb(prop)
    if not (isinstance(head, Const) and head.name == judgment and len(args) == 1):
        return QcOutcome(inapplicable="not an executable boolean conjecture")
    body = args[0]
    if term_vars(body):
        return QcOutcome(inapplicable="schematic goals are not testable")

    frees = list(term_frees(body).values())
    tvars = term_tvars(body)
    atom_types: set = set()
    if tvars:
        # instantiate every type variable to the atom domain
        tsub = {name: TCon("nat") for name in tvars}
        body = subst_term_types(body, tsub)
        frees = list(term_frees(body).values())
        atom_types.add("__atom__")

    # types whose variables are treated as atoms: only instantiated tvars;
    # mark them by wrapping: we instead treat nat-as-atom only for vars
    # whose original type mentioned a type variable
    orig_types = {f.name: f.typ for f in term_frees(args[0]).values()}

    def atoms_in(name):
        return bool(term_tvars(Const("_", orig_types[name])))

    try:
        prog = compile_program(
            thy, [c for c in _rhs_consts(body)])
    except NotExecutable as e:
        return QcOutcome(inapplicable=str(e))

    deadline = time.monotonic() + time_budget
    tested = 0

    def value_space(f: Free, size: int):
        marker = {"nat"} if atoms_in(f.name) else set()
        if marker:
            # the variable's type with nat read as the atom domain
            return _values_atomized(thy, f.typ, size)
        return _values(thy, f.typ, size, set())

    for total in range(size_bound + 1):
        for split in _compositions(total, len(frees)):
            spaces = [value_space(f, s) for f, s in zip(frees, split)]
            for combo in itertools.product(*spaces):
                slots = sum(_count_atoms(v) for v in combo)
                atom_choices = [range(max(slots, 1))] * slots
                for atoms in itertools.product(*atom_choices) if slots else [()]:
                    if time.monotonic() > deadline:
                        return QcOutcome(tested=tested, timeout=True)
                    if cancelled is not None and cancelled():
                        raise Cancelled("quickcheck cancelled")
                    values = [_numeral(a, thy) for a in atoms]
                    pos = [0]
                    inst = [_fill_atoms(v, values, pos) for v in combo]
                    subst = {f.name: v for f, v in zip(frees, inst)}
                    candidate = _subst_frees(body, subst)
                    tested += 1
                    try:
                        result = eval_term(prog, candidate,
                                           cancelled=cancelled)
                    except (StuckTerm, StepBudgetExceeded) as e:
                        return QcOutcome(inapplicable=str(e), tested=tested)
                    if is_false(prog, result):
                        return QcOutcome(
                            counterexample={f.name: v
                                            for f, v in zip(frees, inst)},
                            tested=tested)
    return QcOutcome(exhausted_at=size_bound, tested=tested)


def _values_atomized(thy: Theory, ty: Type, size: int) -> list:
    """Values of ty where the nat positions (the instantiated type
    variable domain) are atoms of size zero."""
    return _values(thy, ty, size, {"nat"})


def _subst_frees(t: Term, mapping: dict) -> Term:
    from .term import Abs
    cls = type(t)
    if cls is Free:
        return mapping.get(t.name, t)
    if cls is App:
        return App(_subst_frees(t.fun, mapping), _subst_frees(t.arg, mapping))
    if cls is Abs:
        return Abs(t.var_name, t.var_type, _subst_frees(t.body, mapping))
    return t
