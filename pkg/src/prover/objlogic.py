"""Object-logic loading: theory files elaborate to kernel theories.

Nothing object-logical is wired into the kernel; the FOL-style logic,
naturals and lists all come from the .thy files shipped next to this
module.  Attributes on axioms and lemmas populate the default simpset,
claset and executable-equation table through generic theory data.
"""

from __future__ import annotations

import os
import threading
from typing import Callable, Optional

from . import evaluator, kernel, syntax
from .errors import (
    CyclicImport,
    MissingWitness,
    ParseError,
    ProverError,
    UndeclaredConstant,
)
from .isar import ProofContext, run_notepad, run_proof
from .kernel import Theory, Thm
from .syntax import (
    AxiomsCmd,
    ClassCmd,
    ConstsCmd,
    ConstructorsCmd,
    DefinitionCmd,
    EndCmd,
    InstanceCmd,
    JudgmentCmd,
    LemmaCmd,
    NotepadCmd,
    QuickcheckCmd,
    TheoryHeader,
    Typedecl,
    notation_entry,
)
from .term import Const, Free, Sort, TCon, TVar, Term, term_frees, term_vars
from .termops import norm, subst_term_types

FACTS_KEY = "facts"

THEORY_DIR = os.path.join(os.path.dirname(__file__), "theories")


class ProofFailed(ProverError):
    pass


def fact(thy: Theory, name: str) -> Thm:
    """A named theorem: proved lemma or axiom, transferred to thy."""
    facts = thy.lookup_data(FACTS_KEY) or {}
    thm = facts.get(name)
    if thm is not None:
        return kernel.transfer(thm, thy)
    if name in thy.axioms:
        return kernel.axiom(thy, name)
    raise UndeclaredConstant(f"no fact named {name!r}")


def store_fact(thy: Theory, name: str, thm: Thm) -> Theory:
    facts = dict(thy.lookup_data(FACTS_KEY) or {})
    facts[name] = thm
    return thy.with_data(FACTS_KEY, facts)


def generalize_frees(prop: Term) -> Term:
    """Axiom/lemma statements: free variables become schematic."""
    from .term import Abs, App, Var

    def go(t):
        cls = type(t)
        if cls is Free:
            return Var(t.name, 0, t.typ)
        if cls is App:
            return App(go(t.fun), go(t.arg))
        if cls is Abs:
            return Abs(t.var_name, t.var_type, go(t.body))
        return t

    return go(prop)


def _apply_attrs(thy: Theory, name: str, attrs) -> Theory:
    for a in attrs:
        if a == "simp":
            thy = thy.with_data("simp.rules",
                                thy.lookup_data("simp.rules", ()) + (name,))
        elif a in ("intro", "intro!"):
            thy = thy.with_data(
                "cla.rules",
                thy.lookup_data("cla.rules", ()) + ((name, "intro", a == "intro!"),))
        elif a in ("elim", "elim!"):
            thy = thy.with_data(
                "cla.rules",
                thy.lookup_data("cla.rules", ()) + ((name, "elim", a == "elim!"),))
        elif a == "code":
            thy = thy.with_data("code.eqns",
                                thy.lookup_data("code.eqns", ()) + (name,))
        elif a == "lift":
            thy = thy.with_data("simp.lift_rules",
                                thy.lookup_data("simp.lift_rules", ()) + (name,))
        elif a == "truth":
            thy = thy.with_data("simp.truth", name)
    return thy


class LoadHooks:
    """Callbacks the document layer uses for markup; all optional."""

    def __init__(self, on_lemma: Optional[Callable] = None,
                 on_quickcheck: Optional[Callable] = None,
                 cancelled: Optional[Callable[[], bool]] = None):
        self.on_lemma = on_lemma
        self.on_quickcheck = on_quickcheck
        self.cancelled = cancelled or (lambda: False)


def execute(thy: Theory, cmd, hooks: Optional[LoadHooks] = None) -> Theory:
    """Run one theory-file command against a theory."""
    hooks = hooks or LoadHooks()
    if isinstance(cmd, Typedecl):
        return kernel.add_type(thy, cmd.name, len(cmd.args))
    if isinstance(cmd, ConstsCmd):
        for d in cmd.decls:
            typ = syntax.parse_type(thy, d.typ_src)
            typ = _canon_type_sorts(thy, typ)
            thy = kernel.add_const(thy, d.name, typ)
            if d.notation:
                kind, sym, prec = d.notation
                entry = notation_entry(kind, sym, prec, d.name)
                thy = thy.with_data(syntax.SYNTAX_DATA_KEY,
                                    thy.lookup_data(syntax.SYNTAX_DATA_KEY, ())
                                    + (entry,))
        return thy
    if isinstance(cmd, JudgmentCmd):
        d = cmd.decl
        typ = syntax.parse_type(thy, d.typ_src)
        thy = kernel.add_const(thy, d.name, typ)
        thy = thy.with_data("syntax.judgment", d.name)
        return thy
    if isinstance(cmd, AxiomsCmd):
        for d in cmd.decls:
            prop = syntax.parse_prop(thy, d.prop_src, d.pos)
            prop = generalize_frees(prop)
            thy = kernel.add_axiom(thy, d.name, prop)
            thy = _apply_attrs(thy, d.name, d.attrs)
            if d.name == "eq_reflection":
                thy = thy.with_data("eval.equality", "eq")
        return thy
    if isinstance(cmd, ConstructorsCmd):
        table = dict(thy.lookup_data(evaluator.CONSTRUCTORS_KEY) or {})
        table[cmd.typename] = tuple(cmd.consts)
        return thy.with_data(evaluator.CONSTRUCTORS_KEY, table)
    if isinstance(cmd, DefinitionCmd):
        return _run_definition(thy, cmd)
    if isinstance(cmd, ClassCmd):
        return _run_class(thy, cmd)
    if isinstance(cmd, InstanceCmd):
        return _run_instance(thy, cmd, hooks)
    if isinstance(cmd, LemmaCmd):
        return _run_lemma(thy, cmd, hooks)
    if isinstance(cmd, NotepadCmd):
        run_notepad(thy, cmd.steps)
        return thy
    if isinstance(cmd, QuickcheckCmd):
        prop = syntax.parse_prop(thy, cmd.prop_src, cmd.prop_pos)
        outcome = evaluator.quickcheck(thy, prop, cmd.size or 6,
                                       cancelled=hooks.cancelled)
        if hooks.on_quickcheck:
            hooks.on_quickcheck(cmd, outcome)
        return thy
    if isinstance(cmd, EndCmd):
        return kernel.theory_end(thy)
    raise ParseError(f"unsupported command {cmd!r}", getattr(cmd, "pos", None))


def _canon_type_sorts(thy: Theory, typ):
    from .term import Type

    def go(ty):
        if isinstance(ty, TVar):
            return TVar(ty.name, thy.canon_sort(ty.sort))
        return TCon(ty.name, tuple(go(a) for a in ty.args))

    return go(typ)


def _run_definition(thy: Theory, cmd: DefinitionCmd) -> Theory:
    eq = syntax.parse_prop(thy, cmd.eq_src)
    prems, concl = kernel.strip_implies(eq)
    if prems:
        raise ParseError("definitions cannot be conditional", cmd.pos)
    if kernel.is_equals(concl):
        lhs, rhs = kernel.dest_equals(concl)
    else:
        from .term import strip_comb
        head, args = strip_comb(concl)
        judgment = thy.lookup_data("syntax.judgment")
        if not (isinstance(head, Const) and head.name == judgment):
            raise ParseError("definition must be an equation", cmd.pos)
        inner_head, inner_args = strip_comb(args[0])
        if not (isinstance(inner_head, Const) and inner_head.name == "eq"
                and len(inner_args) == 2):
            raise ParseError("definition must be an equation", cmd.pos)
        lhs, rhs = inner_args
    from .term import strip_comb
    chead, cargs = strip_comb(lhs)
    if not isinstance(chead, Const):
        raise ParseError("definition left side must be a constant", cmd.pos)
    frees = []
    for a in cargs:
        if not isinstance(a, Free) or a in frees:
            raise ParseError("definition arguments must be distinct variables",
                             cmd.pos)
        frees.append(a)
    from .term import lambdas
    rhs_abs = norm(lambdas(frees, rhs))
    const = Const(chead.name, kernel.type_of(thy, rhs_abs))
    name = cmd.name or f"{chead.name}_def"
    thy = kernel.define(thy, const, rhs_abs, name=name)
    return _apply_attrs(thy, name, cmd.attrs)


def _run_class(thy: Theory, cmd: ClassCmd) -> Theory:
    signature = {}
    for d in cmd.fixes:
        typ = syntax.parse_type(thy, d.typ_src)
        typ = _resort_class_tvar(typ, cmd.name)
        signature[d.name] = typ
    # parse the class axioms against a scratch extension that already has
    # the class and its signature
    scratch = kernel.add_class(thy, cmd.name, cmd.supers, signature)
    for d in cmd.fixes:
        if d.notation:
            kind, sym, prec = d.notation
            entry = notation_entry(kind, sym, prec, d.name)
            scratch = scratch.with_data(
                syntax.SYNTAX_DATA_KEY,
                scratch.lookup_data(syntax.SYNTAX_DATA_KEY, ()) + (entry,))
    axioms = {}
    for a in cmd.assumes:
        prop = syntax.parse_prop(scratch, a.prop_src, a.pos)
        axioms[a.name] = generalize_frees(prop)
    thy = kernel.add_class(thy, cmd.name, cmd.supers, signature, axioms)
    for d in cmd.fixes:
        if d.notation:
            kind, sym, prec = d.notation
            entry = notation_entry(kind, sym, prec, d.name)
            thy = thy.with_data(syntax.SYNTAX_DATA_KEY,
                                thy.lookup_data(syntax.SYNTAX_DATA_KEY, ())
                                + (entry,))
    for a in cmd.assumes:
        thy = _apply_attrs(thy, a.name, a.attrs)
    return thy


def _resort_class_tvar(typ, cls: str):
    tvs = {}

    def collect(ty):
        if isinstance(ty, TVar):
            tvs[ty.name] = ty
        else:
            for a in ty.args:
                collect(a)

    collect(typ)
    ren = {n: TVar(n, frozenset((cls,))) for n in tvs}
    from .termops import subst_typ
    return subst_typ(typ, ren)


def _run_instance(thy: Theory, cmd: InstanceCmd, hooks: LoadHooks) -> Theory:
    cg = thy.class_graph
    argsorts = [frozenset(s) for s in cmd.arg_sorts]
    inst = TCon(cmd.tycon, tuple(TVar(f"'a{i}", cg.canon_sort(s))
                                 for i, s in enumerate(argsorts)))
    obligations = []
    for c in sorted(cg.super_closure(cmd.cls)):
        if not thy.of_sort(inst, frozenset((c,))):
            for axname, prop in cg.axioms.get(c, {}).items():
                from .term import term_tvars
                (tvname, _), = term_tvars(prop).items()
                obligations.append((axname,
                                    norm(subst_term_types(prop, {tvname: inst}))))
    witnesses = []
    if obligations and cmd.proof is None:
        raise MissingWitness(
            f"instance {cmd.tycon}::{cmd.cls} needs proofs of "
            f"{[n for n, _ in obligations]}")
    for axname, goal in obligations:
        # prove the free-variable form, then generalize back
        frees_goal, mapping = _unschematic(goal)
        ctx = ProofContext(thy)
        try:
            thm = run_proof(ctx, frees_goal, cmd.proof)
        except ProverError as e:
            raise ProofFailed(
                f"instance {cmd.tycon}::{cmd.cls}, obligation {axname}: {e}") from e
        thm = kernel.generalize(thm)
        witnesses.append(thm)
    return kernel.add_arity(thy, cmd.tycon, argsorts, cmd.cls, witnesses)


def _unschematic(prop: Term):
    """Replace schematic variables by fresh frees (for proving)."""
    from .term import Abs, App, Var
    taken = set(term_frees(prop))
    mapping = {}

    def go(t):
        cls = type(t)
        if cls is Var:
            key = (t.name, t.index)
            if key not in mapping:
                name = t.name
                while name in taken:
                    name += "'"
                taken.add(name)
                mapping[key] = Free(name, t.typ)
            return mapping[key]
        if cls is App:
            return App(go(t.fun), go(t.arg))
        if cls is Abs:
            return Abs(t.var_name, t.var_type, go(t.body))
        return t

    return norm(go(prop)), mapping


def _run_lemma(thy: Theory, cmd: LemmaCmd, hooks: LoadHooks) -> Theory:
    prop = syntax.parse_prop(thy, cmd.prop_src, cmd.prop_pos, canonical=False)
    qc = None
    judgment = thy.lookup_data("syntax.judgment")
    if judgment is not None:
        qc = evaluator.quickcheck(thy, prop, size_bound=4, time_budget=1.0,
                                  cancelled=hooks.cancelled)
        if hooks.on_quickcheck and (qc.found or cmd.kind == "quickcheck"):
            hooks.on_quickcheck(cmd, qc)
    ctx = ProofContext(thy)
    try:
        thm = run_proof(ctx, prop, cmd.proof)
    except ProverError as e:
        raise ProofFailed(f"{cmd.kind} {cmd.name or cmd.prop_src!r}: {e}") from e
    if thm.hyps:
        raise ProofFailed(f"{cmd.kind} {cmd.name}: hypotheses escaped the proof")
    thm = kernel.generalize(thm)
    if hooks.on_lemma:
        hooks.on_lemma(cmd, thm, qc)
    if cmd.name:
        thy = store_fact(thy, cmd.name, thm)
        thy = _apply_attrs(thy, cmd.name, cmd.attrs)
    return thy


# --------------------------------------------------------------------------
# Whole files and the base library

def load_source(source: str, parents=None, hooks=None,
                resolver: Optional[Callable[[str], Theory]] = None) -> Theory:
    """Elaborate one theory file; imports resolve through `resolver`."""
    tf = syntax.parse_theory(source)
    if tf.errors:
        pos, msg = tf.errors[0]
        raise ParseError(msg, pos)
    if tf.header is None:
        raise ParseError("missing theory header", 0)
    if parents is None:
        parents = []
        for imp in tf.header.imports:
            if imp == "Pure":
                parents.append(kernel.pure_theory())
            elif resolver is not None:
                parents.append(resolver(imp))
            else:
                raise CyclicImport(f"cannot resolve import {imp!r}")
    thy = kernel.theory_begin(tf.header.name, parents)
    for cmd in tf.commands:
        thy = execute(thy, cmd, hooks)
    return thy


_base_lock = threading.Lock()
_base_cache: dict = {}


def load_file(path: str, hooks=None, loading=None) -> Theory:
    """Load a .thy file, resolving imports next to it (cycle-checked)."""
    loading = loading or []
    name = os.path.splitext(os.path.basename(path))[0]
    if name in loading:
        raise CyclicImport(f"import cycle through {name}: {loading}")
    key = os.path.abspath(path)
    with open(path) as fh:
        source = fh.read()

    def resolver(imp: str) -> Theory:
        return load_theory_by_name(imp, os.path.dirname(path), hooks,
                                   loading + [name])

    return load_source(source, hooks=hooks, resolver=resolver)


def load_theory_by_name(name: str, directory: str, hooks=None,
                        loading=None) -> Theory:
    if name == "Pure":
        return kernel.pure_theory()
    cached = _base_cache.get((directory, name))
    if cached is not None:
        return cached
    path = os.path.join(directory, f"{name}.thy")
    if not os.path.exists(path) and directory != THEORY_DIR:
        path = os.path.join(THEORY_DIR, f"{name}.thy")
    thy = load_file(path, hooks, loading)
    _base_cache[(directory, name)] = thy
    return thy


def base_library() -> Theory:
    """The Main entry point: bool/nat/list with classes and instances."""
    with _base_lock:
        cached = _base_cache.get("Main")
        if cached is None:
            cached = load_theory_by_name("Main", THEORY_DIR)
            _base_cache["Main"] = cached
        return cached


def load(path_or_source: str, hooks=None) -> Theory:
    """Load a theory from a path or literal source text."""
    if "\n" not in path_or_source and os.path.exists(path_or_source):
        return load_file(path_or_source, hooks)
    return load_source(
        path_or_source, hooks=hooks,
        resolver=lambda imp: load_theory_by_name(imp, THEORY_DIR, hooks))
