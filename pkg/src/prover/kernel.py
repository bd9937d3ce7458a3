"""The trusted core.

Thm is an abstract certified judgment: the only way to obtain one is
through the inference rules in this module, so soundness rests on this
file alone.  No proof objects are stored; a Thm carries its hypotheses,
its proposition and the stamp set of the theory it was certified against.

Theories are immutable values; every extension operation returns a new
theory carrying a fresh stamp, so undo is keeping the old value, and
stamp-set inclusion decides whether a theorem transfers.
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from contextvars import ContextVar

from . import sorts, termops
from .errors import (
    CircularDefinition,
    DuplicateClass,
    DuplicateName,
    ExtraTypeVariable,
    HypothesisVariable,
    IllTyped,
    KernelError,
    MissingWitness,
    MultipleTypeVariables,
    NotAProposition,
    OverlappingInstance,
    ProverError,
    ShapeMismatch,
    SortViolation,
    StampIncompatible,
    StampNotIncluded,
    TypeMismatch,
    UndeclaredConstant,
    UnifyError,
    VariableFreeInHypotheses,
    WitnessMismatch,
)
from .sorts import ArityTable, ClassGraph, TypeUnifier, match_types, resolve_type
from .term import (
    Abs,
    App,
    Bound,
    Const,
    Free,
    Sort,
    TCon,
    TVar,
    Term,
    Type,
    Var,
    dest_funT,
    mk_funT,
    propT,
    strip_comb,
    term_consts,
    term_frees,
    term_tvars,
    term_vars,
    type_tvars,
)
from .termops import (
    abstract_over,
    aconv,
    loose_bvar,
    norm,
    subst_bound,
    subst_term_types,
    subst_vars,
)

# --------------------------------------------------------------------------
# Framework constants (the meta-logic: ==>, !!, ==)

IMP = "Pure.imp"
ALL = "Pure.all"
EQ = "Pure.eq"

aT = TVar("'a")

_imp_type = mk_funT(propT, mk_funT(propT, propT))


def imp_const() -> Const:
    return Const(IMP, _imp_type)


def all_const(elemT: Type) -> Const:
    return Const(ALL, mk_funT(mk_funT(elemT, propT), propT))


def eq_const(elemT: Type) -> Const:
    return Const(EQ, mk_funT(elemT, mk_funT(elemT, propT)))


def mk_implies(a: Term, b: Term) -> Term:
    return App(App(imp_const(), a), b)


def list_implies(prems, concl: Term) -> Term:
    for p in reversed(list(prems)):
        concl = mk_implies(p, concl)
    return concl


def dest_implies(t: Term):
    if (isinstance(t, App) and isinstance(t.fun, App)
            and isinstance(t.fun.fun, Const) and t.fun.fun.name == IMP):
        return t.fun.arg, t.arg
    raise ShapeMismatch(f"not an implication: {t!r}")


def is_implies(t: Term) -> bool:
    return (isinstance(t, App) and isinstance(t.fun, App)
            and isinstance(t.fun.fun, Const) and t.fun.fun.name == IMP)


def strip_implies(t: Term):
    prems = []
    while is_implies(t):
        prems.append(t.fun.arg)
        t = t.arg
    return prems, t


def mk_all(v: Free, body: Term) -> Term:
    return App(all_const(v.typ), Abs(v.name, v.typ, abstract_over(v, body)))


def is_all(t: Term) -> bool:
    return (isinstance(t, App) and isinstance(t.fun, Const)
            and t.fun.name == ALL)


def mk_equals(t: Term, u: Term, typ: Type) -> Term:
    return App(App(eq_const(typ), t), u)


def dest_equals(t: Term):
    if (isinstance(t, App) and isinstance(t.fun, App)
            and isinstance(t.fun.fun, Const) and t.fun.fun.name == EQ):
        return t.fun.arg, t.arg
    raise ShapeMismatch(f"not a meta-equality: {t!r}")


def is_equals(t: Term) -> bool:
    return (isinstance(t, App) and isinstance(t.fun, App)
            and isinstance(t.fun.fun, Const) and t.fun.fun.name == EQ)


# --------------------------------------------------------------------------
# Theories and stamps

_serial = itertools.count(1)
_serial_lock = threading.Lock()


def _next_serial() -> int:
    with _serial_lock:
        return next(_serial)


class Theory:
    """Immutable container of declarations, certified by a stamp set.

    The stamp set contains the serial of every extension step that led
    here, so stamp inclusion is ancestry: thm transfer is a single hash
    lookup of the certifying serial.
    """

    __slots__ = ("name", "parents", "serial", "stamps", "types", "consts",
                 "axioms", "class_graph", "arities", "definitions", "data",
                 "sealed")

    def __init__(self, name, parents, types, consts, axioms, class_graph,
                 arities, definitions, data, sealed=False):
        self.name = name
        self.parents = tuple(parents)
        self.serial = _next_serial()
        stamps = {self.serial}
        for p in self.parents:
            stamps.update(p.stamps)
        self.stamps = frozenset(stamps)
        self.types = types
        self.consts = consts
        self.axioms = axioms
        self.class_graph = class_graph
        self.arities = arities
        self.definitions = definitions
        self.data = data
        self.sealed = sealed

    def __repr__(self):
        return f"Theory({self.name}, stamp {self.serial}, {len(self.stamps)} stamps)"

    def includes(self, other: "Theory") -> bool:
        """Does self extend other?  O(1): one hash lookup."""
        return other.serial in self.stamps

    def _extend(self, **updates) -> "Theory":
        if self.sealed and updates.get("sealed") is not False:
            if "sealed" not in updates:
                raise KernelError(f"theory {self.name} is sealed")
        fields = dict(
            name=self.name, parents=(self,), types=self.types,
            consts=self.consts, axioms=self.axioms,
            class_graph=self.class_graph, arities=self.arities,
            definitions=self.definitions, data=self.data, sealed=self.sealed,
        )
        fields.update(updates)
        return Theory(**fields)

    # -- tool data (simp/claset defaults, syntax, executable equations) ----

    def with_data(self, key, value) -> "Theory":
        data = dict(self.data)
        data[key] = value
        return self._extend(data=data)

    def lookup_data(self, key, default=None):
        return self.data.get(key, default)

    # -- sort reasoning -----------------------------------------------------

    def of_sort(self, ty: Type, sort) -> bool:
        return sorts.of_sort(self.class_graph, self.arities, ty, sort)

    def canon_sort(self, sort) -> Sort:
        return self.class_graph.canon_sort(sort)

    def type_unifier(self, tsub=None) -> TypeUnifier:
        return TypeUnifier(self.class_graph, self.arities, tsub)


_PURE = None
_pure_lock = threading.Lock()


def pure_theory() -> Theory:
    """The initial theory of the logical framework."""
    global _PURE
    if _PURE is None:
        with _pure_lock:
            if _PURE is None:
                _PURE = Theory(
                    name="Pure",
                    parents=(),
                    types={"prop": 0, "fun": 2},
                    consts={
                        IMP: _imp_type,
                        ALL: mk_funT(mk_funT(aT, propT), propT),
                        EQ: mk_funT(aT, mk_funT(aT, propT)),
                    },
                    axioms={},
                    class_graph=ClassGraph(),
                    arities=ArityTable(),
                    definitions=(),
                    data={},
                )
    return _PURE


def theory_begin(name: str, parents) -> Theory:
    parents = tuple(parents)
    if not parents:
        parents = (pure_theory(),)
    types, consts, axioms, data = {}, {}, {}, {}
    cg, at = None, None
    defs = []
    seen = set()
    for p in _ancestry(parents):
        if p.serial in seen:
            continue
        seen.add(p.serial)
        _merge_table(types, p.types, "type")
        _merge_table(consts, p.consts, "constant")
        _merge_table(axioms, p.axioms, "axiom")
        for d in p.definitions:
            if d not in defs:
                defs.append(d)
        _merge_data(data, p.data)
        cg = p.class_graph if cg is None else _merge_classes(cg, p.class_graph)
        at = p.arities if at is None else _merge_arities(at, p.arities)
    return Theory(name, parents, types, consts, axioms, cg, at, tuple(defs), data)


def _merge_data(dst: dict, src: dict):
    """Tool data joins pointwise: tuples append (deduplicated), dicts update."""
    for k, v in src.items():
        old = dst.get(k)
        if old is None:
            dst[k] = v
        elif isinstance(old, tuple) and isinstance(v, tuple):
            dst[k] = old + tuple(x for x in v if x not in old)
        elif isinstance(old, dict) and isinstance(v, dict):
            merged = dict(old)
            merged.update(v)
            dst[k] = merged
        else:
            dst[k] = v


def _ancestry(parents):
    """Parents in dependency order (ancestors first)."""
    out = []
    seen = set()

    def visit(t):
        if t.serial in seen:
            return
        seen.add(t.serial)
        for p in t.parents:
            visit(p)
        out.append(t)

    for p in parents:
        visit(p)
    return out


def _merge_table(dst: dict, src: dict, kind: str):
    for k, v in src.items():
        if k in dst and dst[k] != v:
            raise DuplicateName(f"conflicting {kind} {k!r} in merged theories")
        dst[k] = v


def _merge_classes(a: ClassGraph, b: ClassGraph) -> ClassGraph:
    supers = dict(a.supers)
    sigs = dict(a.signatures)
    axs = dict(a.axioms)
    for c, s in b.supers.items():
        if c in supers and supers[c] != s:
            raise DuplicateClass(f"conflicting class {c!r} in merged theories")
        supers[c] = s
        sigs[c] = b.signatures.get(c, ())
        axs[c] = b.axioms.get(c, {})
    return ClassGraph(supers, sigs, axs)


def _merge_arities(a: ArityTable, b: ArityTable) -> ArityTable:
    entries = dict(a.arities)
    for con, decls in b.arities.items():
        have = entries.get(con, ())
        for d in decls:
            if d not in have:
                have = have + (d,)
        entries[con] = have
    return ArityTable(entries)


def theory_end(thy: Theory) -> Theory:
    return thy._extend(sealed=True)


def add_type(thy: Theory, name: str, arity: int) -> Theory:
    if name in thy.types:
        raise DuplicateName(f"type constructor already declared: {name}")
    types = dict(thy.types)
    types[name] = arity
    return thy._extend(types=types)


def add_const(thy: Theory, name: str, typ: Type) -> Theory:
    if name in thy.consts:
        raise DuplicateName(f"constant already declared: {name}")
    _check_type(thy, typ)
    consts = dict(thy.consts)
    consts[name] = typ
    return thy._extend(consts=consts)


def add_axiom(thy: Theory, name: str, prop: Term) -> Theory:
    if name in thy.axioms:
        raise DuplicateName(f"axiom already declared: {name}")
    prop = norm(prop)
    if type_of(thy, prop) != propT:
        raise NotAProposition(f"axiom {name} is not a proposition")
    axioms = dict(thy.axioms)
    axioms[name] = prop
    return thy._extend(axioms=axioms)


def axiom(thy: Theory, name: str) -> "Thm":
    try:
        prop = thy.axioms[name]
    except KeyError:
        raise UndeclaredConstant(f"no axiom named {name!r}") from None
    return _mk_thm(frozenset(), prop, thy, rule="axiom")


# --------------------------------------------------------------------------
# Class and arity declarations (axiomatic type classes)

def add_class(thy: Theory, name: str, superclasses=(), signature=None,
              axioms=None) -> Theory:
    """Declare a (possibly axiomatic) type class.

    signature maps new constant names to their most general types, each
    over the single class type variable; axioms map names to propositions
    mentioning exactly one type variable, whose sort becomes {name}.
    """
    signature = dict(signature or {})
    axioms = dict(axioms or {})
    cg = thy.class_graph.with_class(name, superclasses, tuple(signature))
    consts = dict(thy.consts)
    for cname, ctyp in signature.items():
        if cname in consts:
            raise DuplicateName(f"constant already declared: {cname}")
        consts[cname] = ctyp
    thy2 = thy._extend(class_graph=cg, consts=consts)
    # re-sort the class axioms onto the new class and record obligations
    obligations = {}
    thy_axioms = dict(thy2.axioms)
    for axname, prop in axioms.items():
        tvs = term_tvars(prop)
        if len(tvs) != 1:
            raise MultipleTypeVariables(
                f"class axiom {axname} must mention exactly one type variable")
        (tvname, tv), = tvs.items()
        prop = subst_term_types(prop, {tvname: TVar(tvname, frozenset((name,)))})
        prop = norm(prop)
        if type_of(thy2, prop) != propT:
            raise NotAProposition(f"class axiom {axname} is not a proposition")
        obligations[axname] = prop
        if axname in thy_axioms:
            raise DuplicateName(f"axiom already declared: {axname}")
        thy_axioms[axname] = prop
    cg2 = ClassGraph(cg.supers, cg.signatures,
                     {**cg.axioms, name: obligations})
    return thy2._extend(class_graph=cg2, axioms=thy_axioms)


def add_arity(thy: Theory, tycon: str, argsorts, cls: str, witnesses=()) -> Theory:
    """Declare tycon :: (argsorts) cls, discharging the class obligations.

    For each axiom of cls (and its superclasses not already satisfied),
    witnesses must contain a theorem whose proposition matches the axiom
    instantiated to tycon applied to sorted argument variables.
    """
    if tycon not in thy.types:
        raise UndeclaredConstant(f"unknown type constructor: {tycon}")
    if thy.types[tycon] != len(argsorts):
        raise TypeMismatch(f"{tycon} expects {thy.types[tycon]} argument sorts")
    cg = thy.class_graph
    inst = TCon(tycon, tuple(TVar(f"'a{i}", cg.canon_sort(s))
                             for i, s in enumerate(argsorts)))
    # obligations of classes this instance does not already satisfy
    obligations = {}
    for c in sorted(cg.super_closure(cls)):
        if not thy.of_sort(inst, frozenset((c,))):
            obligations.update(cg.axioms.get(c, {}))
    witness_list = list(witnesses)
    for axname, prop in obligations.items():
        (tvname, _), = term_tvars(prop).items()
        goal = norm(subst_term_types(prop, {tvname: inst}))
        for w in witness_list:
            if isinstance(w, Thm) and not w.hyps and aconv(w.prop, goal) \
                    and thy.includes(w.theory):
                break
        else:
            if not witness_list:
                raise MissingWitness(
                    f"instance {tycon}::{cls} needs a proof of {axname}")
            raise WitnessMismatch(
                f"no witness matches obligation {axname}: {goal!r}")
    at = thy.arities.with_arity(cg, tycon, argsorts, cls)
    return thy._extend(arities=at)


# --------------------------------------------------------------------------
# Type checking

def _check_type(thy: Theory, ty: Type) -> None:
    if isinstance(ty, TVar):
        for c in ty.sort:
            thy.class_graph.check_class(c)
        return
    arity = thy.types.get(ty.name)
    if arity is None:
        raise UndeclaredConstant(f"unknown type constructor: {ty.name}")
    if arity != len(ty.args):
        raise TypeMismatch(f"type constructor {ty.name} expects {arity} arguments")
    for a in ty.args:
        _check_type(thy, a)


def type_of(thy: Theory, t: Term, binders=None) -> Type:
    """The unique type of a well-typed term; raises on failure.

    binders is the enclosing bound-variable type stack (innermost last)
    for typing open subterms.
    """
    stack = list(binders) if binders else []

    def go(t: Term):
        cls = type(t)
        if cls is Const:
            declared = thy.consts.get(t.name)
            if declared is None:
                raise UndeclaredConstant(f"undeclared constant: {t.name}")
            _check_type(thy, t.typ)
            try:
                match_types(thy.class_graph, thy.arities,
                            _rename_tvars(declared), t.typ)
            except SortViolation:
                raise
            except UnifyError as e:
                raise TypeMismatch(
                    f"constant {t.name} used at {t.typ!r}, declared {declared!r}"
                ) from e
            return t.typ
        if cls is Free or cls is Var:
            _check_type(thy, t.typ)
            return t.typ
        if cls is Bound:
            if t.index >= len(stack):
                raise IllTyped(f"loose bound variable {t.index}")
            return stack[-1 - t.index]
        if cls is Abs:
            _check_type(thy, t.var_type)
            stack.append(t.var_type)
            bodyT = go(t.body)
            stack.pop()
            return mk_funT(t.var_type, bodyT)
        # App
        funT_ = go(t.fun)
        argT = go(t.arg)
        try:
            dom, rng = dest_funT(funT_)
        except ValueError:
            raise TypeMismatch(f"non-function applied: {t.fun!r} : {funT_!r}") from None
        if dom != argT:
            raise TypeMismatch(
                f"argument type {argT!r} does not fit {t.fun!r} : {funT_!r}")
        return rng

    return go(t)


_rename_counter = itertools.count()


def _rename_tvars(ty: Type) -> Type:
    """Rename the type variables of a declared general type apart."""
    tvs = type_tvars(ty)
    if not tvs:
        return ty
    n = next(_rename_counter)
    ren = {name: TVar(f"'d{n}_{i}", tv.sort)
           for i, (name, tv) in enumerate(tvs.items())}
    return termops.subst_typ(ty, ren)


def is_proposition(thy: Theory, t: Term) -> bool:
    try:
        return type_of(thy, t) == propT
    except ProverError:
        return False


def _certify_prop(thy: Theory, t: Term) -> Term:
    t = norm(t)
    if type_of(thy, t) != propT:
        raise NotAProposition(f"not a proposition: {t!r}")
    return t


# --------------------------------------------------------------------------
# Audit instrumentation (tests replay proof-producing tools through this)

_audit: ContextVar = ContextVar("kernel_audit", default=None)


@contextmanager
def audit():
    """Record every primitive rule application in the dynamic extent.

    Yields a list of (rule name, premise thm ids, result thm) entries.
    """
    log = []
    token = _audit.set(log)
    try:
        yield log
    finally:
        _audit.reset(token)


# --------------------------------------------------------------------------
# Thm: the abstract theorem type

_RULE = object()   # module-private capability; not exported


class Thm:
    """A certified judgment: hypotheses |- proposition, stamped.

    Instances are produced exclusively by the inference rules below;
    attempting to construct or mutate one from outside raises.
    """

    __slots__ = ("_hyps", "_prop", "_theory")

    def __init__(self, capability=None, hyps=None, prop=None, theory=None):
        if capability is not _RULE:
            raise KernelError(
                "Thm values can only be produced by kernel inference rules")
        object.__setattr__(self, "_hyps", hyps)
        object.__setattr__(self, "_prop", prop)
        object.__setattr__(self, "_theory", theory)

    def __setattr__(self, name, value):
        raise KernelError("theorems are immutable")

    def __delattr__(self, name):
        raise KernelError("theorems are immutable")

    @property
    def hyps(self) -> frozenset:
        return self._hyps

    @property
    def prop(self) -> Term:
        return self._prop

    @property
    def theory(self) -> Theory:
        return self._theory

    @property
    def stamps(self) -> frozenset:
        return self._theory.stamps

    def __repr__(self):
        try:
            from .syntax import print_term
            hyps = ", ".join(sorted(print_term(h) for h in self._hyps))
            concl = print_term(self._prop)
        except Exception:
            hyps = ", ".join(sorted(repr(h) for h in self._hyps))
            concl = repr(self._prop)
        return f"{hyps} |- {concl}" if hyps else f"|- {concl}"

    def __reduce__(self):
        raise KernelError("theorems cannot be pickled")


def _mk_thm(hyps, prop, theory, rule, premises=()) -> Thm:
    thm = Thm(_RULE, hyps, prop, theory)
    log = _audit.get()
    if log is not None:
        log.append((rule, tuple(id(p) for p in premises), thm))
    return thm


def _join_theory(a: Thm, b: Thm) -> Theory:
    ta, tb = a.theory, b.theory
    if ta is tb:
        return ta
    if tb.includes(ta):
        return tb
    if ta.includes(tb):
        return ta
    raise StampIncompatible(
        f"theorems certified by unrelated theories: {ta.name}/{tb.name}")


# --------------------------------------------------------------------------
# Primitive inference rules

def assume(thy: Theory, prop: Term) -> Thm:
    prop = _certify_prop(thy, prop)
    return _mk_thm(frozenset((prop,)), prop, thy, rule="assume")


def implies_intro(prop: Term, thm: Thm) -> Thm:
    prop = _certify_prop(thm.theory, prop)
    hyps = frozenset(h for h in thm.hyps if not aconv(h, prop))
    return _mk_thm(hyps, mk_implies(prop, thm.prop), thm.theory,
                   rule="implies_intro", premises=(thm,))


def implies_elim(major: Thm, minor: Thm) -> Thm:
    a, b = dest_implies(major.prop)
    if not aconv(a, minor.prop):
        raise ShapeMismatch(
            f"implies_elim: minor premise {minor.prop!r} does not match {a!r}")
    thy = _join_theory(major, minor)
    return _mk_thm(major.hyps | minor.hyps, b, thy,
                   rule="implies_elim", premises=(major, minor))


def forall_intro(thm: Thm, v: Free) -> Thm:
    if not isinstance(v, Free):
        raise ShapeMismatch("forall_intro generalizes a free variable")
    for h in thm.hyps:
        if v.name in term_frees(h):
            raise VariableFreeInHypotheses(
                f"{v.name} occurs free in a hypothesis")
    return _mk_thm(thm.hyps, norm(mk_all(v, thm.prop)), thm.theory,
                   rule="forall_intro", premises=(thm,))


def forall_elim(thm: Thm, t: Term) -> Thm:
    prop = thm.prop
    if not is_all(prop):
        raise ShapeMismatch(f"not universally quantified: {prop!r}")
    body = prop.arg
    elemT = dest_funT(dest_funT(prop.fun.typ)[0])[0]
    argT = type_of(thm.theory, t)
    if argT != elemT:
        raise TypeMismatch(f"forall_elim: term has type {argT!r}, expected {elemT!r}")
    return _mk_thm(thm.hyps, norm(App(body, t)), thm.theory,
                   rule="forall_elim", premises=(thm,))


def reflexive(thy: Theory, t: Term) -> Thm:
    t = norm(t)
    ty = type_of(thy, t)
    return _mk_thm(frozenset(), mk_equals(t, t, ty), thy, rule="reflexive")


def symmetric(thm: Thm) -> Thm:
    t, u = dest_equals(thm.prop)
    ty = dest_funT(thm.prop.fun.fun.typ)[0]
    return _mk_thm(thm.hyps, mk_equals(u, t, ty), thm.theory,
                   rule="symmetric", premises=(thm,))


def transitive(thm1: Thm, thm2: Thm) -> Thm:
    t, u1 = dest_equals(thm1.prop)
    u2, v = dest_equals(thm2.prop)
    if not aconv(u1, u2):
        raise ShapeMismatch(f"transitive: {u1!r} vs {u2!r}")
    ty = dest_funT(thm1.prop.fun.fun.typ)[0]
    thy = _join_theory(thm1, thm2)
    return _mk_thm(thm1.hyps | thm2.hyps, mk_equals(t, v, ty), thy,
                   rule="transitive", premises=(thm1, thm2))


def combination(thm_fun: Thm, thm_arg: Thm) -> Thm:
    f, g = dest_equals(thm_fun.prop)
    t, u = dest_equals(thm_arg.prop)
    fT = dest_funT(thm_fun.prop.fun.fun.typ)[0]
    try:
        dom, rng = dest_funT(fT)
    except ValueError:
        raise TypeMismatch(f"combination: {f!r} is not a function") from None
    argT = dest_funT(thm_arg.prop.fun.fun.typ)[0]
    if dom != argT:
        raise TypeMismatch("combination: argument equality at wrong type")
    thy = _join_theory(thm_fun, thm_arg)
    return _mk_thm(thm_fun.hyps | thm_arg.hyps,
                   mk_equals(norm(App(f, t)), norm(App(g, u)), rng), thy,
                   rule="combination", premises=(thm_fun, thm_arg))


def abstract_rule(v: Free, thm: Thm) -> Thm:
    t, u = dest_equals(thm.prop)
    for h in thm.hyps:
        if v.name in term_frees(h):
            raise VariableFreeInHypotheses(
                f"{v.name} occurs free in a hypothesis")
    ty = dest_funT(thm.prop.fun.fun.typ)[0]
    lhs = norm(Abs(v.name, v.typ, abstract_over(v, t)))
    rhs = norm(Abs(v.name, v.typ, abstract_over(v, u)))
    return _mk_thm(thm.hyps, mk_equals(lhs, rhs, mk_funT(v.typ, ty)),
                   thm.theory, rule="abstract_rule", premises=(thm,))


def beta_conversion(thy: Theory, redex: Term) -> Thm:
    if not (isinstance(redex, App) and isinstance(redex.fun, Abs)):
        raise ShapeMismatch(f"not a beta redex: {redex!r}")
    ty = type_of(thy, redex)
    return _mk_thm(frozenset(), mk_equals(redex, norm(redex), ty), thy,
                   rule="beta_conversion")


def eta_conversion(thy: Theory, t: Term) -> Thm:
    ty = type_of(thy, t)
    return _mk_thm(frozenset(), mk_equals(t, norm(t), ty), thy,
                   rule="eta_conversion")


def equal_elim(eq: Thm, thm: Thm) -> Thm:
    a, b = dest_equals(eq.prop)
    if dest_funT(eq.prop.fun.fun.typ)[0] != propT:
        raise TypeMismatch("equal_elim needs an equality of propositions")
    if not aconv(a, thm.prop):
        raise ShapeMismatch(f"equal_elim: {thm.prop!r} does not match {a!r}")
    thy = _join_theory(eq, thm)
    return _mk_thm(eq.hyps | thm.hyps, b, thy,
                   rule="equal_elim", premises=(eq, thm))


def instantiate(thm: Thm, tsub=None, vsub=None) -> Thm:
    """Simultaneous capture-avoiding instantiation of schematic variables.

    tsub maps type-variable names to types; vsub maps (name, index) pairs
    or Var terms to terms.  Sorts are enforced; variables occurring in the
    hypotheses must not be instantiated.
    """
    thy = thm.theory
    tsub = dict(tsub or {})
    norm_vsub = {}
    for k, v in (vsub or {}).items():
        if isinstance(k, Var):
            norm_vsub[(k.name, k.index)] = v
        else:
            norm_vsub[k] = v

    if tsub:
        prop_tvars = term_tvars(thm.prop)
        hyp_tvars = {}
        for h in thm.hyps:
            term_tvars(h, hyp_tvars)
        for name, ty in tsub.items():
            tv = prop_tvars.get(name)
            if tv is None:
                if name in hyp_tvars:
                    raise HypothesisVariable(
                        f"type variable {name} occurs in the hypotheses")
                continue
            if name in hyp_tvars:
                raise HypothesisVariable(
                    f"type variable {name} occurs in the hypotheses")
            _check_type(thy, ty)
            if not thy.of_sort(ty, tv.sort):
                raise SortViolation(
                    f"{ty!r} does not inhabit sort {set(tv.sort)} of {name}")

    prop = subst_term_types(thm.prop, tsub) if tsub else thm.prop

    if norm_vsub:
        hyp_vars = {}
        for h in thm.hyps:
            hyp_vars.update(term_vars(h))
        pvars = term_vars(prop)
        vmap = {}
        for key, image in norm_vsub.items():
            if key in hyp_vars:
                raise HypothesisVariable(
                    f"?{key[0]}.{key[1]} occurs in the hypotheses")
            var = pvars.get(key)
            if var is None:
                continue
            image = norm(image)
            if loose_bvar(image):
                raise ShapeMismatch("substitution image has loose bound variables")
            imageT = type_of(thy, image)
            if imageT != var.typ:
                raise TypeMismatch(
                    f"image for ?{key[0]} has type {imageT!r}, expected {var.typ!r}")
            vmap[key] = image
        prop = subst_vars(prop, vmap)

    return _mk_thm(thm.hyps, norm(prop), thy,
                   rule="instantiate", premises=(thm,))


def transfer(thm: Thm, thy: Theory) -> Thm:
    if not thy.includes(thm.theory):
        raise StampNotIncluded(
            f"theory {thy.name} does not include the theorem's stamps")
    if thy is thm.theory:
        return thm
    return _mk_thm(thm.hyps, thm.prop, thy, rule="transfer", premises=(thm,))


# --------------------------------------------------------------------------
# Overloaded definitions with the conservative circularity check

def define(thy: Theory, const: Const, rhs: Term, name=None) -> Theory:
    """Add the defining axiom const == rhs.

    The dependency graph over (constant, type instance) nodes, with edges
    joined up to unifiability of instances, must stay acyclic; same-constant
    instances must not overlap.  This is the composable conservative check,
    stricter than a full termination analysis.
    """
    if not isinstance(const, Const):
        raise ShapeMismatch("define expects a constant instance")
    declared = thy.consts.get(const.name)
    if declared is None:
        raise UndeclaredConstant(f"undeclared constant: {const.name}")
    match_types(thy.class_graph, thy.arities, _rename_tvars(declared), const.typ)

    rhs = norm(rhs)
    rhsT = type_of(thy, rhs)
    if rhsT != const.typ:
        raise TypeMismatch(f"definition of {const.name}: rhs has type {rhsT!r}")
    if term_frees(rhs) or loose_bvar(rhs):
        raise ShapeMismatch("definition right-hand side must be closed")
    if term_vars(rhs):
        raise ShapeMismatch("definition right-hand side must not be schematic")
    lhs_tvars = set(type_tvars(const.typ))
    extra = [n for n in term_tvars(rhs) if n not in lhs_tvars]
    if extra:
        raise ExtraTypeVariable(
            f"type variables {extra} of the right-hand side do not occur in "
            f"the constant instance")

    deps = tuple(sorted({(c.name, c.typ) for c in term_consts(rhs).values()},
                        key=lambda p: p[0]))
    entry = (const.name, const.typ, deps)

    for (cname, ctyp, _) in thy.definitions:
        if cname == const.name and _unifiable(thy, ctyp, const.typ):
            raise OverlappingInstance(
                f"{const.name} already defined at an overlapping instance")

    _check_acyclic(thy, entry)

    defs = thy.definitions + (entry,)
    defname = name or f"{const.name.split('.')[-1]}_def"
    body = mk_equals(const, rhs, const.typ)
    thy2 = thy._extend(definitions=defs)
    return add_axiom(thy2, defname, body)


def _unifiable(thy: Theory, ty1: Type, ty2: Type) -> bool:
    try:
        thy.type_unifier().unify(_rename_tvars(ty1), _rename_tvars(ty2))
        return True
    except UnifyError:
        return False


def _check_acyclic(thy: Theory, new_entry) -> None:
    # The graph was acyclic before, so any new cycle passes through the new
    # entry: walk its dependency cone (joining dependency instances with
    # definition instances up to unifiability) and fail on any edge back
    # into an instance unifiable with the one being defined.
    entries = thy.definitions + (new_entry,)
    new_name, new_typ, _ = new_entry
    seen = set()
    stack = [new_entry]
    while stack:
        entry = stack.pop()
        if id(entry) in seen:
            continue
        seen.add(id(entry))
        for (dname, dtyp) in entry[2]:
            if dname == new_name and _unifiable(thy, dtyp, new_typ):
                raise CircularDefinition(
                    f"defining {new_name} at {new_typ!r} creates a dependency cycle")
            for e in entries:
                if e[0] == dname and _unifiable(thy, e[1], dtyp):
                    stack.append(e)


# --------------------------------------------------------------------------
# Derived conveniences (no new trust: built from the primitives above)

def generalize(thm: Thm, frees=None) -> Thm:
    """Turn free variables (not occurring in hyps) into schematic ones."""
    if frees is None:
        hyp_free = set()
        for h in thm.hyps:
            hyp_free.update(term_frees(h))
        frees = [f for f in term_frees(thm.prop).values()
                 if f.name not in hyp_free]
    idx = max((v.index for v in term_vars(thm.prop)), default=-1) + 1
    for f in frees:
        thm = forall_elim(forall_intro(thm, f), Var(f.name, idx, f.typ))
    return thm


def forall_elim_vars(thm: Thm, index: int) -> Thm:
    """Strip outer meta-quantifiers into schematic variables at index."""
    while is_all(thm.prop):
        body = thm.prop.arg
        elemT = dest_funT(dest_funT(thm.prop.fun.typ)[0])[0]
        name = body.var_name if isinstance(body, Abs) else "x"
        thm = forall_elim(thm, Var(name, index, elemT))
    return thm
