"""Order-sorted type structure: class graph, arities, sort algebra,
and unitary order-sorted type unification.

A sort is a finite set of class names, read as an intersection; the empty
sort admits every type.  Sorts are kept canonical (minimal antichains under
the subclass order) so equality is structural.
"""

from __future__ import annotations

import itertools

from .errors import (
    Clash,
    CoregularityViolation,
    DuplicateClass,
    NoSortInstance,
    OccursCheck,
    SortViolation,
    UnknownClass,
)
from .term import Sort, TCon, TVar, Type, mk_sort

_fresh_tvar_counter = itertools.count()


def fresh_tvar_name() -> str:
    return f"'g{next(_fresh_tvar_counter)}"


class ClassGraph:
    """Immutable acyclic hierarchy of type classes.

    Each class may carry a signature (constant names introduced with it)
    and axiom schemas over a single type variable of that class; those are
    the proof obligations of instance declarations.
    """

    __slots__ = ("supers", "signatures", "axioms", "_closure")

    def __init__(self, supers=None, signatures=None, axioms=None):
        self.supers = dict(supers or {})        # class -> frozenset of direct supers
        self.signatures = dict(signatures or {})  # class -> tuple of const names
        self.axioms = dict(axioms or {})        # class -> {axiom name -> prop Term}
        self._closure = {}

    def has_class(self, name: str) -> bool:
        return name in self.supers

    def check_class(self, name: str) -> None:
        if name not in self.supers:
            raise UnknownClass(f"unknown class: {name}")

    def super_closure(self, name: str) -> frozenset:
        """Reflexive-transitive superclasses of name."""
        cached = self._closure.get(name)
        if cached is not None:
            return cached
        self.check_class(name)
        acc = {name}
        for s in self.supers[name]:
            acc |= self.super_closure(s)
        result = frozenset(acc)
        self._closure[name] = result
        return result

    def subclass(self, c1: str, c2: str) -> bool:
        """c1 is (reflexively) at least as strong as c2."""
        return c2 in self.super_closure(c1)

    def canon_sort(self, sort) -> Sort:
        """Minimal antichain: drop any class implied by another member."""
        keep = []
        for c in sort:
            self.check_class(c)
            if any(o != c and self.subclass(o, c) and not self.subclass(c, o)
                   for o in sort):
                continue
            keep.append(c)
        return frozenset(keep)

    def sort_le(self, s1, s2) -> bool:
        """s1 is a subsort of (at least as strong as) s2."""
        return all(any(self.subclass(c1, c2) for c1 in s1) for c2 in s2)

    def inter_sort(self, s1, s2) -> Sort:
        return self.canon_sort(frozenset(s1) | frozenset(s2))

    def with_class(self, name, superclasses=(), signature=(), axioms=None) -> "ClassGraph":
        if name in self.supers:
            raise DuplicateClass(f"class already declared: {name}")
        for s in superclasses:
            self.check_class(s)
        supers = dict(self.supers)
        supers[name] = frozenset(superclasses)
        sigs = dict(self.signatures)
        sigs[name] = tuple(signature)
        axs = dict(self.axioms)
        axs[name] = dict(axioms or {})
        return ClassGraph(supers, sigs, axs)

    def all_axioms(self, name: str):
        """Axiom obligations of name and all its superclasses."""
        out = {}
        for c in sorted(self.super_closure(name)):
            out.update(self.axioms.get(c, {}))
        return out


class ArityTable:
    """Declared arities (constructor, argument sorts, class).

    Coregularity is enforced on declaration: for comparable classes the
    argument sorts must be pointwise comparable the same way, which keeps
    order-sorted unification unitary.
    """

    __slots__ = ("arities",)

    def __init__(self, arities=None):
        # constructor -> tuple of (class, argsorts tuple)
        self.arities = dict(arities or {})

    def with_arity(self, cg: ClassGraph, tycon: str, argsorts, cls: str) -> "ArityTable":
        cg.check_class(cls)
        argsorts = tuple(cg.canon_sort(s) for s in argsorts)
        for (c0, ss0) in self.arities.get(tycon, ()):
            if cg.subclass(cls, c0) and not _pointwise_le(cg, argsorts, ss0):
                raise CoregularityViolation(
                    f"{tycon}::{cls} argument sorts must strengthen those of {c0}")
            if cg.subclass(c0, cls) and not _pointwise_le(cg, ss0, argsorts):
                raise CoregularityViolation(
                    f"{tycon}::{cls} argument sorts must weaken those of {c0}")
            if c0 == cls:
                raise CoregularityViolation(f"duplicate arity {tycon}::{cls}")
        entries = dict(self.arities)
        entries[tycon] = self.arities.get(tycon, ()) + ((cls, argsorts),)
        return ArityTable(entries)

    def domain(self, cg: ClassGraph, tycon: str, cls: str):
        """Weakest argument sorts making tycon(args) a member of cls."""
        candidates = [ss for (c0, ss) in self.arities.get(tycon, ())
                      if cg.subclass(c0, cls)]
        if not candidates:
            return None
        weakest = candidates[0]
        for ss in candidates[1:]:
            if _pointwise_le(cg, weakest, ss):
                weakest = ss
            elif not _pointwise_le(cg, ss, weakest):
                # incomparable routes: fall back to the (sound, stronger)
                # pointwise intersection
                weakest = tuple(cg.inter_sort(a, b) for a, b in zip(weakest, ss))
        return weakest

    def mg_domain(self, cg: ClassGraph, tycon: str, sort):
        """Weakest argument sorts making tycon(args) a member of sort."""
        doms = None
        for c in sort:
            d = self.domain(cg, tycon, c)
            if d is None:
                raise NoSortInstance(f"no arity makes {tycon} :: {c}")
            doms = d if doms is None else tuple(
                cg.inter_sort(a, b) for a, b in zip(doms, d))
        return doms


def _pointwise_le(cg: ClassGraph, ss1, ss2) -> bool:
    return len(ss1) == len(ss2) and all(cg.sort_le(a, b) for a, b in zip(ss1, ss2))


# --------------------------------------------------------------------------
# Sort membership

def of_sort(cg: ClassGraph, at: ArityTable, ty: Type, sort) -> bool:
    """Does ty inhabit every class of sort?"""
    if not sort:
        return True
    if isinstance(ty, TVar):
        return cg.sort_le(ty.sort, sort)
    try:
        doms = at.mg_domain(cg, ty.name, sort)
    except NoSortInstance:
        return False
    return all(of_sort(cg, at, a, d) for a, d in zip(ty.args, doms))


# --------------------------------------------------------------------------
# Order-sorted unification and matching

def _walk(tsub, ty: Type) -> Type:
    while isinstance(ty, TVar):
        nxt = tsub.get(ty.name)
        if nxt is None:
            return ty
        ty = nxt
    return ty


def _occurs(tsub, name: str, ty: Type) -> bool:
    ty = _walk(tsub, ty)
    if isinstance(ty, TVar):
        return ty.name == name
    return any(_occurs(tsub, name, a) for a in ty.args)


def resolve_type(tsub, ty: Type) -> Type:
    """Fully apply a (triangular) type substitution."""
    ty = _walk(tsub, ty)
    if isinstance(ty, TVar):
        return ty
    args = tuple(resolve_type(tsub, a) for a in ty.args)
    if args == ty.args:
        return ty
    return TCon(ty.name, args)


class TypeUnifier:
    """Unitary order-sorted unification in a class/arity context.

    Holds a triangular substitution; unify/constrain/match extend it in
    place, raising Clash/OccursCheck/NoSortInstance/SortViolation on
    failure (callers snapshot or rebuild on backtracking).
    """

    __slots__ = ("cg", "at", "tsub")

    def __init__(self, cg: ClassGraph, at: ArityTable, tsub=None):
        self.cg = cg
        self.at = at
        self.tsub = dict(tsub or {})

    def copy(self) -> "TypeUnifier":
        return TypeUnifier(self.cg, self.at, self.tsub)

    def resolve(self, ty: Type) -> Type:
        return resolve_type(self.tsub, ty)

    def unify(self, t1: Type, t2: Type) -> None:
        t1 = _walk(self.tsub, t1)
        t2 = _walk(self.tsub, t2)
        if isinstance(t1, TVar) and isinstance(t2, TVar):
            if t1.name == t2.name:
                return
            inter = self.cg.inter_sort(t1.sort, t2.sort)
            if inter == self.cg.canon_sort(t1.sort):
                self.tsub[t2.name] = TVar(t1.name, inter)
            elif inter == self.cg.canon_sort(t2.sort):
                self.tsub[t1.name] = t2
            else:
                fresh = TVar(fresh_tvar_name(), inter)
                self.tsub[t1.name] = fresh
                self.tsub[t2.name] = fresh
            return
        if isinstance(t1, TVar):
            self._bind(t1, t2)
            return
        if isinstance(t2, TVar):
            self._bind(t2, t1)
            return
        if t1.name != t2.name or len(t1.args) != len(t2.args):
            raise Clash(f"type constructor clash: {t1!r} vs {t2!r}")
        for a, b in zip(t1.args, t2.args):
            self.unify(a, b)

    def _bind(self, var: TVar, ty: Type) -> None:
        if _occurs(self.tsub, var.name, ty):
            raise OccursCheck(f"{var!r} occurs in {ty!r}")
        self.constrain(ty, var.sort)
        self.tsub[var.name] = ty

    def constrain(self, ty: Type, sort) -> None:
        """Strengthen variables inside ty so that ty :: sort holds."""
        if not sort:
            return
        ty = _walk(self.tsub, ty)
        if isinstance(ty, TVar):
            if not self.cg.sort_le(ty.sort, sort):
                inter = self.cg.inter_sort(ty.sort, sort)
                self.tsub[ty.name] = TVar(fresh_tvar_name(), inter)
            return
        doms = self.at.mg_domain(self.cg, ty.name, sort)  # NoSortInstance on failure
        for a, d in zip(ty.args, doms):
            self.constrain(a, d)

    def match(self, pat: Type, obj: Type) -> None:
        """One-sided: instantiate only pattern variables; obj is fixed."""
        pat = _walk(self.tsub, pat)
        if isinstance(pat, TVar):
            if not of_sort(self.cg, self.at, obj, pat.sort):
                raise SortViolation(f"{obj!r} does not inhabit sort {set(pat.sort)}")
            if isinstance(obj, TVar) and obj.name == pat.name:
                return
            self.tsub[pat.name] = obj
            return
        if isinstance(obj, TVar) or pat.name != obj.name or len(pat.args) != len(obj.args):
            raise Clash(f"type mismatch: {pat!r} vs {obj!r}")
        for a, b in zip(pat.args, obj.args):
            self.match(a, b)


def unify_types(cg: ClassGraph, at: ArityTable, t1: Type, t2: Type, tsub=None) -> dict:
    """Most general order-sorted unifier of t1 and t2 extending tsub.

    Returns a triangular substitution (resolve with resolve_type); raises
    Clash, OccursCheck or NoSortInstance.
    """
    u = TypeUnifier(cg, at, tsub)
    u.unify(t1, t2)
    return u.tsub


def match_types(cg: ClassGraph, at: ArityTable, pat: Type, obj: Type, tsub=None) -> dict:
    u = TypeUnifier(cg, at, tsub)
    u.match(pat, obj)
    return u.tsub
