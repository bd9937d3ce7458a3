"""Typed lambda-term language.

Terms use de Bruijn indices for bound variables (display names are kept on
binders for printing only and are ignored by equality and hashing, so ==
is alpha-equivalence).  Schematic variables (?x) are the unification
variables of the framework; free variables are fixed.  Type variables carry
a sort: a finite set of class names, the empty set admitting every type.
"""

from __future__ import annotations

from typing import Iterator

Sort = frozenset

TOP_SORT: Sort = frozenset()


def mk_sort(*classes: str) -> Sort:
    return frozenset(classes)


# --------------------------------------------------------------------------
# Types

class Type:
    __slots__ = ()


class TVar(Type):
    """Type variable with a sort constraint; all type variables unify."""

    __slots__ = ("name", "sort", "_hash")

    def __init__(self, name: str, sort: Sort = TOP_SORT):
        self.name = name
        self.sort = sort
        self._hash = None

    def __eq__(self, other):
        return (self is other) or (
            type(other) is TVar and self.name == other.name and self.sort == other.sort
        )

    def __hash__(self):
        h = self._hash
        if h is None:
            h = self._hash = hash((TVar, self.name, self.sort))
        return h

    def __repr__(self):
        if self.sort:
            return f"{self.name}::{{{','.join(sorted(self.sort))}}}"
        return self.name


class TCon(Type):
    """Type constructor applied to argument types."""

    __slots__ = ("name", "args", "_hash")

    def __init__(self, name: str, args: tuple = ()):
        self.name = name
        self.args = tuple(args)
        self._hash = None

    def __eq__(self, other):
        return (self is other) or (
            type(other) is TCon and self.name == other.name and self.args == other.args
        )

    def __hash__(self):
        h = self._hash
        if h is None:
            h = self._hash = hash((TCon, self.name, self.args))
        return h

    def __repr__(self):
        if not self.args:
            return self.name
        if self.name == "fun" and len(self.args) == 2:
            return f"({self.args[0]!r} => {self.args[1]!r})"
        return f"{' '.join(repr(a) for a in self.args)} {self.name}"


def mk_funT(arg: Type, res: Type) -> TCon:
    return TCon("fun", (arg, res))


def funT(*types: Type) -> Type:
    """Right-folded function type: funT(a, b, c) is a => b => c."""
    res = types[-1]
    for arg in reversed(types[:-1]):
        res = mk_funT(arg, res)
    return res


propT = TCon("prop")


def dest_funT(ty: Type) -> tuple[Type, Type]:
    if isinstance(ty, TCon) and ty.name == "fun" and len(ty.args) == 2:
        return ty.args[0], ty.args[1]
    raise ValueError(f"not a function type: {ty!r}")


def strip_funT(ty: Type) -> tuple[list[Type], Type]:
    args = []
    while isinstance(ty, TCon) and ty.name == "fun" and len(ty.args) == 2:
        args.append(ty.args[0])
        ty = ty.args[1]
    return args, ty


def type_tvars(ty: Type, acc=None) -> dict:
    """All type variables of ty, keyed by name (insertion ordered)."""
    if acc is None:
        acc = {}
    if isinstance(ty, TVar):
        acc.setdefault(ty.name, ty)
    else:
        for a in ty.args:
            type_tvars(a, acc)
    return acc


# --------------------------------------------------------------------------
# Terms

class Term:
    __slots__ = ()

    def __call__(self, *args: "Term") -> "Term":
        t = self
        for a in args:
            t = App(t, a)
        return t


class Const(Term):
    __slots__ = ("name", "typ", "_hash")

    def __init__(self, name: str, typ: Type):
        self.name = name
        self.typ = typ
        self._hash = None

    def __eq__(self, other):
        return (self is other) or (
            type(other) is Const and self.name == other.name and self.typ == other.typ
        )

    def __hash__(self):
        h = self._hash
        if h is None:
            h = self._hash = hash((Const, self.name, self.typ))
        return h

    def __repr__(self):
        return self.name


class Free(Term):
    __slots__ = ("name", "typ", "_hash")

    def __init__(self, name: str, typ: Type):
        self.name = name
        self.typ = typ
        self._hash = None

    def __eq__(self, other):
        return (self is other) or (
            type(other) is Free and self.name == other.name and self.typ == other.typ
        )

    def __hash__(self):
        h = self._hash
        if h is None:
            h = self._hash = hash((Free, self.name, self.typ))
        return h

    def __repr__(self):
        return self.name


class Var(Term):
    """Schematic variable ?name.index; the index supports bulk renaming."""

    __slots__ = ("name", "index", "typ", "_hash")

    def __init__(self, name: str, index: int, typ: Type):
        self.name = name
        self.index = index
        self.typ = typ
        self._hash = None

    def __eq__(self, other):
        return (self is other) or (
            type(other) is Var
            and self.name == other.name
            and self.index == other.index
            and self.typ == other.typ
        )

    def __hash__(self):
        h = self._hash
        if h is None:
            h = self._hash = hash((Var, self.name, self.index, self.typ))
        return h

    def __repr__(self):
        if self.index:
            return f"?{self.name}.{self.index}"
        return f"?{self.name}"


class Bound(Term):
    __slots__ = ("index",)

    def __init__(self, index: int):
        self.index = index

    def __eq__(self, other):
        return (self is other) or (type(other) is Bound and self.index == other.index)

    def __hash__(self):
        return hash((Bound, self.index))

    def __repr__(self):
        return f"B.{self.index}"


class Abs(Term):
    """Lambda abstraction; var_name is display-only (ignored by ==)."""

    __slots__ = ("var_name", "var_type", "body", "_hash")

    def __init__(self, var_name: str, var_type: Type, body: Term):
        self.var_name = var_name
        self.var_type = var_type
        self.body = body
        self._hash = None

    def __eq__(self, other):
        return (self is other) or (
            type(other) is Abs
            and self.var_type == other.var_type
            and self.body == other.body
        )

    def __hash__(self):
        h = self._hash
        if h is None:
            h = self._hash = hash((Abs, self.var_type, self.body))
        return h

    def __repr__(self):
        return f"(%{self.var_name}. {self.body!r})"


class App(Term):
    __slots__ = ("fun", "arg", "_hash")

    def __init__(self, fun: Term, arg: Term):
        self.fun = fun
        self.arg = arg
        self._hash = None

    def __eq__(self, other):
        return (self is other) or (
            type(other) is App and self.fun == other.fun and self.arg == other.arg
        )

    def __hash__(self):
        h = self._hash
        if h is None:
            h = self._hash = hash((App, self.fun, self.arg))
        return h

    def __repr__(self):
        return f"({self.fun!r} {self.arg!r})"


# --------------------------------------------------------------------------
# Structural helpers (cold path; the hot ops live in termops)

def list_comb(fun: Term, args) -> Term:
    for a in args:
        fun = App(fun, a)
    return fun


def strip_comb(t: Term) -> tuple[Term, list[Term]]:
    args = []
    while isinstance(t, App):
        args.append(t.arg)
        t = t.fun
    args.reverse()
    return t, args


def head_of(t: Term) -> Term:
    while isinstance(t, App):
        t = t.fun
    return t


def strip_abs(t: Term) -> tuple[list[tuple[str, Type]], Term]:
    binders = []
    while isinstance(t, Abs):
        binders.append((t.var_name, t.var_type))
        t = t.body
    return binders, t


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, App):
        yield from subterms(t.fun)
        yield from subterms(t.arg)
    elif isinstance(t, Abs):
        yield from subterms(t.body)


def term_vars(t: Term) -> dict:
    """Schematic variables of t keyed by (name, index), insertion ordered."""
    acc = {}
    for s in subterms(t):
        if isinstance(s, Var):
            acc.setdefault((s.name, s.index), s)
    return acc


def term_frees(t: Term) -> dict:
    acc = {}
    for s in subterms(t):
        if isinstance(s, Free):
            acc.setdefault(s.name, s)
    return acc


def term_consts(t: Term) -> dict:
    acc = {}
    for s in subterms(t):
        if isinstance(s, Const):
            acc.setdefault(s.name, s)
    return acc


def term_tvars(t: Term, acc=None) -> dict:
    if acc is None:
        acc = {}
    if isinstance(t, (Const, Free, Var)):
        type_tvars(t.typ, acc)
    elif isinstance(t, Abs):
        type_tvars(t.var_type, acc)
        term_tvars(t.body, acc)
    elif isinstance(t, App):
        term_tvars(t.fun, acc)
        term_tvars(t.arg, acc)
    return acc


def maxidx(t: Term) -> int:
    """Largest schematic index in t, -1 if none (for freshness)."""
    m = -1
    for s in subterms(t):
        if isinstance(s, Var) and s.index > m:
            m = s.index
    return m


def lambdas(frees, body: Term) -> Term:
    """Abstract the given Free variables out of body, innermost last."""
    from .termops import abstract_over
    for fv in reversed(list(frees)):
        body = Abs(fv.name, fv.typ, abstract_over(fv, body))
    return body
