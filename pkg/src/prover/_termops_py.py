"""Pure-Python implementation of the hot term kernel.

These are the innermost loops of the whole system: every inference step,
rewrite and unification sub-problem funnels through substitution and
normalization.  The compiled twin (_termops_c, built from _termops.pyx)
implements the same contract; termops selects one at import time.

All functions treat terms as immutable and return shared subterms
unchanged whenever possible.
"""

from __future__ import annotations

from .term import Abs, App, Bound, Const, Free, Term, Var

BACKEND = "python"


def incr_bv(t: Term, inc: int, lev: int = 0) -> Term:
    """Shift loose bound variables >= lev by inc."""
    if inc == 0:
        return t
    cls = type(t)
    if cls is Bound:
        if t.index >= lev:
            return Bound(t.index + inc)
        return t
    if cls is App:
        f = incr_bv(t.fun, inc, lev)
        a = incr_bv(t.arg, inc, lev)
        if f is t.fun and a is t.arg:
            return t
        return App(f, a)
    if cls is Abs:
        b = incr_bv(t.body, inc, lev + 1)
        if b is t.body:
            return t
        return Abs(t.var_name, t.var_type, b)
    return t


def incr_boundvars(t: Term, inc: int) -> Term:
    return incr_bv(t, inc, 0)


def loose_bvar(t: Term, depth: int = 0) -> bool:
    """True iff t has a bound variable index >= depth (an open term)."""
    cls = type(t)
    if cls is Bound:
        return t.index >= depth
    if cls is App:
        return loose_bvar(t.fun, depth) or loose_bvar(t.arg, depth)
    if cls is Abs:
        return loose_bvar(t.body, depth + 1)
    return False


def loose_bvar1(t: Term, k: int) -> bool:
    """True iff bound variable index k occurs loose in t."""
    cls = type(t)
    if cls is Bound:
        return t.index == k
    if cls is App:
        return loose_bvar1(t.fun, k) or loose_bvar1(t.arg, k)
    if cls is Abs:
        return loose_bvar1(t.body, k + 1)
    return False


def subst_bound(body: Term, arg: Term) -> Term:
    """One beta step: replace Bound 0 in body by arg (unnormalized)."""

    def go(t: Term, lev: int) -> Term:
        cls = type(t)
        if cls is Bound:
            i = t.index
            if i == lev:
                return incr_boundvars(arg, lev)
            if i > lev:
                return Bound(i - 1)
            return t
        if cls is App:
            f = go(t.fun, lev)
            a = go(t.arg, lev)
            if f is t.fun and a is t.arg:
                return t
            return App(f, a)
        if cls is Abs:
            b = go(t.body, lev + 1)
            if b is t.body:
                return t
            return Abs(t.var_name, t.var_type, b)
        return t

    return go(body, 0)


def norm(t: Term) -> Term:
    """Beta-normal, eta-contracted form.  Total on well-typed terms."""
    cls = type(t)
    if cls is App:
        f = norm(t.fun)
        if type(f) is Abs:
            return norm(subst_bound(f.body, t.arg))
        a = norm(t.arg)
        if f is t.fun and a is t.arg:
            return t
        return App(f, a)
    if cls is Abs:
        b = norm(t.body)
        # eta: %x. f x  ~>  f   when x not free in f
        if type(b) is App and type(b.arg) is Bound and b.arg.index == 0 \
                and not loose_bvar1(b.fun, 0):
            return incr_bv(b.fun, -1, 1)
        if b is t.body:
            return t
        return Abs(t.var_name, t.var_type, b)
    return t


def beta_norm(t: Term) -> Term:
    """Beta-normal form without eta contraction."""
    cls = type(t)
    if cls is App:
        f = beta_norm(t.fun)
        if type(f) is Abs:
            return beta_norm(subst_bound(f.body, t.arg))
        a = beta_norm(t.arg)
        if f is t.fun and a is t.arg:
            return t
        return App(f, a)
    if cls is Abs:
        b = beta_norm(t.body)
        if b is t.body:
            return t
        return Abs(t.var_name, t.var_type, b)
    return t


def aconv(t: Term, u: Term) -> bool:
    """Alpha-convertibility; == on terms is defined to agree with this."""
    if t is u:
        return True
    ct = type(t)
    if ct is not type(u):
        return False
    if ct is App:
        return aconv(t.fun, u.fun) and aconv(t.arg, u.arg)
    if ct is Abs:
        return t.var_type == u.var_type and aconv(t.body, u.body)
    return t == u


def abstract_over(v: Term, t: Term) -> Term:
    """Turn occurrences of the atomic term v (Free/Const/Var) into Bound 0.

    The result is the body for a new enclosing Abs.
    """

    def go(t: Term, lev: int) -> Term:
        if t == v and not isinstance(t, Bound):
            return Bound(lev)
        cls = type(t)
        if cls is App:
            f = go(t.fun, lev)
            a = go(t.arg, lev)
            if f is t.fun and a is t.arg:
                return t
            return App(f, a)
        if cls is Abs:
            b = go(t.body, lev + 1)
            if b is t.body:
                return t
            return Abs(t.var_name, t.var_type, b)
        if cls is Bound and t.index >= lev:
            return Bound(t.index + 1)
        return t

    return go(t, 0)


def subst_typ(ty, tsub):
    """Apply a type substitution {tvar name -> Type}."""
    if not tsub:
        return ty
    if type(ty).__name__ == "TVar":
        return tsub.get(ty.name, ty)
    args = ty.args
    new = tuple(subst_typ(a, tsub) for a in args)
    if new == args:
        return ty
    return type(ty)(ty.name, new)


def subst_term_types(t: Term, tsub) -> Term:
    """Apply a type substitution throughout a term."""
    if not tsub:
        return t
    cls = type(t)
    if cls is App:
        f = subst_term_types(t.fun, tsub)
        a = subst_term_types(t.arg, tsub)
        if f is t.fun and a is t.arg:
            return t
        return App(f, a)
    if cls is Abs:
        ty = subst_typ(t.var_type, tsub)
        b = subst_term_types(t.body, tsub)
        if ty is t.var_type and b is t.body:
            return t
        return Abs(t.var_name, ty, b)
    if cls is Bound:
        return t
    ty = subst_typ(t.typ, tsub)
    if ty is t.typ:
        return t
    if cls is Const:
        return Const(t.name, ty)
    if cls is Free:
        return Free(t.name, ty)
    return Var(t.name, t.index, ty)


def subst_vars(t: Term, vsub) -> Term:
    """Replace schematic variables by their images.

    Images must be closed with respect to bound variables (they are closed
    lambda terms in every legal substitution), so no shifting is needed.
    The result is NOT renormalized; callers beta-normalize afterwards.
    """
    if not vsub:
        return t
    cls = type(t)
    if cls is Var:
        return vsub.get((t.name, t.index), t)
    if cls is App:
        f = subst_vars(t.fun, vsub)
        a = subst_vars(t.arg, vsub)
        if f is t.fun and a is t.arg:
            return t
        return App(f, a)
    if cls is Abs:
        b = subst_vars(t.body, vsub)
        if b is t.body:
            return t
        return Abs(t.var_name, t.var_type, b)
    return t


def occs_var(name: str, index: int, t: Term) -> bool:
    """Does schematic variable ?name.index occur in t?"""
    cls = type(t)
    if cls is Var:
        return t.name == name and t.index == index
    if cls is App:
        return occs_var(name, index, t.fun) or occs_var(name, index, t.arg)
    if cls is Abs:
        return occs_var(name, index, t.body)
    return False
