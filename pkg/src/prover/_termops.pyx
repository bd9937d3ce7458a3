# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled twin of _termops_py; same contract, same algorithms.

Terms are ordinary Python objects; the win comes from compiled dispatch,
typed integer locals and the removal of interpreter overhead in the
recursion, which dominates every inference step.
"""

from .term import Abs, App, Bound, Const, Free, Var

BACKEND = "cython"

cdef object _Abs = Abs
cdef object _App = App
cdef object _Bound = Bound
cdef object _Const = Const
cdef object _Free = Free
cdef object _Var = Var


cpdef object incr_bv(object t, long inc, long lev=0):
    """Shift loose bound variables >= lev by inc."""
    cdef object cls, f, a, b
    cdef long i
    if inc == 0:
        return t
    cls = type(t)
    if cls is _Bound:
        i = t.index
        if i >= lev:
            return _Bound(i + inc)
        return t
    if cls is _App:
        f = incr_bv(t.fun, inc, lev)
        a = incr_bv(t.arg, inc, lev)
        if f is t.fun and a is t.arg:
            return t
        return _App(f, a)
    if cls is _Abs:
        b = incr_bv(t.body, inc, lev + 1)
        if b is t.body:
            return t
        return _Abs(t.var_name, t.var_type, b)
    return t


cpdef object incr_boundvars(object t, long inc):
    return incr_bv(t, inc, 0)


cpdef bint loose_bvar(object t, long depth=0):
    cdef object cls = type(t)
    if cls is _Bound:
        return t.index >= depth
    if cls is _App:
        return loose_bvar(t.fun, depth) or loose_bvar(t.arg, depth)
    if cls is _Abs:
        return loose_bvar(t.body, depth + 1)
    return False


cpdef bint loose_bvar1(object t, long k):
    cdef object cls = type(t)
    if cls is _Bound:
        return t.index == k
    if cls is _App:
        return loose_bvar1(t.fun, k) or loose_bvar1(t.arg, k)
    if cls is _Abs:
        return loose_bvar1(t.body, k + 1)
    return False


cdef object _subst_bound_go(object t, object arg, long lev):
    cdef object cls = type(t)
    cdef object f, a, b
    cdef long i
    if cls is _Bound:
        i = t.index
        if i == lev:
            return incr_boundvars(arg, lev)
        if i > lev:
            return _Bound(i - 1)
        return t
    if cls is _App:
        f = _subst_bound_go(t.fun, arg, lev)
        a = _subst_bound_go(t.arg, arg, lev)
        if f is t.fun and a is t.arg:
            return t
        return _App(f, a)
    if cls is _Abs:
        b = _subst_bound_go(t.body, arg, lev + 1)
        if b is t.body:
            return t
        return _Abs(t.var_name, t.var_type, b)
    return t


cpdef object subst_bound(object body, object arg):
    """One beta step: replace Bound 0 in body by arg (unnormalized)."""
    return _subst_bound_go(body, arg, 0)


cpdef object norm(object t):
    """Beta-normal, eta-contracted form.  Total on well-typed terms."""
    cdef object cls = type(t)
    cdef object f, a, b
    if cls is _App:
        f = norm(t.fun)
        if type(f) is _Abs:
            return norm(subst_bound(f.body, t.arg))
        a = norm(t.arg)
        if f is t.fun and a is t.arg:
            return t
        return _App(f, a)
    if cls is _Abs:
        b = norm(t.body)
        if type(b) is _App and type(b.arg) is _Bound and b.arg.index == 0 \
                and not loose_bvar1(b.fun, 0):
            return incr_bv(b.fun, -1, 1)
        if b is t.body:
            return t
        return _Abs(t.var_name, t.var_type, b)
    return t


cpdef object beta_norm(object t):
    """Beta-normal form without eta contraction."""
    cdef object cls = type(t)
    cdef object f, a, b
    if cls is _App:
        f = beta_norm(t.fun)
        if type(f) is _Abs:
            return beta_norm(subst_bound(f.body, t.arg))
        a = beta_norm(t.arg)
        if f is t.fun and a is t.arg:
            return t
        return _App(f, a)
    if cls is _Abs:
        b = beta_norm(t.body)
        if b is t.body:
            return t
        return _Abs(t.var_name, t.var_type, b)
    return t


cpdef bint aconv(object t, object u):
    if t is u:
        return True
    cdef object ct = type(t)
    if ct is not type(u):
        return False
    if ct is _App:
        return aconv(t.fun, u.fun) and aconv(t.arg, u.arg)
    if ct is _Abs:
        return t.var_type == u.var_type and aconv(t.body, u.body)
    return t == u


cdef object _abstract_go(object t, object v, long lev):
    cdef object cls = type(t)
    cdef object f, a, b
    if cls is not _Bound and t == v:
        return _Bound(lev)
    if cls is _App:
        f = _abstract_go(t.fun, v, lev)
        a = _abstract_go(t.arg, v, lev)
        if f is t.fun and a is t.arg:
            return t
        return _App(f, a)
    if cls is _Abs:
        b = _abstract_go(t.body, v, lev + 1)
        if b is t.body:
            return t
        return _Abs(t.var_name, t.var_type, b)
    if cls is _Bound and t.index >= lev:
        return _Bound(t.index + 1)
    return t


cpdef object abstract_over(object v, object t):
    """Turn occurrences of the atomic term v into Bound 0."""
    return _abstract_go(t, v, 0)


cpdef object subst_typ(object ty, dict tsub):
    """Apply a type substitution {tvar name -> Type}."""
    cdef tuple args, new
    if not tsub:
        return ty
    if type(ty).__name__ == "TVar":
        return tsub.get(ty.name, ty)
    args = ty.args
    new = tuple([subst_typ(a, tsub) for a in args])
    if new == args:
        return ty
    return type(ty)(ty.name, new)


cpdef object subst_term_types(object t, dict tsub):
    cdef object cls, f, a, b, ty
    if not tsub:
        return t
    cls = type(t)
    if cls is _App:
        f = subst_term_types(t.fun, tsub)
        a = subst_term_types(t.arg, tsub)
        if f is t.fun and a is t.arg:
            return t
        return _App(f, a)
    if cls is _Abs:
        ty = subst_typ(t.var_type, tsub)
        b = subst_term_types(t.body, tsub)
        if ty is t.var_type and b is t.body:
            return t
        return _Abs(t.var_name, ty, b)
    if cls is _Bound:
        return t
    ty = subst_typ(t.typ, tsub)
    if ty is t.typ:
        return t
    if cls is _Const:
        return _Const(t.name, ty)
    if cls is _Free:
        return _Free(t.name, ty)
    return _Var(t.name, t.index, ty)


cpdef object subst_vars(object t, dict vsub):
    """Replace schematic variables by their (closed) images; no renorm."""
    cdef object cls, f, a, b
    if not vsub:
        return t
    cls = type(t)
    if cls is _Var:
        return vsub.get((t.name, t.index), t)
    if cls is _App:
        f = subst_vars(t.fun, vsub)
        a = subst_vars(t.arg, vsub)
        if f is t.fun and a is t.arg:
            return t
        return _App(f, a)
    if cls is _Abs:
        b = subst_vars(t.body, vsub)
        if b is t.body:
            return t
        return _Abs(t.var_name, t.var_type, b)
    return t


cpdef bint occs_var(str name, long index, object t):
    cdef object cls = type(t)
    if cls is _Var:
        return t.name == name and t.index == index
    if cls is _App:
        return occs_var(name, index, t.fun) or occs_var(name, index, t.arg)
    if cls is _Abs:
        return occs_var(name, index, t.body)
    return False
