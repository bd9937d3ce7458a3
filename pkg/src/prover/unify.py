"""Term unification.

Three layers, each lazy about work it does not need:

* is_pattern      - recognize higher-order patterns (every schematic
                    variable applied to distinct bound variables);
* pattern_unify / pattern_match
                  - deterministic most-general unification/matching on
                    patterns, no search;
* ho_unify        - depth-bounded Huet-style search (projections before
                    imitations) yielding a lazy stream of unifiers, with
                    pattern sub-problems short-circuited deterministically
                    and terminal flex-flex pairs closed by the trivial
                    constant-function assignment.
"""

from __future__ import annotations

from typing import Iterator, Optional

from .errors import Clash, NoMatch, OccursCheck, UnifyError
from .sorts import resolve_type
from .term import (
    Abs,
    App,
    Bound,
    Const,
    Free,
    TVar,
    Term,
    Type,
    Var,
    dest_funT,
    list_comb,
    funT,
    mk_funT,
    strip_comb,
    strip_funT,
    term_vars,
)
from .termops import incr_boundvars, loose_bvar, norm, subst_term_types, subst_vars


class _NonPattern(UnifyError):
    """Internal: a sub-problem fell outside the pattern fragment."""


# --------------------------------------------------------------------------
# Envelope: shared unification state

class Envelope:
    """Unifier under construction: type and term substitutions plus the
    next fresh schematic index.  Substitutions are triangular; use
    resolve_term/resolve_type to read results off."""

    __slots__ = ("thy", "tsub", "vsub", "fresh")

    def __init__(self, thy, tsub=None, vsub=None, fresh=0):
        self.thy = thy
        self.tsub = dict(tsub or {})
        self.vsub = dict(vsub or {})
        self.fresh = fresh

    def copy(self) -> "Envelope":
        return Envelope(self.thy, self.tsub, self.vsub, self.fresh)

    def fresh_var(self, typ: Type, name="H") -> Var:
        v = Var(name, self.fresh, typ)
        self.fresh += 1
        return v

    def bind(self, var: Var, image: Term) -> None:
        self.vsub[(var.name, var.index)] = image

    def lookup(self, var: Var) -> Optional[Term]:
        return self.vsub.get((var.name, var.index))

    def resolve_typ(self, ty: Type) -> Type:
        return resolve_type(self.tsub, ty)

    def unify_types(self, t1: Type, t2: Type) -> None:
        u = self.thy.type_unifier(self.tsub)
        u.unify(t1, t2)
        self.tsub = u.tsub

    def match_types(self, pat: Type, obj: Type) -> None:
        u = self.thy.type_unifier(self.tsub)
        u.match(pat, obj)
        self.tsub = u.tsub

    def resolve_term(self, t: Term) -> Term:
        """Fully apply the substitutions and beta-eta-normalize."""
        while True:
            t2 = norm(subst_vars(subst_term_types(t, self.tsub), self.vsub))
            if t2 == t:
                return t2
            t = t2

    def norm_vsub(self) -> dict:
        """The term substitution with fully resolved images."""
        return {k: self.resolve_term(v) for k, v in self.vsub.items()}


def _initial_env(thy, *terms, env=None) -> Envelope:
    if env is not None:
        e = env.copy()
    else:
        e = Envelope(thy)
    m = e.fresh
    for t in terms:
        for (_, idx) in term_vars(t):
            if idx >= m:
                m = idx + 1
    e.fresh = m
    return e


# --------------------------------------------------------------------------
# Pattern recognition

def is_pattern(t: Term) -> bool:
    """Is every schematic variable applied to distinct bound variables?

    The term must be beta-normal.
    """

    def check(t: Term) -> bool:
        head, args = strip_comb(t)
        if isinstance(head, Var):
            seen = set()
            for a in args:
                if not isinstance(a, Bound) or a.index in seen:
                    return False
                seen.add(a.index)
            return True
        if isinstance(head, Abs):
            if not check(head.body):
                return False
        return all(check(a) for a in args)

    return check(t)


def _devar(env: Envelope, t: Term) -> Term:
    """Expand a bound head variable and beta-normalize, repeatedly."""
    while True:
        head, args = strip_comb(t)
        if isinstance(head, Var):
            image = env.lookup(head)
            if image is not None:
                t = norm(list_comb(image, args))
                continue
        return t


def _occurs(env: Envelope, var: Var, t: Term) -> bool:
    head, args = strip_comb(_devar(env, t))
    if isinstance(head, Var) and head.name == var.name and head.index == var.index:
        return True
    if isinstance(head, Abs):
        if _occurs(env, var, head.body):
            return True
    return any(_occurs(env, var, a) for a in args)


def _bound_args(args) -> Optional[list]:
    """The de Bruijn indices of args if they are distinct bounds, else None."""
    out = []
    for a in args:
        if not isinstance(a, Bound) or a.index in out:
            return None
        out.append(a.index)
    return out


# --------------------------------------------------------------------------
# Pattern unification (deterministic; most general unifiers)

def pattern_unify(env: Optional[Envelope], t: Term, u: Term, thy=None) -> Envelope:
    """Most general unifier of two higher-order patterns, extending env.

    Raises Clash/OccursCheck on genuine failure and falls back with
    _NonPattern when a sub-problem leaves the pattern fragment.
    """
    if env is None:
        env = _initial_env(thy, t, u)
    else:
        env = _initial_env(env.thy, t, u, env=env)
    _unif(env, norm(t), norm(u), 0)
    return env


def _unif(env: Envelope, t: Term, u: Term, depth: int) -> None:
    t = _devar(env, t)
    u = _devar(env, u)
    if isinstance(t, Abs) and isinstance(u, Abs):
        env.unify_types(t.var_type, u.var_type)
        _unif(env, t.body, u.body, depth + 1)
        return
    if isinstance(t, Abs):
        _unif(env, t.body, App(incr_boundvars(u, 1), Bound(0)), depth + 1)
        return
    if isinstance(u, Abs):
        _unif(env, App(incr_boundvars(t, 1), Bound(0)), u.body, depth + 1)
        return
    th, targs = strip_comb(t)
    uh, uargs = strip_comb(u)
    t_flex = isinstance(th, Var)
    u_flex = isinstance(uh, Var)
    if t_flex and u_flex:
        _flexflex(env, th, targs, uh, uargs)
    elif t_flex:
        _flexrigid(env, th, targs, u)
    elif u_flex:
        _flexrigid(env, uh, uargs, t)
    else:
        _rigidrigid(env, th, targs, uh, uargs, depth)


def _rigidrigid(env: Envelope, th, targs, uh, uargs, depth: int) -> None:
    if type(th) is not type(uh):
        raise Clash(f"head clash: {th!r} vs {uh!r}")
    if isinstance(th, Bound):
        if th.index != uh.index:
            raise Clash(f"bound variable clash: {th!r} vs {uh!r}")
    elif isinstance(th, (Const, Free)):
        if th.name != uh.name:
            raise Clash(f"head clash: {th!r} vs {uh!r}")
        env.unify_types(th.typ, uh.typ)
    else:
        raise Clash(f"unexpected rigid head {th!r}")
    if len(targs) != len(uargs):
        raise Clash("argument count mismatch")
    for a, b in zip(targs, uargs):
        _unif(env, a, b, depth)


def _flexrigid(env: Envelope, fvar: Var, args, t: Term) -> None:
    idxs = _bound_args(args)
    if idxs is None:
        raise _NonPattern(f"?{fvar.name} applied to non-bound arguments")
    if _occurs(env, fvar, t):
        raise OccursCheck(f"?{fvar.name} occurs in the opposite term")
    # perm: outer bound index -> argument position (from the left)
    perm = {b: i for i, b in enumerate(idxs)}
    k = len(idxs)
    body = _mk_image(env, t, perm, k, 0)
    argTs = strip_funT(env.resolve_typ(fvar.typ))[0][:k]
    image = body
    for i in range(k - 1, -1, -1):
        image = Abs(f"x{i}", argTs[i], image)
    env.bind(fvar, norm(image))


def _mk_image(env: Envelope, t: Term, perm: dict, k: int, d: int) -> Term:
    """Map t into the body of a k-ary abstraction; perm sends outer bound
    indices to argument positions.  Unmappable bounds under flexible heads
    are pruned; elsewhere they fail."""
    t = _devar(env, t)
    if isinstance(t, Abs):
        return Abs(t.var_name, env.resolve_typ(t.var_type),
                   _mk_image(env, t.body, perm, k, d + 1))
    head, args = strip_comb(t)
    if isinstance(head, Var):
        idxs = _bound_args(args)
        if idxs is None:
            raise _NonPattern(f"?{head.name} applied to non-bound arguments")
        keep = []
        for pos, b in enumerate(idxs):
            if b < d or (b - d) in perm:
                keep.append(pos)
        if len(keep) == len(idxs):
            new_args = [_map_bound(b, perm, k, d) for b in idxs]
            return list_comb(head, new_args)
        # prune the variable: ?G -> %ys. ?G'(kept ys)
        argTs, resT = strip_funT(env.resolve_typ(head.typ))
        keptTs = [argTs[p] for p in keep]
        g2 = env.fresh_var(funT(*keptTs, resT), name=head.name)
        inner = list_comb(g2, [Bound(len(idxs) - 1 - p) for p in keep])
        image = inner
        for i in range(len(idxs) - 1, -1, -1):
            image = Abs(f"y{i}", argTs[i], image)
        env.bind(head, image)
        new_args = [_map_bound(idxs[p], perm, k, d) for p in keep]
        return list_comb(g2, new_args)
    if isinstance(head, Bound):
        mapped = _map_bound(head.index, perm, k, d)
        return list_comb(mapped, [_mk_image(env, a, perm, k, d) for a in args])
    return list_comb(head, [_mk_image(env, a, perm, k, d) for a in args])


def _map_bound(b: int, perm: dict, k: int, d: int):
    if b < d:
        return Bound(b)
    outer = b - d
    pos = perm.get(outer)
    if pos is None:
        raise Clash("bound variable escapes its scope")
    return Bound(k - 1 - pos + d)


def _flexflex(env: Envelope, f: Var, fargs, g: Var, gargs) -> None:
    fidx = _bound_args(fargs)
    gidx = _bound_args(gargs)
    if fidx is None or gidx is None:
        raise _NonPattern("flex-flex pair outside the pattern fragment")
    f_argTs, resT = strip_funT(env.resolve_typ(f.typ))
    f_argTs = f_argTs[:len(fidx)]
    g_argTs = strip_funT(env.resolve_typ(g.typ))[0][:len(gidx)]
    if f.name == g.name and f.index == g.index:
        # ?F xs == ?F ys: keep positions where both agree
        keep = [i for i, (a, b) in enumerate(zip(fidx, gidx)) if a == b]
        keptTs = [f_argTs[i] for i in keep]
        h = env.fresh_var(funT(*keptTs, resT))
        body = list_comb(h, [Bound(len(fidx) - 1 - i) for i in keep])
        image = body
        for i in range(len(fidx) - 1, -1, -1):
            image = Abs(f"x{i}", f_argTs[i], image)
        env.bind(f, image)
        return
    # ?F xs == ?G ys: restrict both to the common bound variables
    common = [b for b in fidx if b in gidx]
    keptTs = [f_argTs[fidx.index(b)] for b in common]
    h = env.fresh_var(funT(*keptTs, resT))
    f_body = list_comb(h, [Bound(len(fidx) - 1 - fidx.index(b)) for b in common])
    g_body = list_comb(h, [Bound(len(gidx) - 1 - gidx.index(b)) for b in common])
    f_image = f_body
    for i in range(len(fidx) - 1, -1, -1):
        f_image = Abs(f"x{i}", f_argTs[i], f_image)
    g_image = g_body
    for i in range(len(gidx) - 1, -1, -1):
        g_image = Abs(f"y{i}", g_argTs[i], g_image)
    env.bind(f, f_image)
    env.bind(g, g_image)


# --------------------------------------------------------------------------
# Pattern matching (one-sided)

def pattern_match(env: Optional[Envelope], pattern: Term, obj: Term, thy=None) -> Envelope:
    """Match pattern against obj, instantiating only pattern variables.

    Schematic variables of obj are treated as opaque atoms.  Raises
    NoMatch on failure.
    """
    if env is None:
        env = _initial_env(thy, pattern, obj)
    else:
        env = _initial_env(env.thy, pattern, obj, env=env)
    try:
        _match(env, norm(pattern), norm(obj), 0)
    except UnifyError as e:
        if isinstance(e, NoMatch):
            raise
        raise NoMatch(str(e)) from e
    return env


def _match(env: Envelope, p: Term, o: Term, depth: int) -> None:
    p = _devar(env, p)
    if isinstance(p, Abs) and isinstance(o, Abs):
        env.match_types(p.var_type, o.var_type)
        _match(env, p.body, o.body, depth + 1)
        return
    if isinstance(p, Abs):
        _match(env, p.body, App(incr_boundvars(o, 1), Bound(0)), depth + 1)
        return
    if isinstance(o, Abs):
        _match(env, App(incr_boundvars(p, 1), Bound(0)), o.body, depth + 1)
        return
    ph, pargs = strip_comb(p)
    oh, oargs = strip_comb(o)
    if isinstance(ph, Var):
        idxs = _bound_args(pargs)
        if idxs is None:
            raise _NonPattern(f"?{ph.name} applied to non-bound arguments")
        perm = {b: i for i, b in enumerate(idxs)}
        k = len(idxs)
        body = _match_image(env, o, perm, k, 0)
        argTs = strip_funT(env.resolve_typ(ph.typ))[0][:k]
        image = body
        for i in range(k - 1, -1, -1):
            image = Abs(f"x{i}", argTs[i], image)
        image = norm(image)
        prev = env.lookup(ph)
        if prev is not None:
            if env.resolve_term(prev) != env.resolve_term(image):
                raise NoMatch(f"?{ph.name} matched twice inconsistently")
            return
        env.bind(ph, image)
        return
    if type(ph) is not type(oh):
        raise NoMatch(f"head mismatch: {ph!r} vs {oh!r}")
    if isinstance(ph, Bound):
        if ph.index != oh.index:
            raise NoMatch(f"bound mismatch: {ph!r} vs {oh!r}")
    elif isinstance(ph, (Const, Free)):
        if ph.name != oh.name:
            raise NoMatch(f"head mismatch: {ph!r} vs {oh!r}")
        env.match_types(ph.typ, oh.typ)
    elif isinstance(ph, Var):
        pass
    if len(pargs) != len(oargs):
        raise NoMatch("argument count mismatch")
    for a, b in zip(pargs, oargs):
        _match(env, a, b, depth)


def _match_image(env: Envelope, o: Term, perm: dict, k: int, d: int) -> Term:
    """Like _mk_image but object variables are opaque: no pruning."""
    o = _devar(env, o)
    if isinstance(o, Abs):
        return Abs(o.var_name, o.var_type, _match_image(env, o.body, perm, k, d + 1))
    head, args = strip_comb(o)
    if isinstance(head, Bound):
        mapped = _map_bound(head.index, perm, k, d)
        return list_comb(mapped, [_match_image(env, a, perm, k, d) for a in args])
    return list_comb(head, [_match_image(env, a, perm, k, d) for a in args])


def matches(thy, pattern: Term, obj: Term) -> bool:
    try:
        pattern_match(None, pattern, obj, thy=thy)
        return True
    except UnifyError:
        return False


# --------------------------------------------------------------------------
# Full higher-order unification (Huet), lazy and depth-bounded

DEFAULT_DEPTH = 10


class UnifierStream:
    """Iterator over unifiers; depth_exhausted reports whether the search
    was cut off (as opposed to genuinely running out of alternatives)."""

    def __init__(self, gen):
        self._gen = gen
        self.depth_exhausted = False

    def __iter__(self) -> Iterator[Envelope]:
        return self._gen


def ho_unify(thy, t: Term, u: Term, depth_bound: int = DEFAULT_DEPTH,
             env: Optional[Envelope] = None) -> UnifierStream:
    """Lazily enumerate unifiers of t and u.

    Pattern sub-problems are solved deterministically; branching happens
    only on genuinely higher-order flex-rigid pairs, projections first,
    then imitation.  Remaining (non-pattern) flex-flex pairs are closed by
    binding both variables to constant functions onto one fresh variable.
    """
    e = _initial_env(thy, t, u, env=env)
    stream = UnifierStream(None)

    def solve(env: Envelope, pairs: list, depth: int):
        # deterministic simplification sweep
        queue = list(pairs)
        stuck = []
        while queue:
            a, b = queue.pop(0)
            a = _devar(env, a)
            b = _devar(env, b)
            if isinstance(a, Abs) or isinstance(b, Abs):
                if isinstance(a, Abs) and isinstance(b, Abs):
                    try:
                        env.unify_types(a.var_type, b.var_type)
                    except UnifyError:
                        return
                    queue.append((a.body, b.body))
                elif isinstance(a, Abs):
                    queue.append((a.body, App(incr_boundvars(b, 1), Bound(0))))
                else:
                    queue.append((App(incr_boundvars(a, 1), Bound(0)), b.body))
                continue
            ah, aargs = strip_comb(a)
            bh, bargs = strip_comb(b)
            a_flex = isinstance(ah, Var)
            b_flex = isinstance(bh, Var)
            if not a_flex and not b_flex:
                if type(ah) is not type(bh):
                    return
                if isinstance(ah, Bound):
                    if ah.index != bh.index:
                        return
                elif ah.name != bh.name:
                    return
                else:
                    try:
                        env.unify_types(ah.typ, bh.typ)
                    except UnifyError:
                        return
                if len(aargs) != len(bargs):
                    return
                queue.extend(zip(aargs, bargs))
                continue
            # at least one flex head: try the deterministic pattern step
            try:
                snapshot = env.copy()
                if a_flex and b_flex:
                    _flexflex(env, ah, aargs, bh, bargs)
                elif a_flex:
                    _flexrigid(env, ah, aargs, b)
                else:
                    _flexrigid(env, bh, bargs, a)
                continue
            except _NonPattern:
                env.tsub, env.vsub, env.fresh = \
                    snapshot.tsub, snapshot.vsub, snapshot.fresh
                stuck.append((a, b))
            except UnifyError:
                return
        if not stuck:
            yield env
            return
        # branch on the first non-pattern flex-rigid pair
        branch = None
        for i, (a, b) in enumerate(stuck):
            ah, _ = strip_comb(_devar(env, a))
            bh, _ = strip_comb(_devar(env, b))
            if isinstance(ah, Var) != isinstance(bh, Var):
                branch = i
                break
        if branch is None:
            # only flex-flex pairs remain: trivial constant assignment
            solved = _assign_flexflex(env, stuck)
            if solved is not None:
                yield solved
            return
        if depth <= 0:
            stream.depth_exhausted = True
            return
        a, b = stuck.pop(branch)
        a = _devar(env, a)
        b = _devar(env, b)
        ah, aargs = strip_comb(a)
        if not isinstance(ah, Var):
            a, b = b, a
            ah, aargs = strip_comb(a)
        rest = stuck
        for binding in _huet_bindings(env, ah, b):
            env2 = env.copy()
            try:
                env2.bind(ah, binding(env2))
            except UnifyError:
                continue
            yield from solve(env2, [(a, b)] + rest, depth - 1)

    def _huet_bindings(env: Envelope, fvar: Var, rigid: Term):
        """Projection (low index first) then imitation binding makers."""
        argTs, resT = strip_funT(env.resolve_typ(fvar.typ))
        k = len(argTs)
        makers = []
        for i in range(k):
            makers.append(_projection_maker(argTs, resT, i, env))
        rh, _ = strip_comb(_devar(env, rigid))
        if isinstance(rh, (Const, Free)):
            makers.append(_imitation_maker(argTs, resT, rh, env))
        return [m for m in makers if m is not None]

    def _projection_maker(argTs, resT, i, env0):
        projTs, projR = strip_funT(env0.resolve_typ(argTs[i]))
        try:
            probe = env0.copy()
            probe.unify_types(projR, resT)
        except UnifyError:
            return None

        def make(env: Envelope) -> Term:
            env.unify_types(projR, resT)
            k = len(argTs)
            args = []
            for pT in projTs:
                h = env.fresh_var(funT(*argTs, pT))
                args.append(list_comb(h, [Bound(k - 1 - j) for j in range(k)]))
            body = list_comb(Bound(k - 1 - i), args)
            for j in range(k - 1, -1, -1):
                body = Abs(f"x{j}", argTs[j], body)
            return body

        return make

    def _imitation_maker(argTs, resT, head, env0):
        headTs, headR = strip_funT(env0.resolve_typ(head.typ))
        try:
            probe = env0.copy()
            probe.unify_types(headR, resT)
        except UnifyError:
            return None

        def make(env: Envelope) -> Term:
            env.unify_types(headR, resT)
            k = len(argTs)
            args = []
            for hT in headTs:
                h = env.fresh_var(funT(*argTs, hT))
                args.append(list_comb(h, [Bound(k - 1 - j) for j in range(k)]))
            body = list_comb(head, args)
            for j in range(k - 1, -1, -1):
                body = Abs(f"x{j}", argTs[j], body)
            return body

        return make

    def _assign_flexflex(env: Envelope, pairs):
        """Close flex-flex pairs with constant functions onto a shared
        fresh variable; returns None if a pair degenerated unsolvably."""
        for (a, b) in pairs:
            a = _devar(env, a)
            b = _devar(env, b)
            if a == b:
                continue
            ah, aargs = strip_comb(a)
            bh, bargs = strip_comb(b)
            if isinstance(ah, Var) and isinstance(bh, Var):
                a_argTs, a_res = strip_funT(env.resolve_typ(ah.typ))
                h = env.fresh_var(a_res)
                env.bind(ah, _const_fun(a_argTs[:len(aargs)], h))
                if (bh.name, bh.index) != (ah.name, ah.index):
                    b_argTs, _ = strip_funT(env.resolve_typ(bh.typ))
                    env.bind(bh, _const_fun(b_argTs[:len(bargs)], h))
                continue
            # one side became rigid through an earlier assignment
            if isinstance(bh, Var):
                a, b = b, a
                ah, aargs = strip_comb(a)
            if not isinstance(ah, Var) or loose_bvar(b):
                return None
            a_argTs, _ = strip_funT(env.resolve_typ(ah.typ))
            env.bind(ah, _const_fun(a_argTs[:len(aargs)], b))
        return env

    stream._gen = solve(e, [(norm(t), norm(u))], depth_bound)
    return stream


def _const_fun(argTs, body: Term) -> Term:
    for i in range(len(argTs) - 1, -1, -1):
        body = Abs(f"x{i}", argTs[i], body)
    return body


def unify_terms(thy, t: Term, u: Term, depth_bound: int = DEFAULT_DEPTH,
                env: Optional[Envelope] = None) -> UnifierStream:
    """Alias used by the tactic layer."""
    return ho_unify(thy, t, u, depth_bound, env)
