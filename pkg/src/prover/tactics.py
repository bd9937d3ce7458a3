"""Goal states, resolution, and tacticals.

A goal state is itself a certified theorem of the form

    subgoal_1 ==> ... ==> subgoal_n ==> target

so tactics cannot cheat: every state they emit went through the kernel.
Resolution lifts a rule over a subgoal's parameters and assumptions,
unifies its conclusion with the subgoal (under the parameter binders, so
locals cannot leak), and rebuilds the state from kernel primitives alone.

A Tactic maps a GoalState to a lazy iterator of successor states; an
empty iterator is failure.  Tacticals combine tactics with full
backtracking through the lazy sequences.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterator, Optional

from . import kernel
from .errors import IllTyped, ProverError
from .kernel import (
    Theory,
    Thm,
    dest_funT,
    is_all,
    is_implies,
    list_implies,
    mk_implies,
    strip_implies,
)
from .term import (
    Abs,
    App,
    Bound,
    Const,
    Free,
    Term,
    Var,
    list_comb,
    term_frees,
    term_tvars,
    term_vars,
)
from .termops import incr_boundvars, norm, subst_vars
from .unify import Envelope, ho_unify

Tactic = Callable[["GoalState"], Iterator["GoalState"]]

RESOLVE_DEPTH = 5


class GoalState:
    """A kernel theorem whose first n premises are the open subgoals."""

    __slots__ = ("thm", "n")

    def __init__(self, thm: Thm, n: int):
        self.thm = thm
        self.n = n

    @property
    def theory(self) -> Theory:
        return self.thm.theory

    def subgoals(self) -> list[Term]:
        prems, _ = strip_implies(self.thm.prop)
        return prems[: self.n]

    def subgoal(self, i: int) -> Term:
        """1-based subgoal access."""
        if not 1 <= i <= self.n:
            raise ProverError(f"no subgoal {i} (have {self.n})")
        return self.subgoals()[i - 1]

    def target(self) -> Term:
        t = self.thm.prop
        for _ in range(self.n):
            _, t = kernel.dest_implies(t)
        return t

    def maxidx(self) -> int:
        m = -1
        for (_, idx) in term_vars(self.thm.prop):
            if idx > m:
                m = idx
        return m

    def is_finished(self) -> bool:
        return self.n == 0

    def __repr__(self):
        try:
            from .syntax import print_term
            gs = "\n".join(f"  {j+1}. {print_term(g, self.theory)}"
                           for j, g in enumerate(self.subgoals()))
        except Exception:
            gs = "\n".join(f"  {j+1}. {g!r}" for j, g in enumerate(self.subgoals()))
        return f"goal ({self.n} subgoal{'s' if self.n != 1 else ''}):\n{gs}" \
            if self.n else "goal: no subgoals"


def init_goal(thy: Theory, prop: Term) -> GoalState:
    prop = norm(prop)
    if not kernel.is_proposition(thy, prop):
        raise IllTyped(f"goal is not a proposition: {prop!r}")
    st = kernel.implies_intro(prop, kernel.assume(thy, prop))
    return GoalState(st, 1)


def finish(state: GoalState) -> Thm:
    if state.n != 0:
        raise ProverError(f"goal not finished: {state.n} subgoals remain")
    return state.thm


# --------------------------------------------------------------------------
# Subgoal decomposition

def dest_subgoal(sg: Term):
    """Split a subgoal into (parameters, assumptions, conclusion).

    Parameters are returned as (name, type) with the outermost first; the
    assumption and conclusion terms live under that many binders.
    """
    params = []
    t = sg
    while is_all(t):
        body = t.arg
        elemT = dest_funT(dest_funT(t.fun.typ)[0])[0]
        if isinstance(body, Abs):
            params.append((body.var_name or "x", body.var_type))
            t = body.body
        else:
            params.append(("x", elemT))
            t = App(incr_boundvars(body, 1), Bound(0))
    hyps, concl = strip_implies(t)
    return params, hyps, concl


def _inst_bounds(t: Term, images: list[Term]) -> Term:
    """Replace loose bounds by closed images; images[0] is the OUTERMOST
    parameter (de Bruijn index k-1 at depth 0)."""
    k = len(images)
    if k == 0:
        return t

    def go(t: Term, d: int) -> Term:
        cls = type(t)
        if cls is Bound:
            j = t.index - d
            if j >= 0:
                return images[k - 1 - j]
            return t
        if cls is App:
            return App(go(t.fun, d), go(t.arg, d))
        if cls is Abs:
            return Abs(t.var_name, t.var_type, go(t.body, d + 1))
        return t

    return go(t, 0)


_fresh_free = itertools.count()


def fresh_free_names(avoid: set, k: int, base="z") -> list[str]:
    out = []
    while len(out) < k:
        name = f"{base}_{next(_fresh_free)}"
        if name not in avoid:
            out.append(name)
    return out


def _avoid_frees(*terms) -> set:
    avoid = set()
    for t in terms:
        avoid.update(term_frees(t))
    return avoid


def _rename_rule_apart(rule: Thm, above: int) -> Thm:
    """Bump the rule's schematic indices above the state's and rename its
    type variables fresh (hypothesis variables stay put)."""
    from .sorts import fresh_tvar_name
    from .term import TVar

    hyp_vars = set()
    hyp_tvars = set()
    for h in rule.hyps:
        hyp_vars.update(term_vars(h))
        for n in term_tvars(h):
            hyp_tvars.add(n)
    tsub = {}
    for name, tv in term_tvars(rule.prop).items():
        if name not in hyp_tvars:
            tsub[name] = TVar(fresh_tvar_name(), tv.sort)
    rule = kernel.instantiate(rule, tsub=tsub) if tsub else rule
    vsub = {}
    for (name, idx), v in term_vars(rule.prop).items():
        if (name, idx) not in hyp_vars:
            vsub[(name, idx)] = Var(name, idx + above + 1, v.typ)
    return kernel.instantiate(rule, vsub=vsub) if vsub else rule


# --------------------------------------------------------------------------
# The certified resolution step

def _split_env(env: Envelope, state_prop: Term):
    """Split a unifier into kernel-ready (tsub, vsub) for a theorem."""
    tsub = {}
    for name, tv in term_tvars(state_prop).items():
        resolved = env.resolve_typ(tv)
        if resolved != tv:
            tsub[name] = resolved
    vsub = {}
    for key, var in term_vars(state_prop).items():
        image = env.resolve_term(var)
        if image != var:
            vsub[key] = image
    return tsub, vsub


def _instantiate_state_thm(thm: Thm, env: Envelope) -> Thm:
    tsub, vsub = _split_env(env, thm.prop)
    if not tsub and not vsub:
        return thm
    return kernel.instantiate(thm, tsub=tsub, vsub=vsub)


def _replace_subgoal(state: GoalState, i: int, env: Envelope,
                     new_subgoals: list[Term], proved: Thm) -> GoalState:
    """Rebuild the state with subgoal i discharged by `proved`, whose
    hypotheses are exactly new_subgoals (kept as the replacement)."""
    st = _instantiate_state_thm(state.thm, env)
    subgoals = strip_implies(st.prop)[0][: state.n]
    thy = st.theory
    assumed = []
    t = st
    for j in range(i - 1):
        a = kernel.assume(thy, subgoals[j])
        assumed.append(subgoals[j])
        t = kernel.implies_elim(t, a)
    t = kernel.implies_elim(t, proved)
    for sg in reversed(new_subgoals):
        t = kernel.implies_intro(sg, t)
    for a in reversed(assumed):
        t = kernel.implies_intro(a, t)
    return GoalState(t, state.n - 1 + len(new_subgoals))


def _lift_substitution(rule_prop: Term, params, above: int):
    """Map each schematic variable of the rule to itself applied to the
    subgoal parameters (as loose bounds); returns (vsub-as-dict, new vars)."""
    from .term import funT

    k = len(params)
    if k == 0:
        return {key: v for key, v in term_vars(rule_prop).items()}
    paramTs = [ty for (_, ty) in params]
    bounds = [Bound(k - 1 - j) for j in range(k)]
    vsub = {}
    for (name, idx), v in term_vars(rule_prop).items():
        lifted = Var(name, idx + above, funT(*paramTs, v.typ))
        vsub[(name, idx)] = list_comb(lifted, bounds)
    return vsub


def resolve_step(state: GoalState, rule: Thm, i: int,
                 depth: int = RESOLVE_DEPTH,
                 prem_unifiers=None) -> Iterator[GoalState]:
    """All ways of refining subgoal i with the rule (lazy)."""
    thy = state.theory
    sg = state.subgoal(i)
    params, hyps, concl = dest_subgoal(sg)
    k = len(params)

    maxidx = state.maxidx()
    rule = kernel.transfer(rule, thy) if thy.includes(rule.theory) else rule
    rule = _rename_rule_apart(rule, maxidx)
    rmax = max([maxidx] + [idx for (_, idx) in term_vars(rule.prop)])

    rprems, rconcl = strip_implies(rule.prop)
    lift_vsub = _lift_substitution(rule.prop, params, rmax + 1)
    rconcl_l = norm(subst_vars(rconcl, lift_vsub))
    rprems_l = [norm(subst_vars(p, lift_vsub)) for p in rprems]

    base_env = Envelope(thy)
    fresh = rmax + 1
    for t in [rconcl_l] + rprems_l:
        for (_, idx) in term_vars(t):
            if idx >= fresh:
                fresh = idx + 1
    base_env.fresh = fresh

    streams = [(base_env, None)]
    if prem_unifiers:
        streams = prem_unifiers(base_env, rprems_l, params, hyps)

    for env0, consumed in streams:
        rp = rprems_l if consumed is None else consumed
        for env in ho_unify(thy, rconcl_l, concl, depth, env=env0):
            try:
                yield _finish_resolve(state, i, env, rule, lift_vsub,
                                      params, hyps, rp)
            except ProverError:
                continue


def _finish_resolve(state: GoalState, i: int, env: Envelope, rule: Thm,
                    lift_vsub, params, hyps, rprems_l) -> GoalState:
    thy = state.theory

    # the new subgoals: instantiated lifted premises, re-wrapped in the
    # subgoal's parameters and assumptions
    def close_over(body: Term) -> Term:
        t = list_implies([env.resolve_term(h) for h in hyps], body)
        for (name, ty) in reversed(params):
            t = App(kernel.all_const(env.resolve_typ(ty)),
                    Abs(name, env.resolve_typ(ty), t))
        return t

    new_subgoals = [norm(close_over(env.resolve_term(p))) for p in rprems_l]

    # instantiate the rule with the unifier composed with the lifting
    tsub = {}
    for name, tv in term_tvars(rule.prop).items():
        resolved = env.resolve_typ(tv)
        if resolved != tv:
            tsub[name] = resolved

    avoid = set(_avoid_frees(state.thm.prop, rule.prop))
    for h in state.thm.hyps:
        avoid.update(term_frees(h))
    znames = fresh_free_names(avoid, len(params))
    zs = [Free(n, env.resolve_typ(ty)) for n, (_, ty) in zip(znames, params)]

    vsub = {}
    for key, image_open in lift_vsub.items():
        image = _inst_bounds(env.resolve_term(image_open), zs)
        vsub[key] = image
    rule_inst = kernel.instantiate(rule, tsub=tsub, vsub=vsub)

    # derive the (instantiated) subgoal from the new subgoals
    hyps_z = [_inst_bounds(env.resolve_term(h), zs) for h in hyps]
    hyp_thms = [kernel.assume(thy, h) for h in hyps_z]

    t = rule_inst
    for nsg in new_subgoals:
        prem_thm = kernel.assume(thy, nsg)
        for z in zs:
            prem_thm = kernel.forall_elim(prem_thm, z)
        for h_thm in hyp_thms:
            prem_thm = kernel.implies_elim(prem_thm, h_thm)
        t = kernel.implies_elim(t, prem_thm)
    for h in reversed(hyps_z):
        t = kernel.implies_intro(h, t)
    for z in reversed(zs):
        t = kernel.forall_intro(t, z)

    sg_inst = norm(env.resolve_term(state.subgoal(i)))
    if not (t.prop == sg_inst):
        raise ProverError("resolution result does not match the subgoal")
    return _replace_subgoal(state, i, env, new_subgoals, t)


def resolve_tac(rules, i: int, depth: int = RESOLVE_DEPTH) -> Tactic:
    """Refine subgoal i with each rule in order, backtracking over
    unifiers within each rule."""
    rules = list(rules)

    def tac(state: GoalState) -> Iterator[GoalState]:
        for rule in rules:
            yield from resolve_step(state, rule, i, depth)

    return tac


def assume_tac(i: int, depth: int = RESOLVE_DEPTH) -> Tactic:
    """Close subgoal i against one of its own assumptions (by unification,
    so schematic goals get instantiated)."""

    def tac(state: GoalState) -> Iterator[GoalState]:
        thy = state.theory
        try:
            sg = state.subgoal(i)
        except ProverError:
            return
        params, hyps, concl = dest_subgoal(sg)
        for j, h in enumerate(hyps):
            for env in ho_unify(thy, h, concl, depth, env=Envelope(thy)):
                try:
                    yield _close_by_assumption(state, i, env, params, hyps, j)
                except ProverError:
                    continue

    return tac


def _close_by_assumption(state: GoalState, i: int, env: Envelope,
                         params, hyps, j: int) -> GoalState:
    thy = state.theory
    avoid = set(_avoid_frees(state.thm.prop))
    znames = fresh_free_names(avoid, len(params))
    zs = [Free(n, env.resolve_typ(ty)) for n, (_, ty) in zip(znames, params)]
    hyps_z = [_inst_bounds(env.resolve_term(h), zs) for h in hyps]
    t = kernel.assume(thy, hyps_z[j])
    for h in reversed(hyps_z):
        t = kernel.implies_intro(h, t)
    for z in reversed(zs):
        t = kernel.forall_intro(t, z)
    sg_inst = norm(env.resolve_term(state.subgoal(i)))
    if t.prop != sg_inst:
        raise ProverError("assumption does not close the subgoal")
    return _replace_subgoal(state, i, env, [], t)


# --------------------------------------------------------------------------
# Tacticals (lazy; no eager exploration)

def then_tac(t1: Tactic, t2: Tactic) -> Tactic:
    def tac(state):
        for s1 in t1(state):
            yield from t2(s1)
    return tac


def or_else(t1: Tactic, t2: Tactic) -> Tactic:
    def tac(state):
        produced = False
        for s in t1(state):
            produced = True
            yield s
        if not produced:
            yield from t2(state)
    return tac


def no_tac(state) -> Iterator[GoalState]:
    return iter(())


def all_tac(state) -> Iterator[GoalState]:
    yield state


def try_tac(t: Tactic) -> Tactic:
    return or_else(t, all_tac)


REPEAT_LIMIT = 10_000


def repeat(t: Tactic, limit: int = REPEAT_LIMIT) -> Tactic:
    """Apply t as long as it succeeds (depth-first over alternatives);
    always succeeds, bounded to convert divergence into failure."""

    def tac(state, fuel=limit):
        if fuel <= 0:
            yield state
            return
        progressed = False
        for s in t(state):
            progressed = True
            yield from tac(s, fuel - 1)
        if not progressed:
            yield state

    return tac


def first_goal(tac_at: Callable[[int], Tactic]) -> Tactic:
    def tac(state):
        if state.n == 0:
            return
        yield from tac_at(1)(state)
    return tac


def some_goal(tac_at: Callable[[int], Tactic]) -> Tactic:
    """First subgoal (lowest index) on which the tactic succeeds."""

    def tac(state):
        for i in range(1, state.n + 1):
            produced = False
            for s in tac_at(i)(state):
                produced = True
                yield s
            if produced:
                return

    return tac


def all_goals(tac_at: Callable[[int], Tactic]) -> Tactic:
    """Apply an indexed tactic to every subgoal (last first, so earlier
    indices stay valid)."""

    def tac(state):
        def go(st, i):
            if i == 0:
                yield st
                return
            for st2 in tac_at(i)(st):
                yield from go(st2, i - 1)
        yield from go(state, state.n)

    return tac
