"""Classical reasoner: rule sets in natural-deduction style and the
depth-bounded backtracking provers built on them (step, blast, auto).

Intro rules are indexed by the head symbol of their conclusion, elim rules
by the head of their major (first) premise; a schematic head is rejected.
Elim application is elim-resolution: resolve, close the major premise
against an assumption, and delete that assumption from the residual
subgoals, which keeps safe saturation terminating.
"""

from __future__ import annotations

from typing import Iterator, Optional

from . import kernel
from .errors import NoRigidHead, ProverError
from .kernel import Thm, strip_implies
from .simp import SimpContext, Simpset, simp_tac
from .tactics import (
    GoalState,
    Tactic,
    _inst_bounds,
    _replace_subgoal,
    assume_tac,
    dest_subgoal,
    fresh_free_names,
    resolve_step,
)
from .term import Const, Free, Term, strip_comb, term_frees
from .termops import aconv, norm
from .unify import Envelope


def _head_symbol(thy, prop: Term) -> str:
    """Head constant of a proposition, looking through the judgment."""
    t = prop
    judgment = thy.lookup_data("syntax.judgment")
    head, args = strip_comb(t)
    if isinstance(head, Const) and judgment and head.name == judgment and args:
        head, _ = strip_comb(args[0])
    if isinstance(head, Const):
        return head.name
    if isinstance(head, Free):
        return f"free:{head.name}"
    raise NoRigidHead(f"no rigid head symbol in {prop!r}")


class Claset:
    """Four indexed rule lists; later additions are tried first."""

    __slots__ = ("safe_intros", "safe_elims", "unsafe_intros", "unsafe_elims")

    def __init__(self, safe_intros=None, safe_elims=None,
                 unsafe_intros=None, unsafe_elims=None):
        self.safe_intros = dict(safe_intros or {})
        self.safe_elims = dict(safe_elims or {})
        self.unsafe_intros = dict(unsafe_intros or {})
        self.unsafe_elims = dict(unsafe_elims or {})

    def _added(self, table: dict, key: str, thm: Thm) -> dict:
        t = dict(table)
        t[key] = (thm,) + t.get(key, ())
        return t


def add_intro(cs: Claset, thm: Thm, safe: bool) -> Claset:
    _, concl = strip_implies(thm.prop)
    key = _head_symbol(thm.theory, concl)
    if safe:
        return Claset(cs._added(cs.safe_intros, key, thm), cs.safe_elims,
                      cs.unsafe_intros, cs.unsafe_elims)
    return Claset(cs.safe_intros, cs.safe_elims,
                  cs._added(cs.unsafe_intros, key, thm), cs.unsafe_elims)


def add_elim(cs: Claset, thm: Thm, safe: bool) -> Claset:
    prems, _ = strip_implies(thm.prop)
    if not prems:
        raise NoRigidHead("an elimination rule needs a major premise")
    key = _head_symbol(thm.theory, prems[0])
    if safe:
        return Claset(cs.safe_intros, cs._added(cs.safe_elims, key, thm),
                      cs.unsafe_intros, cs.unsafe_elims)
    return Claset(cs.safe_intros, cs.safe_elims,
                  cs.unsafe_intros, cs._added(cs.unsafe_elims, key, thm))


# --------------------------------------------------------------------------
# Elementary certified steps

def eq_assume_tac(i: int) -> Tactic:
    """Close subgoal i against a syntactically identical assumption
    (no instantiation, hence safe)."""

    def tac(state: GoalState):
        thy = state.theory
        try:
            sg = state.subgoal(i)
        except ProverError:
            return
        params, hyps, concl = dest_subgoal(sg)
        for h in hyps:
            if aconv(h, concl):
                avoid = set(term_frees(state.thm.prop))
                znames = fresh_free_names(avoid, len(params))
                zs = [Free(n, ty) for n, (_, ty) in zip(znames, params)]
                hyps_z = [_inst_bounds(x, zs) for x in hyps]
                t = kernel.assume(thy, _inst_bounds(h, zs))
                for hz in reversed(hyps_z):
                    t = kernel.implies_intro(hz, t)
                for z in reversed(zs):
                    t = kernel.forall_intro(t, z)
                if t.prop == norm(sg):
                    yield _replace_subgoal(state, i, Envelope(thy), [], t)
                return

    return tac


def thin(state: GoalState, i: int, j: int) -> Optional[GoalState]:
    """Delete assumption j (0-based) of subgoal i (weakening)."""
    thy = state.theory
    sg = state.subgoal(i)
    params, hyps, concl = dest_subgoal(sg)
    if not 0 <= j < len(hyps):
        return None
    rest = hyps[:j] + hyps[j + 1:]
    new_sg = kernel.list_implies(rest, concl)
    from .term import Abs, App
    from .termops import abstract_over
    avoid = set(term_frees(state.thm.prop))
    znames = fresh_free_names(avoid, len(params))
    zs = [Free(n, ty) for n, (_, ty) in zip(znames, params)]
    new_sg_z = kernel.list_implies([_inst_bounds(h, zs) for h in rest],
                                   _inst_bounds(concl, zs))
    new_sg_closed = new_sg_z
    for z, (pname, _) in zip(reversed(zs), reversed(params)):
        new_sg_closed = App(kernel.all_const(z.typ),
                            Abs(pname, z.typ, abstract_over(z, new_sg_closed)))
    new_sg_closed = norm(new_sg_closed)
    try:
        t = kernel.assume(thy, new_sg_closed)
        for z in zs:
            t = kernel.forall_elim(t, z)
        hyps_z = [_inst_bounds(h, zs) for h in hyps]
        for k, hz in enumerate(hyps_z):
            if k != j:
                t = kernel.implies_elim(t, kernel.assume(thy, hz))
        for hz in reversed(hyps_z):
            t = kernel.implies_intro(hz, t)
        for z in reversed(zs):
            t = kernel.forall_intro(t, z)
        if t.prop != norm(sg):
            return None
        return _replace_subgoal(state, i, Envelope(thy), [new_sg_closed], t)
    except ProverError:
        return None


def _assume_close_with_index(state: GoalState, i: int):
    """Like assume_tac but also reports which assumption closed the goal."""
    thy = state.theory
    from .unify import ho_unify
    try:
        sg = state.subgoal(i)
    except ProverError:
        return
    params, hyps, concl = dest_subgoal(sg)
    from .tactics import _close_by_assumption
    for j, h in enumerate(hyps):
        for env in ho_unify(thy, h, concl, 5, env=Envelope(thy)):
            try:
                yield _close_by_assumption(state, i, env, params, hyps, j), j
            except ProverError:
                continue


def elim_step(state: GoalState, rule: Thm, i: int) -> Iterator[GoalState]:
    """Elim-resolution: resolve with the rule, close the major premise by
    assumption, delete that assumption from the residual subgoals."""
    nprems = len(strip_implies(rule.prop)[0])
    if nprems == 0:
        return
    for st in resolve_step(state, rule, i):
        for st2, j in _assume_close_with_index(st, i):
            out = st2
            ok = True
            for pos in range(i, i + nprems - 1):
                thinned = thin(out, pos, j)
                if thinned is None:
                    ok = False
                    break
                out = thinned
            if ok:
                yield out

    return


def _rules_for(table: dict, thy, concl_or_major: Term):
    try:
        key = _head_symbol(thy, concl_or_major)
    except NoRigidHead:
        return ()
    return table.get(key, ())


# --------------------------------------------------------------------------
# step / blast / auto

def safe_step(cs: Claset, state: GoalState, i: int) -> Optional[GoalState]:
    """One deterministic safe step on subgoal i, or None."""
    thy = state.theory
    for st in eq_assume_tac(i)(state):
        return st
    sg = state.subgoal(i)
    params, hyps, concl = dest_subgoal(sg)
    for rule in _rules_for(cs.safe_intros, thy, concl):
        for st in resolve_step(state, rule, i):
            return st
    for j, h in enumerate(hyps):
        for rule in _rules_for(cs.safe_elims, thy, h):
            for st in elim_step(state, rule, i):
                return st
    return None


def safe_saturate(cs: Claset, state: GoalState) -> GoalState:
    """Apply safe steps across all subgoals to exhaustion."""
    changed = True
    while changed:
        changed = False
        i = 1
        while i <= state.n:
            st = safe_step(cs, state, i)
            if st is not None:
                state = st
                changed = True
            else:
                i += 1
    return state


def _unsafe_alternatives(cs: Claset, state: GoalState, i: int) -> Iterator[GoalState]:
    thy = state.theory
    yield from assume_tac(i)(state)
    sg = state.subgoal(i)
    params, hyps, concl = dest_subgoal(sg)
    for rule in _rules_for(cs.unsafe_intros, thy, concl):
        yield from resolve_step(state, rule, i)
    for h in hyps:
        for rule in _rules_for(cs.unsafe_elims, thy, h):
            yield from elim_step(state, rule, i)


def step_tac(cs: Claset, i: int) -> Tactic:
    """Safe steps exhaustively, else one backtrackable unsafe alternative."""

    def tac(state: GoalState):
        st = safe_step(cs, state, i)
        if st is not None:
            yield st
            return
        yield from _unsafe_alternatives(cs, state, i)

    return tac


def blast_tac(cs: Claset, i: int, depth: int = 12) -> Tactic:
    """Depth-first search proving subgoal i outright; the bound counts
    unsafe steps only."""

    def tac(state: GoalState):
        thy = state.theory
        try:
            sub = GoalState(
                kernel.implies_intro(state.subgoal(i),
                                     kernel.assume(thy, state.subgoal(i))), 1)
        except ProverError:
            return
        for solved in _blast_search(cs, sub, depth, set()):
            proved = solved.thm  # |- subgoal
            try:
                yield _replace_subgoal(state, i, Envelope(thy), [], proved)
                return
            except ProverError:
                continue

    return tac


def _state_key(state: GoalState):
    return state.thm.prop


def _blast_search(cs: Claset, state: GoalState, fuel: int,
                  visited: set) -> Iterator[GoalState]:
    state = safe_saturate(cs, state)
    if state.n == 0:
        yield state
        return
    key = _state_key(state)
    if key in visited:
        return
    if fuel <= 0:
        return
    for alt in _unsafe_alternatives(cs, state, 1):
        yield from _blast_search(cs, alt, fuel - 1, visited | {key})


AUTO_UNSAFE_DEPTH = 6


def auto_tac(cs: Claset, ss: Simpset, depth: int = AUTO_UNSAFE_DEPTH) -> Tactic:
    """Interleave safe classical steps with simplification on all subgoals,
    then attempt unsafe steps with backtracking; a partially simplified
    state is still emitted if the search cannot close everything."""

    def saturate(state: GoalState) -> GoalState:
        while True:
            st = safe_saturate(cs, state)
            changed = False
            i = 1
            while i <= st.n:
                stepped = None
                for s in simp_tac(ss, i)(st):
                    stepped = s
                    break
                if stepped is not None and stepped.thm.prop != st.thm.prop:
                    st = stepped
                    changed = True
                else:
                    i += 1
            if not changed:
                return st

    def search(state: GoalState, fuel: int) -> Iterator[GoalState]:
        st = saturate(state)
        if st.n == 0:
            yield st
            return
        if fuel > 0:
            for alt in _unsafe_alternatives(cs, st, 1):
                yield from search(alt, fuel - 1)

    def tac(state: GoalState):
        if state.n == 0:
            yield state
            return
        produced = False
        for solved in search(state, depth):
            produced = True
            yield solved
            return
        if not produced:
            yield saturate(state)

    return tac


# --------------------------------------------------------------------------
# Default claset from theory data

CLA_RULES_KEY = "cla.rules"    # tuple of (fact name, kind, safe)

_claset_cache: dict = {}


def claset_of(thy) -> Claset:
    entries = thy.lookup_data(CLA_RULES_KEY, ())
    cached = _claset_cache.get(thy.serial)
    if cached is not None and cached[0] == entries:
        return cached[1]
    from .objlogic import fact
    cs = Claset()
    for (name, kind, safe) in entries:
        try:
            thm = fact(thy, name)
            cs = add_intro(cs, thm, safe) if kind == "intro" else \
                add_elim(cs, thm, safe)
        except ProverError:
            continue
    _claset_cache[thy.serial] = (entries, cs)
    return cs
