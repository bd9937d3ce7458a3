"""Structured proof engine (Isar subset).

A ProofContext is a block-structured notepad: fixed variables, named
assumptions, named facts, and the implicit `this` chain.  Leaving a block
exports its results into the enclosing context, generalizing over the
block's fixes and discharging its assumptions through the framework's
universal quantifier and implication.  run_proof drives the
fix/assume/have/show/from/note/proof/qed/next repertoire against
kernel-certified goal states.
"""

from __future__ import annotations

from typing import Iterator, Optional, Union

from . import kernel, syntax
from .errors import (
    MethodFailed,
    PendingObligation,
    ProverError,
    ShowMismatch,
    UnbalancedBlock,
    UnfinishedProof,
    UnknownMethod,
)
from .kernel import Theory, Thm
from .syntax import (
    AssumeStep,
    BlockStep,
    ChainStep,
    FixStep,
    HaveStep,
    Method,
    NextStep,
    NoteStep,
    ProofNode,
    _canonical_tvars,
)
from .tactics import (
    GoalState,
    Tactic,
    all_goals,
    assume_tac,
    dest_subgoal,
    init_goal,
    resolve_step,
    resolve_tac,
)
from .term import Free, Term, term_frees, term_vars
from .termops import aconv, norm, subst_vars


class ProofContext:
    """Local proof context; parent is a Theory or an enclosing context."""

    __slots__ = ("parent", "fixes", "assumptions", "facts", "lit_pool",
                 "this", "_free_counter")

    def __init__(self, parent: Union[Theory, "ProofContext"]):
        self.parent = parent
        self.fixes: list[tuple[str, Free]] = []
        self.assumptions: list[Thm] = []
        self.facts: dict[str, list[Thm]] = {}
        self.lit_pool: list[Thm] = []
        self.this: list[Thm] = []
        self._free_counter = 0

    @property
    def theory(self) -> Theory:
        p = self.parent
        while isinstance(p, ProofContext):
            p = p.parent
        return p

    # -- variable scope ----------------------------------------------------

    def all_fixes(self) -> dict[str, Free]:
        out = {}
        p = self.parent
        if isinstance(p, ProofContext):
            out.update(p.all_fixes())
        for name, free in self.fixes:
            out[name] = free
        return out

    def fix(self, name: str, typ) -> Free:
        # shadowing never collides: internal names are made unique
        taken = {f.name for f in self.all_fixes().values()}
        internal = name
        while internal in taken:
            internal += "'"
        free = Free(internal, typ)
        self.fixes.append((name, free))
        return free

    # -- parsing in context --------------------------------------------

    def parse_prop(self, src: str, pos: int = 0, markup=None) -> Term:
        fixes = self.all_fixes()
        fixed_types = {disp: f.typ for disp, f in fixes.items()}
        t = syntax.parse_prop(self.theory, src, pos, markup=markup,
                              fixed_types=fixed_types, canonical=False)
        ren = {disp: f for disp, f in fixes.items() if disp != f.name}
        if ren:
            t = _rename_frees(t, ren)
        return norm(t)

    def parse_term(self, src: str, pos: int = 0) -> Term:
        fixes = self.all_fixes()
        fixed_types = {disp: f.typ for disp, f in fixes.items()}
        t = syntax.parse_term(self.theory, src, pos,
                              fixed_types=fixed_types, canonical=False)
        ren = {disp: f for disp, f in fixes.items() if disp != f.name}
        if ren:
            t = _rename_frees(t, ren)
        return norm(t)

    # -- facts -----------------------------------------------------------

    def add_fact(self, label: Optional[str], thms: list[Thm]):
        if label:
            self.facts[label] = list(thms)
        self.this = list(thms)

    def lookup_fact(self, name: str) -> list[Thm]:
        if name == "this":
            return list(self.this)
        ctx: Union[Theory, ProofContext] = self
        while isinstance(ctx, ProofContext):
            if name in ctx.facts:
                return list(ctx.facts[name])
            ctx = ctx.parent
        from .objlogic import fact
        return [fact(self.theory, name)]

    def lookup_literal(self, prop: Term) -> list[Thm]:
        want = _canonical_tvars(prop)
        ctx: Union[Theory, ProofContext] = self
        while isinstance(ctx, ProofContext):
            for thm in ctx.lit_pool + [t for ts in ctx.facts.values() for t in ts] \
                    + ctx.this + ctx.assumptions:
                if aconv(_canonical_tvars(thm.prop), want):
                    return [thm]
            ctx = ctx.parent
        raise ProverError(f"no known fact matches the stated proposition")


def _rename_frees(t: Term, ren: dict):
    from .term import Abs, App, Const, Var, Bound

    def go(t):
        cls = type(t)
        if cls is Free:
            f = ren.get(t.name)
            return Free(f.name, t.typ) if f is not None else t
        if cls is App:
            return App(go(t.fun), go(t.arg))
        if cls is Abs:
            return Abs(t.var_name, t.var_type, go(t.body))
        return t

    return go(t)


# --------------------------------------------------------------------------
# Block structure and export

def enter_block(ctx: ProofContext) -> ProofContext:
    return ProofContext(ctx)


def export(inner: ProofContext, outer: Union[Theory, ProofContext],
           thm: Thm) -> Thm:
    """Discharge assumptions (introduction order outermost-first) and
    generalize fixes (innermost last) of every level between inner and
    outer."""
    level: Union[Theory, ProofContext] = inner
    while isinstance(level, ProofContext) and level is not outer:
        for a in reversed(level.assumptions):
            thm = kernel.implies_intro(a.prop, thm)
        for _, free in reversed(level.fixes):
            if any(free.name in term_frees(h) for h in thm.hyps):
                continue
            thm = kernel.forall_intro(thm, free)
        level = level.parent
    if isinstance(outer, ProofContext) and level is not outer:
        raise UnbalancedBlock("export target is not an enclosing context")
    return thm


def exit_block(ctx: ProofContext):
    """Return (outer context, facts proved in the block exported)."""
    outer = ctx.parent
    if not isinstance(outer, ProofContext):
        raise UnbalancedBlock("cannot exit the outermost context")
    exported = [export(ctx, outer, t) for t in ctx.this]
    outer.lit_pool.extend(exported)
    outer.this = list(exported)
    return outer, exported


# --------------------------------------------------------------------------
# Proof methods

def _simpset_for(ctx: ProofContext, method: Optional[Method]):
    from .simp import Simpset, add_simp, simpset_of
    thy = ctx.theory
    if method is not None and method.only:
        ss = Simpset()
        for name in method.only:
            for thm in ctx.lookup_fact(name):
                ss = add_simp(ss, thm, name=name)
        return ss
    ss = simpset_of(thy)
    if method is not None:
        for name in method.add:
            for thm in ctx.lookup_fact(name):
                ss = add_simp(ss, thm, name=name)
    return ss


def _insert_facts(state: GoalState, facts: list[Thm]) -> tuple[GoalState, int]:
    """Cut the chained facts into subgoal 1 as extra premises."""
    if not facts or state.n == 0:
        return state, 0
    thy = state.theory
    sg = state.subgoal(1)
    new_sg = kernel.list_implies([f.prop for f in facts], sg)
    t = kernel.assume(thy, new_sg)
    for f in facts:
        t = kernel.implies_elim(t, f)
    from .tactics import _replace_subgoal
    from .unify import Envelope
    if t.prop != norm(sg):
        raise MethodFailed("cannot insert chained facts")
    return _replace_subgoal(state, 1, Envelope(thy), [new_sg], t), len(facts)


def _close_first_subgoals_with_facts(state_iter, facts: list[Thm], i: int):
    """After resolving with a rule, close its first premises with the
    chained facts (in order)."""
    def close(cur, j):
        if j == len(facts):
            yield cur
            return
        # each fact closes the current first premise, so the position is
        # always i after the previous closure
        for nxt in resolve_step(cur, facts[j], i):
            yield from close(nxt, j + 1)

    for st in state_iter:
        yield from close(st, 0)


def rule_method(ctx: ProofContext, rules: list[Thm], facts: list[Thm],
                close_rest=False) -> Tactic:
    def tac(state: GoalState):
        for rule in rules:
            nprems = len(kernel.strip_implies(rule.prop)[0])
            if len(facts) > nprems:
                continue
            base = resolve_step(state, rule, 1)
            states = _close_first_subgoals_with_facts(base, facts, 1)
            if close_rest:
                consumed = len(facts)
                def close_all(st, k=nprems - len(facts)):
                    if k == 0:
                        yield st
                        return
                    for st2 in assume_tac(1)(st):
                        yield from close_all(st2, k - 1)
                for st in states:
                    yield from close_all(st)
            else:
                yield from states
    return tac


def default_rules(ctx: ProofContext, facts: list[Thm],
                  goal_concl: Term) -> list[Thm]:
    """Claset rules eligible for the implicit `proof`/`..` step."""
    from .classical import _head_symbol, claset_of
    from .errors import NoRigidHead
    cs = claset_of(ctx.theory)
    rules: list[Thm] = []
    if facts:
        try:
            key = _head_symbol(ctx.theory, facts[0].prop)
            rules += list(cs.safe_elims.get(key, ()))
            rules += list(cs.unsafe_elims.get(key, ()))
        except NoRigidHead:
            pass
    try:
        key = _head_symbol(ctx.theory, goal_concl)
        rules += list(cs.safe_intros.get(key, ()))
        rules += list(cs.unsafe_intros.get(key, ()))
    except NoRigidHead:
        pass
    return rules


def apply_method(ctx: ProofContext, method: Optional[Method],
                 facts: list[Thm], state: GoalState,
                 default_close=False) -> Iterator[GoalState]:
    """Dispatch a proof method; chained facts are consumed rule-style for
    rule-like methods and cut in as premises otherwise."""
    from .classical import auto_tac, blast_tac, claset_of
    from .simp import simp_tac

    name = method.name if method is not None else None
    thy = ctx.theory

    if name is None:
        # bare `proof`: one implicit rule step from the claset
        params, hyps, concl = dest_subgoal(state.subgoal(1))
        rules = default_rules(ctx, facts, concl)
        yield from rule_method(ctx, rules, facts, close_rest=default_close)(state)
        return
    if name == "-":
        st, _ = _insert_facts(state, facts) if facts else (state, 0)
        yield st
        return
    if name == "rule":
        rules = [t for n in method.args for t in ctx.lookup_fact(n)]
        if not rules:
            params, hyps, concl = dest_subgoal(state.subgoal(1))
            rules = default_rules(ctx, facts, concl)
        yield from rule_method(ctx, rules, facts)(state)
        return
    if name == "assumption":
        st, k = _insert_facts(state, facts)
        yield from assume_tac(1)(st)
        return
    if name == "simp":
        ss = _simpset_for(ctx, method)
        st, _ = _insert_facts(state, facts)
        yield from simp_tac(ss, 1)(st)
        return
    if name == "auto":
        ss = _simpset_for(ctx, method)
        cs = claset_of(thy)
        st, _ = _insert_facts(state, facts)
        yield from auto_tac(cs, ss)(st)
        return
    if name == "blast":
        cs = claset_of(thy)
        depth = method.nums[0] if method.nums else 12
        st, _ = _insert_facts(state, facts)
        yield from blast_tac(cs, 1, depth)(st)
        return
    if name == "eval":
        from .evaluator import eval_tac
        yield from eval_tac(1)(state)
        return
    if name == "quickcheck":
        # diagnostic only: reports, never proves
        return
    raise UnknownMethod(f"unknown proof method: {name}")


# --------------------------------------------------------------------------
# Running structured proofs

def run_proof(ctx: ProofContext, goal_prop: Term, proof: ProofNode,
              chain: Optional[list[Thm]] = None) -> Thm:
    """Prove goal_prop in ctx following the proof node; returns the
    theorem (hypotheses may refer to ctx assumptions)."""
    if term_vars(goal_prop):
        raise ShowMismatch("goal statements must not contain schematic variables")
    thy = ctx.theory
    facts = list(chain or [])
    facts = [kernel.transfer(f, thy) if thy.includes(f.theory) else f
             for f in facts]

    if proof.kind == "dot":
        for f in facts + ctx.this:
            if aconv(f.prop, goal_prop):
                return f
        # also allow a rule-style immediate closure
        state = init_goal(thy, goal_prop)
        for f in facts + ctx.this:
            for st in resolve_step(state, f, 1):
                if st.n == 0:
                    return st.thm
        raise MethodFailed("'.' does not prove the goal")

    if proof.kind == "dotdot":
        state = init_goal(thy, goal_prop)
        for st in apply_method(ctx, None, facts, state, default_close=True):
            if st.n == 0:
                return st.thm
        raise MethodFailed("'..' does not prove the goal")

    if proof.kind == "by":
        state = init_goal(thy, goal_prop)
        for st in apply_method(ctx, proof.method, facts, state):
            if st.n == 0:
                return st.thm
        mname = proof.method.name if proof.method else "rule"
        raise MethodFailed(f"method {mname} does not prove the goal")

    # structured: proof [method] steps qed [method]
    state = init_goal(thy, goal_prop)
    first = None
    for st in apply_method(ctx, proof.method, facts, state):
        first = st
        break
    if first is None:
        mname = proof.method.name if proof.method else "(default rule)"
        raise MethodFailed(f"initial method {mname} fails on the goal")
    state = first

    body_ctx = enter_block(ctx)
    state = run_steps(body_ctx, state, proof.steps)

    if proof.qed_method is not None:
        done = None
        for st in apply_method(body_ctx, proof.qed_method, [], state):
            if st.n == 0:
                done = st
                break
            if done is None:
                done = st
        if done is None:
            raise MethodFailed("qed method fails")
        state = done
    if state.n != 0:
        raise UnfinishedProof(f"{state.n} subgoals remain at qed")
    return state.thm


def run_steps(ctx: ProofContext, state: Optional[GoalState], steps,
              notepad=False) -> Optional[GoalState]:
    """Interpret a step list; state is None inside a notepad."""
    chain: Optional[list[Thm]] = None
    section = ctx
    stack: list[ProofContext] = []

    def take_chain():
        nonlocal chain
        c = chain
        chain = None
        return c

    for step in steps:
        if isinstance(step, FixStep):
            typ = None
            if step.typ_src:
                typ = syntax.parse_type(section.theory, step.typ_src)
            for n in step.names:
                from .sorts import fresh_tvar_name
                from .term import TVar
                section.fix(n, typ if typ is not None else TVar(fresh_tvar_name()))
        elif isinstance(step, AssumeStep):
            thms = []
            for (src, pos) in step.props:
                p = section.parse_prop(src, pos)
                thm = kernel.assume(section.theory, p)
                section.assumptions.append(thm)
                thms.append(thm)
            section.add_fact(step.label, thms)
        elif isinstance(step, ChainStep):
            if step.kind == "then":
                chain = list(section.this)
            else:
                items = []
                for name in step.names:
                    if isinstance(name, tuple) and name[0] == "<lit>":
                        prop = section.parse_prop(name[1], name[2])
                        items += section.lookup_literal(prop)
                    else:
                        items += section.lookup_fact(name)
                if step.kind == "with":
                    items += section.this
                chain = items
        elif isinstance(step, NoteStep):
            items = []
            for it in step.items:
                if isinstance(it, tuple) and it[0] == "<lit>":
                    prop = section.parse_prop(it[1], it[2])
                    items += section.lookup_literal(prop)
                else:
                    items += section.lookup_fact(it)
            section.add_fact(step.label, items)
        elif isinstance(step, BlockStep):
            if step.kind == "{":
                stack.append(section)
                section = enter_block(section)
            else:
                if not stack:
                    raise UnbalancedBlock("unmatched '}'")
                outer, _ = exit_block(section)
                section = stack.pop()
        elif isinstance(step, NextStep):
            # a fresh section at the same level: assumptions never cross
            section = ProofContext(section.parent)
            chain = None
        elif isinstance(step, HaveStep):
            c = take_chain()
            prop = section.parse_prop(step.prop_src, step.prop_pos)
            if step.kind == "have":
                thm = run_proof(section, prop, step.proof, c)
                section.add_fact(step.label, [thm])
                section.lit_pool.append(thm)
            else:
                if state is None:
                    raise PendingObligation("nothing to show here")
                state = _run_show(section, state, prop, step.proof, c)
        else:
            raise ProverError(f"unhandled step {step!r}")
    if stack:
        raise UnbalancedBlock("unclosed '{'")
    if notepad:
        return None
    return state


def _run_show(section: ProofContext, state: GoalState, stated: Term,
              proof: ProofNode, chain) -> GoalState:
    """Prove `stated`, matching a pending subgoal's conclusion; export the
    result over the section and discharge that subgoal."""
    from .tactics import _replace_subgoal
    from .unify import Envelope

    thy = section.theory
    target = None
    for i in range(1, state.n + 1):
        sg = state.subgoal(i)
        params, hyps, concl = dest_subgoal(sg)
        if not params and aconv(concl, stated):
            target = i
            break
    if target is None:
        raise ShowMismatch(
            f"stated proposition matches no pending subgoal")

    thm = run_proof(section, stated, proof, chain)
    # export over this section's context (its assumptions and fixes)
    exported = thm
    for a in reversed(section.assumptions):
        exported = kernel.implies_intro(a.prop, exported)
    for _, free in reversed(section.fixes):
        if any(free.name in term_frees(h) for h in exported.hyps):
            continue
        exported = kernel.forall_intro(exported, free)

    sg = state.subgoal(target)
    params, hyps, concl = dest_subgoal(sg)
    # the exported theorem must cover the subgoal's own assumptions: any
    # not discharged by the section get re-introduced vacuously
    want = norm(sg)
    if exported.prop != want:
        have_prems, _ = kernel.strip_implies(exported.prop)
        missing = len(hyps) - len(have_prems)
        if missing > 0 and not params:
            exported2 = exported
            for h in reversed(hyps[:missing]):
                exported2 = kernel.implies_intro(h, exported2)
            exported = exported2
    if exported.prop != want:
        raise ShowMismatch("shown result does not discharge the subgoal")
    section.add_fact(None, [thm])
    return _replace_subgoal(state, target, Envelope(thy), [], exported)


# --------------------------------------------------------------------------
# Notepad

def run_notepad(thy: Theory, steps) -> ProofContext:
    """Run a notepad body; returns the final context (its lit_pool and
    `this` hold whatever the experiment left behind)."""
    ctx = ProofContext(thy)
    run_steps(ctx, None, steps, notepad=True)
    return ctx
