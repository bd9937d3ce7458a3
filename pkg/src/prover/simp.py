"""The simplifier: conditional higher-order rewriting, certified.

Rewrite rules are theorems t == u or phi ==> t == u whose left side is a
higher-order pattern; object equalities and plain facts are lifted to
meta-equalities through lifting axioms registered by the object logic.
rewrite returns an actual theorem |- term == result assembled from kernel
equality rules only: conditions are proved by recursive rewriting to the
registered truth, and permutative rules (commutativity and friends) apply
only when they shrink the term in a lexicographic path order.
"""

from __future__ import annotations

from typing import Optional

from . import kernel
from .errors import (
    ExtraVariablesRHS,
    NoMatch,
    NonPatternLHS,
    NotAnEquation,
    ProverError,
    UnifyError,
)
from .kernel import Theory, Thm, dest_equals, is_equals, strip_implies
from .term import (
    Abs,
    App,
    Bound,
    Const,
    Free,
    Term,
    Var,
    strip_comb,
    term_frees,
    term_vars,
)
from .termops import norm, subst_bound
from .unify import Envelope, is_pattern, pattern_match

# theory data keys populated by the object logic
LIFT_RULES_KEY = "simp.lift_rules"     # axiom names: Trueprop form ==> t == u
TRUTH_KEY = "simp.truth"               # axiom name proving the truth constant
DEFAULT_SIMPS_KEY = "simp.rules"       # default simp rule fact names

CONDITION_DEPTH = 20
REWRITE_BUDGET = 20_000


class Rule:
    __slots__ = ("thm", "prems", "lhs", "rhs", "permutative", "name")

    def __init__(self, thm, prems, lhs, rhs, permutative, name=""):
        self.thm = thm
        self.prems = prems
        self.lhs = lhs
        self.rhs = rhs
        self.permutative = permutative
        self.name = name

    def __repr__(self):
        return f"<rule {self.name or self.lhs!r}>"


class Simpset:
    """Immutable indexed set of rewrite rules (by lhs head constant)."""

    __slots__ = ("rules",)

    def __init__(self, rules=None):
        self.rules = dict(rules or {})

    def lookup(self, head: Term):
        if isinstance(head, Const):
            return self.rules.get(head.name, ())
        return ()

    def all_rules(self):
        for rs in self.rules.values():
            yield from rs

    def __len__(self):
        return sum(len(rs) for rs in self.rules.values())


def add_simp(ss: Simpset, thm: Thm, name="") -> Simpset:
    """Index a theorem as a rewrite rule, lifting object equalities."""
    eq_thm = _lift_to_meta_equality(thm)
    prems, concl = strip_implies(eq_thm.prop)
    lhs, rhs = dest_equals(concl)
    lhs = norm(lhs)
    head, _ = strip_comb(lhs)
    if not isinstance(head, Const):
        raise NonPatternLHS(f"rewrite rule head must be a constant: {lhs!r}")
    if not is_pattern(lhs):
        raise NonPatternLHS(f"left side is not a higher-order pattern: {lhs!r}")
    lvars = set(term_vars(lhs))
    extra = [k for k in term_vars(rhs) if k not in lvars]
    for p in prems:
        extra += [k for k in term_vars(p) if k not in lvars]
    if extra:
        raise ExtraVariablesRHS(
            f"variables {sorted(set(extra))} not bound by the left side")
    rule = Rule(eq_thm, prems, lhs, rhs, _is_permutative(eq_thm.theory, lhs, rhs),
                name)
    rules = dict(ss.rules)
    rules[head.name] = rules.get(head.name, ()) + (rule,)
    return Simpset(rules)


def _lift_to_meta_equality(thm: Thm) -> Thm:
    """Bring a theorem into the form prems ==> lhs == rhs."""
    prems, concl = strip_implies(thm.prop)
    if is_equals(concl):
        return thm
    thy = thm.theory
    # strip premises by assuming them, convert the core, re-discharge
    core = thm
    assumed = []
    for p in prems:
        core = kernel.implies_elim(core, kernel.assume(thy, p))
        assumed.append(p)
    lifted = None
    for axname in thy.lookup_data(LIFT_RULES_KEY, ()):
        ax = kernel.axiom(thy, axname)
        ax_prems, _ = strip_implies(ax.prop)
        if not ax_prems:
            continue
        try:
            env = pattern_match(None, ax_prems[0], core.prop, thy=thy)
        except UnifyError:
            continue
        tsub, vsub = {}, {}
        from .term import term_tvars
        for tname, tv in term_tvars(ax.prop).items():
            resolved = env.resolve_typ(tv)
            if resolved != tv:
                tsub[tname] = resolved
        for key, var in term_vars(ax.prop).items():
            image = env.resolve_term(var)
            if image != var:
                vsub[key] = image
        inst = kernel.instantiate(ax, tsub=tsub, vsub=vsub)
        lifted = kernel.implies_elim(inst, core)
        break
    if lifted is None:
        raise NotAnEquation(
            f"cannot read {thm.prop!r} as a rewrite rule")
    for p in reversed(assumed):
        lifted = kernel.implies_intro(p, lifted)
    return lifted


def _is_permutative(thy: Theory, lhs: Term, rhs: Term) -> bool:
    """lhs and rhs are renamings of each other (e.g. commutativity)."""
    try:
        env = pattern_match(None, lhs, rhs, thy=thy)
    except UnifyError:
        return False
    images = [env.resolve_term(v) for v in term_vars(lhs).values()]
    if not all(isinstance(t, Var) for t in images):
        return False
    return len({(t.name, t.index) for t in images}) == len(images)


# --------------------------------------------------------------------------
# Lexicographic path order (permutative rule control)

_prec_cache: dict = {}


def _const_prec(thy: Theory, name: str) -> int:
    table = _prec_cache.get(thy.serial)
    if table is None:
        table = {n: i for i, n in enumerate(thy.consts)}
        _prec_cache[thy.serial] = table
    return table.get(name, len(table))


def _prec(thy: Theory, head: Term) -> tuple:
    if isinstance(head, Const):
        return (3, _const_prec(thy, head.name))
    if isinstance(head, Free):
        return (2, head.name)
    if isinstance(head, Var):
        return (1, (head.name, head.index))
    if isinstance(head, Bound):
        return (0, head.index)
    return (4, 0)


def lpo_greater(thy: Theory, s: Term, t: Term) -> bool:
    if s == t:
        return False
    if isinstance(t, (Var, Free)) and not isinstance(s, (Var, Free)):
        from .term import subterms
        return any(x == t for x in subterms(s))
    if isinstance(s, Abs) or isinstance(t, Abs):
        if isinstance(s, Abs) and isinstance(t, Abs):
            return lpo_greater(thy, s.body, t.body)
        return isinstance(s, Abs)
    sh, sargs = strip_comb(s)
    th, targs = strip_comb(t)
    for si in sargs:
        if si == t or lpo_greater(thy, si, t):
            return True
    ps, pt = _prec(thy, sh), _prec(thy, th)
    try:
        if ps > pt:
            return all(lpo_greater(thy, s, ti) for ti in targs)
        if ps == pt:
            for si, ti in zip(sargs, targs):
                if si == ti:
                    continue
                return lpo_greater(thy, si, ti) and \
                    all(lpo_greater(thy, s, tj) for tj in targs)
            return len(sargs) > len(targs)
    except TypeError:
        return False
    return False


# --------------------------------------------------------------------------
# Rewriting proper

class SimpContext:
    """Extra rules and recursion bookkeeping threaded through a rewrite.

    Carries the context the paper lets the simplifier grow and hand to
    other tools; here it holds assumption-derived rules and depth/budget.
    """

    __slots__ = ("extra", "depth", "budget")

    def __init__(self, extra: Optional[Simpset] = None,
                 depth: int = CONDITION_DEPTH, budget: int = REWRITE_BUDGET):
        self.extra = extra or Simpset()
        self.depth = depth
        self.budget = [budget]

    def spend(self) -> bool:
        if self.budget[0] <= 0:
            return False
        self.budget[0] -= 1
        return True

    def deeper(self) -> "SimpContext":
        child = SimpContext(self.extra, self.depth - 1)
        child.budget = self.budget
        return child


def rewrite(ss: Simpset, context: Optional[SimpContext], term: Term,
            thy: Theory = None) -> Thm:
    """Exhaustive leftmost-innermost rewriting; returns |- term == result,
    assembled from kernel equality rules."""
    if context is None:
        context = SimpContext()
    term = norm(term)
    return _rewrite(ss, context, thy, term)


def result_of(eq_thm: Thm) -> Term:
    return dest_equals(eq_thm.prop)[1]


_counter = iter(range(10 ** 9))


def _rewrite(ss: Simpset, ctx: SimpContext, thy: Theory, t: Term) -> Thm:
    eq = _rewrite_subterms(ss, ctx, thy, t)
    # then rewrite at the root until fixpoint
    while True:
        current = result_of(eq)
        step = _rewrite_root(ss, ctx, thy, current)
        if step is None:
            return eq
        stepped = result_of(step)
        # a root step can expose new redexes below; renormalize bottom-up
        rest = _rewrite_subterms(ss, ctx, thy, stepped)
        eq = kernel.transitive(kernel.transitive(eq, step), rest)
        if result_of(eq) == current:
            return eq


def _rewrite_subterms(ss: Simpset, ctx: SimpContext, thy: Theory, t: Term) -> Thm:
    if isinstance(t, App):
        eq_f = _rewrite(ss, ctx, thy, t.fun)
        eq_a = _rewrite(ss, ctx, thy, t.arg)
        return kernel.combination(eq_f, eq_a)
    if isinstance(t, Abs):
        avoid = set(term_frees(t))
        name = f"s_{next(_counter)}"
        while name in avoid:
            name = f"s_{next(_counter)}"
        z = Free(name, t.var_type)
        eq_body = _rewrite(ss, ctx, thy, norm(subst_bound(t.body, z)))
        return kernel.abstract_rule(z, eq_body)
    return kernel.reflexive(thy, t)


def _rewrite_root(ss: Simpset, ctx: SimpContext, thy: Theory,
                  t: Term) -> Optional[Thm]:
    head, _ = strip_comb(t)
    for rule in tuple(ss.lookup(head)) + tuple(ctx.extra.lookup(head)):
        if not ctx.spend():
            return None
        thm = _try_rule(ss, ctx, thy, rule, t)
        if thm is not None:
            return thm
    return None


def _try_rule(ss: Simpset, ctx: SimpContext, thy: Theory, rule: Rule,
              t: Term) -> Optional[Thm]:
    # rename the rule apart from the object's schematic variables
    offset = max([idx for (_, idx) in term_vars(t)], default=-1) + 1
    rthm = rule.thm
    if offset:
        vsub = {key: Var(key[0], key[1] + offset, v.typ)
                for key, v in term_vars(rthm.prop).items()}
        try:
            rthm = kernel.instantiate(rthm, vsub=vsub)
        except ProverError:
            return None
    prems, concl = strip_implies(rthm.prop)
    lhs, rhs = dest_equals(concl)
    try:
        env = pattern_match(None, norm(lhs), t, thy=thy)
    except UnifyError:
        return None
    new = norm(env.resolve_term(rhs))
    if rule.permutative and not lpo_greater(thy, t, new):
        return None
    from .term import term_tvars
    tsub, vsub = {}, {}
    for tname, tv in term_tvars(rthm.prop).items():
        resolved = env.resolve_typ(tv)
        if resolved != tv:
            tsub[tname] = resolved
    for key, var in term_vars(rthm.prop).items():
        image = env.resolve_term(var)
        if image != var:
            vsub[key] = image
    try:
        inst = kernel.instantiate(rthm, tsub=tsub, vsub=vsub)
    except ProverError:
        return None
    iprems, _ = strip_implies(inst.prop)
    for p in iprems:
        cond = _prove_condition(ss, ctx, thy, p)
        if cond is None:
            return None   # ConditionDepthExceeded downgrades to not-applied
        inst = kernel.implies_elim(inst, cond)
    return inst


def _prove_condition(ss: Simpset, ctx: SimpContext, thy: Theory,
                     prop: Term) -> Optional[Thm]:
    if ctx.depth <= 0:
        return None
    truth_name = thy.lookup_data(TRUTH_KEY)
    if truth_name is None:
        return None
    truth = kernel.axiom(thy, truth_name)     # |- Trueprop True
    eq = _rewrite(ss, ctx.deeper(), thy, prop)
    rewritten = result_of(eq)
    if rewritten == truth.prop:
        return kernel.equal_elim(kernel.symmetric(eq), truth)
    return None


# --------------------------------------------------------------------------
# The simp proof method

_simpset_cache: dict = {}


def simpset_of(thy: Theory) -> Simpset:
    """The theory's default simpset (built from registered fact names)."""
    names = thy.lookup_data(DEFAULT_SIMPS_KEY, ())
    cached = _simpset_cache.get(thy.serial)
    if cached is not None and cached[0] == names:
        return cached[1]
    ss = Simpset()
    from .objlogic import fact
    for name in names:
        try:
            ss = add_simp(ss, fact(thy, name), name=name)
        except ProverError:
            continue
    _simpset_cache[thy.serial] = (names, ss)
    return ss


def simp_tac(ss: Simpset, i: int, extra_context: Optional[SimpContext] = None):
    """Simplify subgoal i: rewrite assumptions and conclusion, close the
    goal if it becomes the registered truth or one of its assumptions."""
    from . import tactics
    from .tactics import GoalState, dest_subgoal, fresh_free_names, _inst_bounds, \
        _replace_subgoal
    from .unify import Envelope

    def tac(state: GoalState):
        thy = state.theory
        try:
            sg = state.subgoal(i)
        except ProverError:
            return
        params, hyps, concl = dest_subgoal(sg)
        avoid = set(term_frees(state.thm.prop))
        for h in state.thm.hyps:
            avoid.update(term_frees(h))
        znames = fresh_free_names(avoid, len(params))
        zs = [Free(n, ty) for n, (_, ty) in zip(znames, params)]
        hyps_z = [_inst_bounds(h, zs) for h in hyps]
        concl_z = _inst_bounds(concl, zs)

        ctx = extra_context or SimpContext()
        eq_hyps = [core_rewrite(ss, ctx, thy, h) for h in hyps_z]
        hyps_new = [result_of(e) for e in eq_hyps]
        # assumptions act as extra rewrites while rewriting the conclusion
        extra = ctx.extra
        asm_thms = []
        for h in hyps_new:
            a = kernel.assume(thy, h)
            asm_thms.append(a)
            try:
                extra = add_simp(extra, a)
            except ProverError:
                pass
        cctx = SimpContext(extra, ctx.depth)
        cctx.budget = ctx.budget
        eq_concl = core_rewrite(ss, cctx, thy, concl_z)
        concl_new = result_of(eq_concl)

        changed = (concl_new != concl_z) or any(
            h1 != h2 for h1, h2 in zip(hyps_z, hyps_new))

        # can we solve it outright?
        solved = None
        truth_name = thy.lookup_data(TRUTH_KEY)
        truth = kernel.axiom(thy, truth_name) if truth_name else None
        if truth is not None and concl_new == truth.prop:
            solved = kernel.equal_elim(kernel.symmetric(eq_concl), truth)
        else:
            for j, h in enumerate(hyps_new):
                if h == concl_new:
                    solved = kernel.equal_elim(kernel.symmetric(eq_concl),
                                               asm_thms[j])
                    break
        if solved is not None:
            # discharge used rewritten assumptions via the original ones
            t = solved
            for h_z, eq_h, h_new in zip(hyps_z, eq_hyps, hyps_new):
                t = kernel.implies_intro(h_new, t)
                t = kernel.implies_elim(
                    t, kernel.equal_elim(eq_h, kernel.assume(thy, h_z)))
            for h_z in reversed(hyps_z):
                t = kernel.implies_intro(h_z, t)
            for z in reversed(zs):
                t = kernel.forall_intro(t, z)
            if t.prop == norm(sg):
                yield _replace_subgoal(state, i, Envelope(thy), [], t)
                return
            return

        if not changed:
            yield state
            return

        # emit the simplified state: new subgoal implies the old one
        new_body = kernel.list_implies(hyps_new, concl_new)
        new_sg = new_body
        from .term import Abs as _Abs
        from .termops import abstract_over
        for z, (pname, _) in zip(reversed(zs), reversed(params)):
            new_sg = App(kernel.all_const(z.typ),
                         _Abs(pname, z.typ, abstract_over(z, new_sg)))
        new_sg = norm(new_sg)

        t = kernel.assume(thy, new_sg)
        for z in zs:
            t = kernel.forall_elim(t, z)
        h_new_thms = []
        for h_z, eq_h in zip(hyps_z, eq_hyps):
            h_new_thm = kernel.equal_elim(eq_h, kernel.assume(thy, h_z))
            h_new_thms.append(h_new_thm)
            t = kernel.implies_elim(t, h_new_thm)
        # t : concl_new (hyps: new_sg, hyps_z)
        t = kernel.equal_elim(kernel.symmetric(eq_concl), t)
        # eq_concl may have used rewritten assumptions; trade them back
        for h_new, h_new_thm in zip(hyps_new, h_new_thms):
            t = kernel.implies_elim(kernel.implies_intro(h_new, t), h_new_thm)
        for h_z in reversed(hyps_z):
            t = kernel.implies_intro(h_z, t)
        for z in reversed(zs):
            t = kernel.forall_intro(t, z)
        if t.prop != norm(sg):
            return
        yield _replace_subgoal(state, i, Envelope(thy), [new_sg], t)

    return tac


def core_rewrite(ss: Simpset, ctx: SimpContext, thy: Theory, term: Term) -> Thm:
    return _rewrite(ss, ctx, thy, norm(term))
