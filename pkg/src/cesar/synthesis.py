"""The synthesis loop: invariant refinement, guard synthesis, and the
best-effort optimality certificate.

Starting point is the one-shot fallback invariant

    I0 = [ (demonic choice over permanent actions) ; plant-unbounded ] safe

which collapses the control loop for actions that are idempotent across a
plant cycle (action permanence).  Each refinement round weakens the
invariant with states from which one more strategic switch reaches it:

    I(n+1) = I(n) \/ [step] I(n)
    step   = (theta := *; ?theta >= 0)^d ; (demonic action choice) ;
             plant with deadline theta + T ; ?safe^d ; ?t >= theta

Guards are the modal conditions G_i = [act_i ; plant] I, and the main driver
mirrors the usual generate-and-check loop: a soundness gate (exactness, or
an explicit "some guard is always available" validity check), an optimality
certificate, and a fixpoint exit when the unrolling stabilizes.

Optimality is certified by growing an uncontrollable region U from the
unsafe states until assum -> I \/ U becomes valid.  U grows by (a) one-cycle
environment reachability, (b) dominant-action clauses justified by uniform
action optimality in a doubled (tagged) system, and (c) forced-progress
clauses: a region V, a progress metric m, and a per-round decrease c such
that from every V-state with m > 0 the environment can, whatever the
controller picks, either fall into U or stay in V while m drops by c within
at most two control cycles.  Every clause is verified by quantifier
elimination before being added; the test returning False means "not
certified", never "not optimal".
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional

from . import arith, ode, qe, syntax as S
from .arith import Atom, GE, GT, Poly
from .parser import ProblemSketch, TIMER_VAR
from .qe import BackendTimeout, Context, DegreeTooHigh
from .reduce import ReduceResult, reduce
from .syntax import (
    And, Assign, AssignAny, Box, Choice, Cmp, Diamond, Dual, FALSE, Formula,
    HybridGame, Imply, Not, ODE, Or, Seq, Sub, TRUE, Term, Test, Variable,
    conj, dchoice, disj, seq,
)


class NoSolution(Exception):
    pass


@dataclass
class Stats:
    unroll: int = 0
    qe_calls: int = 0
    wall_ms: int = 0


@dataclass
class Solution:
    problem: str
    invariant: Formula
    guards: dict[str, Formula]
    guarantee: str
    exact_invariant: bool
    exact_guards: bool
    stats: Stats = field(default_factory=Stats)


# ---------------------------------------------------------------------------
# Game builders
# ---------------------------------------------------------------------------

def plant_game(p: ProblemSketch, bound: Optional[Term], reset_timer: bool = True) -> HybridGame:
    eqs = tuple(p.plant_odes) + ((TIMER_VAR, S.ONE),)
    domain = p.domain
    if bound is not None:
        cap = Cmp("<=", Variable(TIMER_VAR), bound)
        domain = cap if _is_true(domain) else And(domain, cap)
    game: HybridGame = ODE(eqs, domain)
    if reset_timer:
        game = Seq(Assign(TIMER_VAR, S.ZERO), game)
    return game


def plant(p: ProblemSketch) -> HybridGame:
    return plant_game(p, p.cycle_bound, reset_timer=True)


def plant_unbounded(p: ProblemSketch) -> HybridGame:
    return plant_game(p, None, reset_timer=False)


def forever_game(p: ProblemSketch, permanent: list[str]) -> HybridGame:
    acts = dict(p.actions)
    return Seq(dchoice([acts[name] for name in permanent]), plant_unbounded(p))


def step_game(p: ProblemSketch, permanent: list[str], theta: str) -> HybridGame:
    acts = dict(p.actions)
    deadline = S.Add(Variable(theta), p.cycle_bound)
    return seq([
        Dual(Seq(AssignAny(theta), Test(Cmp(">=", Variable(theta), S.ZERO)))),
        dchoice([acts[name] for name in permanent]),
        plant_game(p, deadline, reset_timer=True),
        Dual(Test(p.safe)),
        Test(Cmp(">=", Variable(TIMER_VAR), Variable(theta))),
    ])


def _is_true(f: Formula) -> bool:
    return isinstance(f, S.BoolConst) and f.value


# ---------------------------------------------------------------------------
# Action permanence
# ---------------------------------------------------------------------------

def _branches(g: HybridGame) -> list[list[HybridGame]]:
    """All straight-line branches of a discrete program."""
    if isinstance(g, (Assign, AssignAny, Test)):
        return [[g]]
    if isinstance(g, Seq):
        out = []
        for left in _branches(g.first):
            for right in _branches(g.second):
                out.append(left + right)
        return out
    if isinstance(g, Choice):
        return _branches(g.left) + _branches(g.right)
    raise ValueError(f"not a discrete program: {g!r}")


def permanent_actions(p: ProblemSketch) -> list[str]:
    """Actions that replay as no-ops after a plant cycle.

    Sufficient syntactic criterion: the action only assigns plant-constant
    terms to variables the plant never writes, its tests mention neither
    plant-written nor action-written variables, and all branches assign the
    same variable set.
    """
    plant_written = frozenset(v for v, _ in p.plant_odes) | {TIMER_VAR}
    out = []
    for name, prog in p.actions:
        branches = _branches(prog)
        assigned_sets = []
        ok = True
        action_written = S.bound_vars(prog)
        for branch in branches:
            assigned = set()
            for stmt in branch:
                if isinstance(stmt, AssignAny):
                    ok = False
                    break
                if isinstance(stmt, Assign):
                    if stmt.var in plant_written:
                        ok = False
                        break
                    if S.free_vars(stmt.term) & plant_written:
                        ok = False
                        break
                    assigned.add(stmt.var)
                else:  # Test
                    refs = S.free_vars(stmt.cond)
                    if refs & (plant_written | action_written):
                        ok = False
                        break
            if not ok:
                break
            assigned_sets.append(frozenset(assigned))
        if ok and len(set(assigned_sets)) <= 1:
            out.append(name)
    return out


# ---------------------------------------------------------------------------
# Invariant and guard synthesis
# ---------------------------------------------------------------------------

def compute_I0(p: ProblemSketch, ctx: Optional[Context] = None) -> ReduceResult:
    ctx = ctx or Context()
    permanent = permanent_actions(p)
    if not permanent:
        return ReduceResult(FALSE, True)
    goal = Box(forever_game(p, permanent), p.safe)
    return reduce(goal, p.assum, ctx, hints=p.hints, conserved=p.conserved)


def unroll_step(I: Formula, p: ProblemSketch, ctx: Optional[Context] = None) -> ReduceResult:
    ctx = ctx or Context()
    permanent = permanent_actions(p)
    if not permanent:
        return reduce(I, p.assum, ctx, hints=p.hints, conserved=p.conserved)
    theta = ctx.fresh("theta")
    goal = Or(I, Box(step_game(p, permanent, theta), I))
    return reduce(goal, p.assum, ctx, hints=p.hints, conserved=p.conserved)


def synthesize_guards(I: Formula, p: ProblemSketch,
                      ctx: Optional[Context] = None) -> dict[str, ReduceResult]:
    ctx = ctx or Context()
    out: dict[str, ReduceResult] = {}
    for name, act in p.actions:
        goal = Box(Seq(act, plant(p)), I)
        out[name] = reduce(goal, p.assum, ctx, hints=p.hints, conserved=p.conserved)
    return out


def valid(f: Formula, assumptions: Formula, ctx: Context) -> bool:
    """Algorithm-level validity: failures count as not-valid.

    A cheap exact-rational counterexample search runs first; most candidate
    checks during optimality certification are falsifiable instantly."""
    goal = f if _is_true(assumptions) else Imply(assumptions, f)
    if S.is_propositional(goal) and arith.numeric_counterexample(goal) is not None:
        return False
    try:
        return qe.is_valid(f, assumptions, ctx)
    except (DegreeTooHigh, BackendTimeout) as exc:
        ctx.notes.append(f"validity check degraded to false: {exc}")
        return False


def run(p: ProblemSketch, unroll_limit: int = 2, ctx: Optional[Context] = None,
        optimality: bool = True) -> Iterator[Solution]:
    """Generate solutions of increasing permissiveness with guarantee labels."""
    if unroll_limit < 0:
        raise ValueError("unroll limit must be nonnegative")
    ctx = ctx or Context()
    t0 = time.monotonic()
    qe0 = ctx.qe_calls

    def stats(k: int) -> Stats:
        return Stats(unroll=k, qe_calls=ctx.qe_calls - qe0,
                     wall_ms=int((time.monotonic() - t0) * 1000))

    def emit(I, guards, eI, eG, label, k) -> Solution:
        return Solution(p.name, I, {n: g.formula for n, g in guards.items()},
                        label, eI, eG, stats(k))

    k = 0
    first = compute_I0(p, ctx)
    I, eI = first.formula, first.exact
    yielded = 0
    while k <= unroll_limit:
        guards = synthesize_guards(I, p, ctx)
        eG = all(g.exact for g in guards.values())
        gate = (eG and eI) or valid(Imply(I, disj([g.formula for g in guards.values()])),
                                    p.assum, ctx)
        if gate:
            if optimality and eG and optimality_test(I, p, unroll_limit, ctx):
                yield emit(I, guards, eI, eG, "optimal", k)
                return
            if eG and eI:
                yield emit(I, guards, eI, eG, f"{k}-optimal", k)
            else:
                yield emit(I, guards, eI, eG, "sound", k)
            yielded += 1
        nxt = unroll_step(I, p, ctx)
        eI = eI and nxt.exact
        if eG and eI and valid(Imply(nxt.formula, I), p.assum, ctx):
            yield emit(I, guards, eI, eG, "omega-optimal", k)
            return
        I = nxt.formula
        k += 1
    if yielded == 0:
        raise NoSolution(
            f"soundness gate failed at every unrolling depth <= {unroll_limit}")


# ---------------------------------------------------------------------------
# Uniform action optimality (doubled system)
# ---------------------------------------------------------------------------

def _domain_level_terms(domain: Formula) -> Optional[list[Term]]:
    """Terms q with domain = /\ q >= 0 (weak or strict); None if other shapes."""
    out: list[Term] = []
    for atom in S.conjuncts(domain):
        if _is_true(atom):
            continue
        if not isinstance(atom, Cmp):
            return None
        if atom.op in (">=", ">"):
            out.append(Sub(atom.left, atom.right))
        elif atom.op in ("<=", "<"):
            out.append(Sub(atom.right, atom.left))
        else:
            return None
    return out


def _min_order(ms1: tuple[Term, ...], ms2: tuple[Term, ...]) -> Formula:
    """min(ms1) >= min(ms2), by case split (min is not a term former)."""
    return conj([disj([Cmp(">=", a, b) for b in ms2]) for a in ms1])


def _symbolic_outcomes(prog) -> list[tuple[dict, list[Formula]]]:
    """(assignment map, test conditions) per straight-line branch."""
    out = []
    for branch in _branches(prog):
        env: dict[str, Term] = {}
        tests: list[Formula] = []
        ok = True
        for stmt in branch:
            if isinstance(stmt, Assign):
                term = stmt.term
                for var, val in env.items():
                    term = S.substitute_term(term, var, val)
                env[stmt.var] = term
            elif isinstance(stmt, Test):
                cond = stmt.cond
                for var, val in env.items():
                    cond = S.substitute(cond, var, val)
                tests.append(cond)
            else:
                ok = False
                break
        if ok:
            out.append((env, tests))
    return out


def _doubled_check(j: str, p: ProblemSketch, metric: "_Metric", ctx: Context) -> bool:
    """Joint dominance invariant in the doubled system.

    Copy 1 always plays action j; copy 2 plays anything; both run the plant
    in lockstep (shared timer).  Checked invariant: m1 >= m2 together with
    q1 <= q2 for every domain level q (so copy 2 never stops earlier), under
    the doubled modeling assumptions.  Action values are substituted up
    front, one quantifier-elimination problem per action pair.
    """
    domain_full = p.domain
    cap = Cmp("<=", Variable(TIMER_VAR), p.cycle_bound)
    domain_full = cap if _is_true(domain_full) else And(domain_full, cap)
    qs = _domain_level_terms(domain_full)
    if qs is None:
        return False
    written = frozenset(v for v, _ in p.plant_odes)
    for _, act in p.actions:
        written = written | S.bound_vars(act)
    written = written - {TIMER_VAR}

    def tag(node, t):
        return S.tag_rename(node, written, t)

    ms1 = tuple(tag(m, 1) for m in metric.terms)
    ms2 = tuple(tag(m, 2) for m in metric.terms)
    order = [_min_order(ms1, ms2)]
    for q in qs:
        q1, q2 = tag(q, 1), tag(q, 2)
        if q1 != q2:
            order.append(Cmp("<=", q1, q2))
    invariant = conj(order)
    assum2 = And(tag(p.assum, 1), tag(p.assum, 2))
    acts = dict(p.actions)

    state_eqs = tuple(p.plant_odes)
    base_eqs = tuple((S.tagged_name(v, 1), tag(rhs, 1)) for v, rhs in state_eqs) + \
        tuple((S.tagged_name(v, 2), tag(rhs, 2)) for v, rhs in state_eqs) + \
        ((TIMER_VAR, S.ONE),)
    base_domain = And(tag(domain_full, 1), tag(domain_full, 2))

    def apply_env(node, env):
        for var, val in env.items():
            if isinstance(node, Term):
                node = S.substitute_term(node, var, val)
            else:
                node = S.substitute(node, var, val)
        return node

    sub = Context(simplify_full=ctx.simplify_full,
                  qe_timeout=min(15.0, ctx.qe_timeout), backend=ctx.backend)
    try:
        for env1, tests1 in _symbolic_outcomes(tag(acts[j], 1)):
            env1 = dict(env1)
            env1[TIMER_VAR] = S.ZERO
            for name2, _ in p.actions:
                for env2, tests2 in _symbolic_outcomes(tag(acts[name2], 2)):
                    env = dict(env1)
                    env.update(env2)
                    eqs = tuple((v, apply_env(rhs, env)) for v, rhs in base_eqs)
                    system = ode.OdeSystem(eqs, apply_env(base_domain, env))
                    # the postcondition sees assigned control values; the
                    # antecedent invariant is about the pre-action state.
                    # Only flow-invariant modeling assumptions may enter the
                    # box reduction itself, the rest stays on the outer
                    # implication.
                    post = apply_env(invariant, env)
                    pre = conj(list(tests1) + list(tests2) + [invariant, assum2])
                    if _box_flow_counterexample(system, post, pre):
                        return False
                    boxed, exact = ode.odereduce("box", system, post, assum2, sub,
                                                 hints=p.hints, conserved=p.conserved)
                    if not exact and not _is_true(boxed):
                        # inexact one-sided result cannot certify preservation
                        if not valid(Imply(pre, boxed), TRUE, sub):
                            return False
                        continue
                    if not valid(Imply(pre, boxed), TRUE, sub):
                        return False
        return True
    finally:
        ctx.qe_calls += sub.qe_calls


def _box_flow_counterexample(system: "ode.OdeSystem", post: Formula,
                             pre: Formula, trials: int = 50) -> bool:
    """Exact sampling falsifier for pre -> [system] post (solvable systems):
    True when some pre-state and legal duration reach a post-violation."""
    import random
    from fractions import Fraction
    try:
        sol = ode.solve(system, "dur~pair")
        pre_fn = arith.compile_formula(pre)
        post_fn = arith.compile_formula(post)
        domain_fn = arith.compile_formula(system.domain)
    except Exception:
        return False
    flows = {v: arith.compile_term(poly.to_term()) for v, poly in sol.solutions.items()}
    names = set(S.free_vars(pre) | S.free_vars(post) | S.free_vars(system.domain))
    for v, rhs in system.equations:
        names.add(v)
        names |= S.free_vars(rhs)
    variables = sorted(names)
    rng = random.Random(23)

    def flow(env, tau):
        inner = dict(env)
        inner["dur~pair"] = tau
        out = dict(env)
        for v, fn in flows.items():
            out[v] = fn(inner)
        return out

    hits = 0
    for _ in range(trials * 10):
        if hits >= trials:
            break
        env = {v: Fraction(rng.randint(-8, 8), rng.choice((1, 1, 2))) for v in variables}
        try:
            if not pre_fn(env):
                continue
        except arith.EvalError:
            continue
        hits += 1
        for tau in (Fraction(1, 4), Fraction(1, 2), Fraction(1), Fraction(2), Fraction(7, 2)):
            try:
                if not all(domain_fn(flow(env, tau * Fraction(k, 4))) for k in range(5)):
                    continue
                if not post_fn(flow(env, tau)):
                    return True
            except arith.EvalError:
                continue
    return False


def uniform_action_optimality(j: str, p: ProblemSketch, m: Term,
                              ctx: Optional[Context] = None) -> bool:
    ctx = ctx or Context()
    try:
        return _doubled_check(j, p, _Metric((m,)), ctx)
    except (DegreeTooHigh, BackendTimeout, S.TagCollision):
        return False


def _uniformly_optimal(j: str, p: ProblemSketch, metric: "_Metric", ctx: Context) -> bool:
    try:
        return _doubled_check(j, p, metric, ctx)
    except (DegreeTooHigh, BackendTimeout, S.TagCollision):
        return False


# ---------------------------------------------------------------------------
# Optimality certificate
# ---------------------------------------------------------------------------

@dataclass
class _Metric:
    """A progress metric: a single term or a min of two terms."""
    terms: tuple[Term, ...]

    def le_zero(self) -> Formula:
        return disj([Cmp("<=", t, S.ZERO) for t in self.terms])

    def gt_zero(self) -> Formula:
        return conj([Cmp(">", t, S.ZERO) for t in self.terms])

    def is_single(self) -> bool:
        return len(self.terms) == 1


def _metric_candidates(source: Formula, limit: int = 8) -> list[_Metric]:
    """Candidate metrics: positive-guard atoms, their pairwise mins and sums.

    An atom canonicalized as p < 0 contributes the positive guard -p > 0.
    """
    try:
        ir = arith.formula_to_ir(source)
    except (ValueError, arith.DivisionByZeroLiteral):
        return []
    singles: list[Poly] = []
    seen = set()
    for atom in arith.ir_atoms(ir) if not isinstance(ir, bool) else ():
        if atom.signs in (GT, GE):
            guard = atom.poly
        elif atom.signs in (arith.LT, arith.LE):
            guard = -atom.poly
        else:
            continue
        if guard.key() not in seen:
            seen.add(guard.key())
            singles.append(guard)
    singles = singles[:limit]
    out = [_Metric((s.to_term(),)) for s in singles]
    for i in range(len(singles)):
        for j in range(i + 1, len(singles)):
            out.append(_Metric(((singles[i] + singles[j]).to_term(),)))
            out.append(_Metric((singles[i].to_term(), singles[j].to_term())))
    return out[: 4 * limit]


class _CycleSampler:
    """Exact random simulation of one control cycle, used to falsify
    box-style claims cheaply before quantifier elimination runs."""

    def __init__(self, p: ProblemSketch):
        import random
        self.p = p
        self.rng = random.Random(11)
        self.ok = True
        try:
            from . import ode as ode_mod
            eqs = tuple(p.plant_odes) + ((TIMER_VAR, S.ONE),)
            self.solution = ode_mod.solve(ode_mod.OdeSystem(eqs, p.domain), "dur~probe")
        except Exception:
            self.ok = False
            return
        self.flows = {v: arith.compile_term(poly.to_term())
                      for v, poly in self.solution.solutions.items()}
        self.domain_fn = arith.compile_formula(p.domain)
        self.assum_fn = arith.compile_formula(p.assum)
        self.cycle_fn = arith.compile_term(p.cycle_bound)
        self.outcomes = [(name, _symbolic_outcomes(act)) for name, act in p.actions]
        self.vars = sorted(S.free_vars(p.assum) | S.free_vars(p.safe)
                           | S.free_vars(p.domain) | S.free_vars(p.cycle_bound)
                           | {v for v, _ in p.plant_odes}
                           | {v for _, a in p.actions for v in S.all_names(a)})
        self.vars = [v for v in self.vars if v != TIMER_VAR]

    def flow(self, env: dict, tau) -> dict:
        inner = dict(env)
        inner["dur~probe"] = tau
        out = dict(env)
        for v, fn in self.flows.items():
            out[v] = fn(inner)
        out[TIMER_VAR] = tau
        return out

    def _duration_legal(self, env: dict, tau) -> bool:
        from fractions import Fraction
        return all(self.domain_fn(self.flow(env, tau * Fraction(j, 4)))
                   for j in range(5))

    def falsifies_invariance(self, f: Formula, trials: int = 60) -> bool:
        """True when a sampled assum/\\f state, action, and legal duration end
        outside f: a genuine counterexample to one-cycle invariance."""
        if not self.ok:
            return False
        from fractions import Fraction
        try:
            fn = arith.compile_formula(f)
        except (ValueError, TypeError):
            return False
        hits = 0
        for _ in range(trials * 8):
            if hits >= trials:
                break
            env = {v: Fraction(self.rng.randint(-12, 12), self.rng.choice((1, 1, 2, 3)))
                   for v in self.vars}
            env[TIMER_VAR] = Fraction(0)
            try:
                if not (self.assum_fn(env) and fn(env)):
                    continue
            except (arith.EvalError, KeyError):
                continue
            hits += 1
            for _, branches in self.outcomes:
                for assigns, tests in branches:
                    try:
                        after = dict(env)
                        for var, term in assigns.items():
                            after[var] = arith.compile_term(term)(env)
                        if not all(arith.compile_formula(t)(after) for t in tests):
                            continue
                        T = self.cycle_fn(after)
                        if T <= 0:
                            continue
                        for k in (1, 2, 4):
                            tau = T / k
                            if not self._duration_legal(after, tau):
                                continue
                            if not fn(self.flow(after, tau)):
                                return True
                    except (arith.EvalError, KeyError):
                        continue
        return False


def _invariant_region(clause_atoms, p: ProblemSketch, ctx: Context,
                      cache: dict, sampler: Optional[_CycleSampler] = None) -> list[Formula]:
    """Conjuncts of a DNF clause that are one-cycle forward invariants."""
    acts = S.choice([a for _, a in p.actions])
    cycle = Seq(acts, plant(p))
    keep: list[Formula] = []
    for atom in clause_atoms:
        key = atom.key
        verdict = cache.get(key)
        if verdict is None:
            f = atom.to_formula()
            if sampler is not None and sampler.falsifies_invariance(f):
                verdict = False
            else:
                try:
                    r = reduce(Box(cycle, f), p.assum, ctx,
                               hints=p.hints, conserved=p.conserved)
                    verdict = valid(Imply(f, r.formula), p.assum, ctx)
                except Exception:
                    verdict = False
            cache[key] = verdict
        if verdict:
            keep.append(atom.to_formula())
    return keep


def optimality_test(I: Formula, p: ProblemSketch, unroll: int = 2,
                    ctx: Optional[Context] = None) -> bool:
    """Best-effort certificate that I covers every controllable state."""
    ctx = ctx or Context()
    try:
        return _optimality_test(I, p, unroll, ctx)
    except Exception as exc:  # certification is advisory; never poison a run
        ctx.notes.append(f"optimality test aborted: {exc}")
        return False


def _grow(U: Formula, clause: Formula, p: ProblemSketch, ctx: Context) -> Optional[Formula]:
    if valid(Imply(clause, U), p.assum, ctx):
        return None
    return ctx.simplify(Or(U, clause), p.assum)


def _optimality_test(I: Formula, p: ProblemSketch, unroll: int, ctx: Context) -> bool:
    assum = p.assum
    if valid(Imply(assum, I), TRUE, ctx):
        return True
    U = ctx.simplify(arith.nnf(Not(p.safe)), assum)
    permanent = permanent_actions(p)
    all_acts = dchoice([a for _, a in p.actions])
    inv_cache: dict = {}
    sampler = _CycleSampler(p)
    unrolls_left = max(unroll, 1)
    for _ in range(2 * unroll + 6):
        if valid(Imply(assum, Or(I, U)), TRUE, ctx):
            return True
        grown = None
        # (a) one-cycle reachability unrolling
        if unrolls_left > 0:
            unrolls_left -= 1
            r = reduce(Diamond(Seq(all_acts, plant(p)), U), assum, ctx,
                       hints=p.hints, conserved=p.conserved)
            grown = _grow(U, r.formula, p, ctx)
        # (b) dominant-action clauses / (c) forced-progress clauses
        if grown is None:
            grown = _ghost_clauses(I, U, p, permanent, inv_cache, ctx, sampler)
        if grown is None:
            grown = _forced_progress_clauses(I, U, p, ctx)
        if grown is None:
            return valid(Imply(assum, Or(I, U)), TRUE, ctx)
        U = grown
    return valid(Imply(assum, Or(I, U)), TRUE, ctx)


def _frontier_clauses(I: Formula, U: Formula, p: ProblemSketch, ctx: Context):
    frontier = ctx.simplify(arith.nnf(And(Not(I), Not(U))), p.assum)
    try:
        return arith.dnf_clauses(And(p.assum, frontier), clause_budget=64)
    except arith.SizeBlowup:
        return []


def _ghost_clauses(I: Formula, U: Formula, p: ProblemSketch, permanent,
                   inv_cache, ctx: Context, sampler=None) -> Optional[Formula]:
    """Uniformly-optimal-action clauses: V /\ <act_j ; plant-unbounded> m <= 0."""
    for clause in _frontier_clauses(I, U, p, ctx):
        V = conj(_invariant_region(clause, p, ctx, inv_cache, sampler))
        shrunk = ctx.simplify(arith.nnf(Not(U)), And(p.assum, V) if not _is_true(V) else p.assum)
        # the safety boundary always suggests metrics (unsafe stays inside U)
        candidates = _metric_candidates(shrunk) + _metric_candidates(arith.nnf(p.safe))
        seen_metrics = set()
        unique = []
        for metric in candidates:
            mkey = tuple(S.structural_key(t) for t in metric.terms)
            if mkey not in seen_metrics:
                seen_metrics.add(mkey)
                unique.append(metric)
        for metric in unique:
            if not valid(Imply(And(V, metric.le_zero()), U), p.assum, ctx):
                continue
            for j in permanent:
                if not _uniformly_optimal(j, p, metric, ctx):
                    continue
                reach = reduce(
                    Diamond(Seq(dict(p.actions)[j], plant_unbounded(p)),
                            metric.le_zero()),
                    p.assum, ctx, hints=p.hints, conserved=p.conserved)
                clause_formula = And(V, reach.formula) if not _is_true(V) else reach.formula
                grown = _grow(U, clause_formula, p, ctx)
                if grown is not None:
                    return grown
    return None


def _progress_rates(p: ProblemSketch) -> list[Term]:
    """Candidate per-cycle decreases c: |rate| * cycle bound for parameter
    rates the actions install into the plant."""
    out: list[Term] = []
    seen = set()
    state = frozenset(v for v, _ in p.plant_odes) | {TIMER_VAR}
    for _, act in p.actions:
        assigns: dict[str, Term] = {}
        for branch in _branches(act):
            for stmt in branch:
                if isinstance(stmt, Assign):
                    assigns[stmt.var] = stmt.term
        for _, rhs in p.plant_odes:
            t = rhs
            for var, val in assigns.items():
                t = S.substitute_term(t, var, val)
            try:
                poly = arith.term_to_poly(t)
            except (ValueError, arith.DivisionByZeroLiteral):
                continue
            if poly.is_zero() or poly.variables() & state:
                continue
            mag = poly if next(iter(poly.terms.values())) > 0 else -poly
            key = mag.key()
            if key not in seen:
                seen.add(key)
                out.append(S.Mul(mag.to_term(), p.cycle_bound))
    return out[:4]


def _forced_progress_clauses(I: Formula, U: Formula, p: ProblemSketch,
                             ctx: Context) -> Optional[Formula]:
    """Convergence clauses: all of V is uncontrollable when, whatever the
    controller does, the environment keeps V while decreasing m by c within
    at most two cycles (or falls into U), and V /\ m <= 0 lands in U."""
    rates = _progress_rates(p)
    if not rates:
        return None
    clauses = _frontier_clauses(I, U, p, ctx)
    regions = _candidate_regions(clauses, p, ctx)
    cycle_games = [Seq(a, plant(p)) for _, a in p.actions]
    for V in regions:
        shrunk = ctx.simplify(arith.nnf(Not(U)), And(p.assum, V))
        metrics = [m for m in _metric_candidates(shrunk) if m.is_single()]
        for metric in metrics:
            m = metric.terms[0]
            if not valid(Imply(And(V, metric.le_zero()), U), p.assum, ctx):
                continue
            for c in rates:
                if not valid(Cmp(">", c, S.ZERO), p.assum, ctx):
                    continue
                if _forced_progress_holds(V, m, c, U, p, cycle_games, ctx):
                    grown = _grow(U, V, p, ctx)
                    if grown is not None:
                        return grown
                    break
    return None


def _forced_progress_holds(V: Formula, m: Term, c: Term, U: Formula,
                           p: ProblemSketch, cycle_games, ctx: Context) -> bool:
    m0 = Variable(ctx.fresh("m0"))
    progressed = And(V, Cmp(">=", Sub(m0, m), c))
    target1 = Or(U, progressed)
    one_step = conj([Diamond(g, target1) for g in cycle_games])
    antecedent = And(And(V, Cmp(">", m, S.ZERO)), Cmp("=", m0, m))
    if valid(Imply(antecedent, one_step), p.assum, ctx):
        return True
    target2 = Or(target1, one_step)
    two_step = conj([Diamond(g, target2) for g in cycle_games])
    return valid(Imply(antecedent, two_step), p.assum, ctx)


def _candidate_regions(clauses, p: ProblemSketch, ctx: Context) -> list[Formula]:
    """Invariant-free region candidates for the forced-progress rule: single
    DNF clauses and same-shape pairs merged into shared /\ (extra1 \/ extra2)."""
    regions: list[Formula] = []
    seen = set()

    def add(f: Formula):
        key = S.structural_key(f)
        if key not in seen:
            seen.add(key)
            regions.append(f)

    sets = [{a.key: a for a in clause} for clause in clauses]
    for i, clause in enumerate(clauses):
        add(conj([a.to_formula() for a in clause]))
        for j in range(i + 1, len(clauses)):
            shared = [a for k, a in sets[i].items() if k in sets[j]]
            extra_i = [a for k, a in sets[i].items() if k not in sets[j]]
            extra_j = [a for k, a in sets[j].items() if k not in sets[i]]
            if not shared or not extra_i or not extra_j:
                continue
            if len(extra_i) > 2 or len(extra_j) > 2:
                continue
            add(And(conj([a.to_formula() for a in shared]),
                    Or(conj([a.to_formula() for a in extra_i]),
                       conj([a.to_formula() for a in extra_j]))))
    return regions[:12]
