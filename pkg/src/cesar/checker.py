"""Independent validation of synthesized solutions.

``check_solution`` re-derives every safety obligation of a candidate
(invariant, guard map) pair with the reduction oracle and decides it by
quantifier elimination, fail-closed: an undecided obligation is reported as
failed, with the raw formula attached for external re-checking.

  O1  assum /\ I -> safe
  O2  assum /\ I -> [ (++_i ?G_i; act_i) ; plant ] (assum /\ I)
  O3  assum /\ I -> \/_i G_i
  O4  assum /\ I /\ G_i -> [ act_i ; plant ] I     (per action)

``simulate_check`` cross-checks numerically, but with exact rational
arithmetic: random initial states satisfying assum /\ I, a random enabled
guard's action each cycle, random legal durations up to the cycle bound, and
assertions that safety holds throughout, the invariant holds at every
control boundary, and some guard is always enabled.  Plants without closed
forms are reported as skipped.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from . import arith, ode, qe, syntax as S
from .parser import ProblemSketch, TIMER_VAR, print_formula
from .qe import BackendTimeout, Context, DegreeTooHigh
from .reduce import reduce
from .synthesis import Solution, plant
from .syntax import (
    And, Assign, AssignAny, BoolConst, Box, Choice, Cmp, Formula, Imply,
    Seq, Term, Test, TRUE, Variable, conj, disj,
)


@dataclass
class Obligation:
    name: str
    description: str
    status: str  # "pass" | "fail" | "unknown"
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "pass"


@dataclass
class CheckReport:
    obligations: list[Obligation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(o.ok for o in self.obligations)

    def lines(self) -> list[str]:
        return [f"[{o.status:>7}] {o.name}: {o.description}" for o in self.obligations]


@dataclass
class SimReport:
    trials: int
    horizon: int
    completed: int = 0
    violations: list[str] = field(default_factory=list)
    skipped: bool = False
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.skipped or not self.violations


def _decide(name: str, description: str, goal: Formula, assumptions: Formula,
            ctx: Context) -> Obligation:
    try:
        ok = qe.is_valid(goal, assumptions, ctx)
        return Obligation(name, description, "pass" if ok else "fail",
                          "" if ok else print_formula(Imply(assumptions, goal)))
    except (DegreeTooHigh, BackendTimeout) as exc:
        return Obligation(name, description, "unknown",
                          f"{exc}; formula: {print_formula(Imply(assumptions, goal))}")


def check_solution(p: ProblemSketch, s: Solution,
                   ctx: Optional[Context] = None) -> CheckReport:
    ctx = ctx or Context()
    I = s.invariant
    guards = s.guards
    base = And(p.assum, I)
    report = CheckReport()
    report.obligations.append(
        _decide("O1", "invariant implies safety", Imply(base, p.safe), TRUE, ctx))

    ctrl = S.choice([Seq(Test(guards[name]), act) for name, act in p.actions])
    loop_body = Box(Seq(ctrl, plant(p)), base)
    try:
        r2 = reduce(loop_body, p.assum, ctx, hints=p.hints, conserved=p.conserved)
        report.obligations.append(
            _decide("O2", "one control cycle preserves assum and the invariant",
                    Imply(base, r2.formula), TRUE, ctx))
    except Exception as exc:
        report.obligations.append(Obligation(
            "O2", "one control cycle preserves assum and the invariant",
            "unknown", str(exc)))

    report.obligations.append(
        _decide("O3", "some action is always available",
                Imply(base, disj([guards[name] for name, _ in p.actions])), TRUE, ctx))

    for name, act in p.actions:
        try:
            ri = reduce(Box(Seq(act, plant(p)), I), p.assum, ctx,
                        hints=p.hints, conserved=p.conserved)
            report.obligations.append(
                _decide(f"O4[{name}]", f"guard of {name} keeps the invariant",
                        Imply(And(base, guards[name]), ri.formula), TRUE, ctx))
        except Exception as exc:
            report.obligations.append(Obligation(
                f"O4[{name}]", f"guard of {name} keeps the invariant",
                "unknown", str(exc)))
    return report


# ---------------------------------------------------------------------------
# Exact-rational simulation
# ---------------------------------------------------------------------------

from .arith import EvalError, compile_formula, compile_term  # noqa: F401


def _exec_action(prog, env: dict, rng: random.Random) -> Optional[dict]:
    """One feasible outcome of a discrete program, or None if all tests fail."""
    if isinstance(prog, Assign):
        out = dict(env)
        out[prog.var] = compile_term(prog.term)(env)
        return out
    if isinstance(prog, AssignAny):
        out = dict(env)
        out[prog.var] = Fraction(rng.randint(-8, 8), rng.choice((1, 2, 4)))
        return out
    if isinstance(prog, Test):
        return env if compile_formula(prog.cond)(env) else None
    if isinstance(prog, Seq):
        mid = _exec_action(prog.first, env, rng)
        return None if mid is None else _exec_action(prog.second, mid, rng)
    if isinstance(prog, Choice):
        first, second = (prog.left, prog.right) if rng.random() < 0.5 else (prog.right, prog.left)
        out = _exec_action(first, env, rng)
        return out if out is not None else _exec_action(second, env, rng)
    raise ValueError(f"not a discrete program: {prog!r}")


def _sample_states(p: ProblemSketch, cond: Callable[[dict], bool],
                   variables: list[str], pinned: dict[str, Fraction],
                   count: int, rng: random.Random) -> list[dict]:
    states: list[dict] = []
    attempts = 0
    limit = max(400 * count, 4000)
    while len(states) < count and attempts < limit:
        attempts += 1
        env = dict(pinned)
        for v in variables:
            if v not in env:
                env[v] = Fraction(rng.randint(-24, 24), rng.choice((1, 1, 2, 4)))
        try:
            if cond(env):
                states.append(env)
        except EvalError:
            continue
    return states


def equality_pins(assum: Formula) -> dict[str, Fraction]:
    """var -> value for assumption conjuncts of shape var = rational."""
    signs = arith._assumption_signs(assum)
    return arith._equality_bindings(signs)


def simulate_check(p: ProblemSketch, s: Solution, trials: int = 1000,
                   horizon: int = 50, seed: int = 0,
                   ctx: Optional[Context] = None) -> SimReport:
    report = SimReport(trials=trials, horizon=horizon)
    eqs = tuple(p.plant_odes) + ((TIMER_VAR, S.ONE),)
    system = ode.OdeSystem(eqs, p.domain)
    try:
        sol = ode.solve(system, "dur~sim")
    except ode.NotSolvable as exc:
        report.skipped = True
        report.reason = f"plant has no closed form: {exc}"
        return report
    rng = random.Random(seed)
    guard_fns = {name: compile_formula(s.guards[name]) for name, _ in p.actions}
    inv_fn = compile_formula(s.invariant)
    safe_fn = compile_formula(p.safe)
    assum_fn = compile_formula(p.assum)
    domain_fn = compile_formula(p.domain) if not _is_true(p.domain) else (lambda env: True)
    cycle_fn = compile_term(p.cycle_bound)
    sol_fns = {var: compile_term(poly.to_term()) for var, poly in sol.solutions.items()}
    variables = sorted(set(
        list(S.free_vars(p.assum) | S.free_vars(p.safe) | S.free_vars(p.domain)
             | S.free_vars(s.invariant) | S.free_vars(p.cycle_bound))
        + [v for v, _ in p.plant_odes]
        + [v for g in s.guards.values() for v in S.free_vars(g)]
        + [v for _, a in p.actions for v in S.all_names(a)]))
    variables = [v for v in variables if v != TIMER_VAR]
    pinned = equality_pins(p.assum)
    start_fn = lambda env: assum_fn(env) and inv_fn(env)
    states = _sample_states(p, start_fn, variables, pinned, trials, rng)
    if not states:
        report.reason = "no initial states found satisfying assum and the invariant"
        return report

    def flow(env: dict, tau: Fraction) -> dict:
        out = dict(env)
        inner = dict(env)
        inner["dur~sim"] = tau
        for var in sol.solutions:
            if var == TIMER_VAR:
                continue
            out[var] = sol_fns[var](inner)
        return out

    for idx, start in enumerate(states):
        env = dict(start)
        env.setdefault(TIMER_VAR, Fraction(0))
        for step in range(horizon):
            enabled = [name for name, _ in p.actions if guard_fns[name](env)]
            if not enabled:
                report.violations.append(
                    f"trial {idx} step {step}: no guard enabled at {_fmt(env, variables)}")
                break
            action = dict(p.actions)[rng.choice(enabled)]
            after = _exec_action(action, env, rng)
            if after is None:
                report.violations.append(
                    f"trial {idx} step {step}: chosen action infeasible")
                break
            T = cycle_fn(after)
            candidates = [Fraction(0), T / 4, T / 2, 3 * T / 4, T]
            candidates += [T * Fraction(rng.randint(0, 16), 16) for _ in range(5)]
            legal = [tau for tau in candidates if _legal_duration(after, tau, flow, domain_fn)]
            tau = rng.choice(legal) if legal else Fraction(0)
            bad = _unsafe_moment(after, tau, flow, safe_fn)
            if bad is not None:
                report.violations.append(
                    f"trial {idx} step {step}: safety violated at time {bad} "
                    f"from {_fmt(after, variables)}")
                break
            env = flow(after, tau)
            env[TIMER_VAR] = tau
            if not inv_fn(env):
                report.violations.append(
                    f"trial {idx} step {step}: invariant violated at the control "
                    f"boundary {_fmt(env, variables)}")
                break
        report.completed += 1
        if len(report.violations) >= 10:
            break
    return report


def _legal_duration(env: dict, tau: Fraction, flow, domain_fn) -> bool:
    if tau == 0:
        return domain_fn(env)
    for k in range(9):
        if not domain_fn(flow(env, tau * Fraction(k, 8))):
            return False
    return True


def _unsafe_moment(env: dict, tau: Fraction, flow, safe_fn) -> Optional[Fraction]:
    for k in range(9):
        at = tau * Fraction(k, 8)
        if not safe_fn(flow(env, at)):
            return at
    return None


def _fmt(env: dict, variables: list[str]) -> str:
    return "{" + ", ".join(f"{v}={env[v]}" for v in variables if v in env) + "}"


def _is_true(f: Formula) -> bool:
    return isinstance(f, BoolConst) and f.value
