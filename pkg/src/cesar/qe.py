"""Quantifier elimination for first-order real arithmetic.

The internal engine is virtual substitution: linear test points for linear
occurrences and quadratic root expressions (with infinitesimal offsets for
strict constraints and -oo as the base point) for quadratic ones, eliminating
innermost quantifiers first with simplification after every step.  Atoms must
have degree <= 2 in each eliminated variable; higher degrees raise
DegreeTooHigh rather than approximating.

An existential over a negation-normal formula is replaced by a disjunction
over guarded test points:

    exists x. f  ==  OR_(guard, e) in E  guard /\ f[x // e]

where E contains -oo, the root of every linear occurrence, both roots of
every quadratic occurrence (guarded by nonzero leading coefficient and a
nonnegative discriminant), and, for polynomials constrained strictly, the
same roots shifted by a positive infinitesimal.  Universals go through the
negation of an existential.  Substituting a root expression (u + s*sqrt(d))/w
into an atom produces the sign of A + C*sqrt(d), decided exactly by the
usual square-and-compare case split.

An optional external SMT-LIB 2 solver (subprocess, logic NRA) backs validity
checks only; it is consulted when the internal engine reports DegreeTooHigh,
and "unknown" never counts as valid.
"""

from __future__ import annotations

import shlex
import subprocess
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import arith, syntax as S
from .arith import (
    ALL_SIGNS, Atom, EQ, GE, GT, IR, LE, LT, NE, NAnd, NOr, Poly,
    formula_to_ir, ir_and, ir_atoms, ir_map_atoms, ir_negate, ir_or,
    ir_to_formula,
)
from .syntax import (
    FALSE, TRUE, And, BoolConst, Box, Cmp, Diamond, Equiv, Exists, Forall,
    Formula, Imply, Not, Or, free_vars,
)


class DegreeTooHigh(Exception):
    def __init__(self, var: str, degree: int):
        super().__init__(f"variable {var} occurs with degree {degree} > 2")
        self.var = var
        self.degree = degree


class BackendTimeout(Exception):
    pass


@dataclass
class QEResult:
    formula: Formula
    exact: bool
    backend: str = "internal-vs"


# ---------------------------------------------------------------------------
# Engine context: options, counters, caches, fresh names
# ---------------------------------------------------------------------------

@dataclass
class Context:
    simplify_full: bool = True
    qe_timeout: float = 30.0
    backend: Optional["SmtBackend"] = None
    qe_calls: int = 0
    smt_calls: int = 0
    notes: list = field(default_factory=list)
    record_reduces: bool = False
    reduce_log: list = field(default_factory=list)
    _fresh: int = 0
    _decide_cache: dict = field(default_factory=dict)
    _valid_cache: dict = field(default_factory=dict)
    _reduce_cache: dict = field(default_factory=dict)
    prune_cache: dict = field(default_factory=dict)

    def fresh(self, prefix: str) -> str:
        name = f"{prefix}{S.RESERVED_SEP}{self._fresh}"
        self._fresh += 1
        return name

    def simplify(self, f: Formula, assumptions: Formula = TRUE) -> Formula:
        """The eager simplification pass applied between reduction steps."""
        if not self.simplify_full:
            return arith.simplify(f, TRUE, full=False)
        deadline = time.monotonic() + min(self.qe_timeout, 15.0)
        return arith.simplify(f, assumptions, full=True, oracle=_OracleGuard(self, deadline),
                              deadline=deadline)

    def _sub_context(self) -> "Context":
        return Context(simplify_full=False, qe_timeout=min(5.0, self.qe_timeout),
                       backend=None)

    def decide_atom(self, atom: Formula, assumptions: Formula) -> Optional[bool]:
        """True/False when assumptions decide the atom, None otherwise."""
        assumptions = _relevant_assumptions(atom, assumptions)
        key = (S.structural_key(atom), S.structural_key(assumptions))
        if key in self._decide_cache:
            return self._decide_cache[key]
        sub = self._sub_context()
        verdict: Optional[bool] = None
        try:
            if is_valid(atom, assumptions, sub):
                verdict = True
            elif is_valid(Not(atom), assumptions, sub):
                verdict = False
        except (DegreeTooHigh, BackendTimeout):
            verdict = None
        self.qe_calls += sub.qe_calls
        self._decide_cache[key] = verdict
        return verdict

    def entails(self, f: Formula, assumptions: Formula) -> bool:
        """True only when assumptions -> f is certified valid."""
        assumptions = _relevant_assumptions(f, assumptions)
        key = ("entails", S.structural_key(f), S.structural_key(assumptions))
        if key in self._decide_cache:
            return self._decide_cache[key]
        sub = self._sub_context()
        try:
            verdict = is_valid(f, assumptions, sub)
        except (DegreeTooHigh, BackendTimeout):
            verdict = False
        self.qe_calls += sub.qe_calls
        self._decide_cache[key] = verdict
        return verdict


class _OracleGuard:
    """Delegates oracle queries until the deadline passes, then goes silent
    (None/False answers are always safe for the simplifier)."""

    def __init__(self, ctx: "Context", deadline: float):
        self.ctx = ctx
        self.deadline = deadline

    @property
    def prune_cache(self):
        return self.ctx.prune_cache

    def decide_atom(self, atom, assumptions):
        if time.monotonic() > self.deadline:
            return None
        return self.ctx.decide_atom(atom, assumptions)

    def entails(self, f, assumptions):
        if time.monotonic() > self.deadline:
            return False
        return self.ctx.entails(f, assumptions)


def _relevant_assumptions(goal: Formula, assumptions: Formula) -> Formula:
    """Keep only assumption conjuncts transitively sharing variables with the
    goal; dropping assumptions is sound for one-sided decisions and keeps the
    oracle's quantifier count small."""
    if isinstance(assumptions, BoolConst):
        return assumptions
    conjuncts = list(S.conjuncts(assumptions))
    if len(conjuncts) <= 1:
        return assumptions
    reach = set(free_vars(goal))
    keep: list = []
    remaining = [(c, free_vars(c)) for c in conjuncts]
    for _ in range(3):  # a few rounds of transitive closure
        progressed = False
        still = []
        for c, fv in remaining:
            if fv & reach:
                keep.append(c)
                reach |= fv
                progressed = True
            else:
                still.append((c, fv))
        remaining = still
        if not progressed or not remaining:
            break
    if not keep:
        return TRUE
    return S.conj(keep)


_DEFAULT = Context()


# ---------------------------------------------------------------------------
# Virtual substitution
# ---------------------------------------------------------------------------

def _coeffs2(p: Poly, var: str) -> tuple[Poly, Poly, Poly]:
    """(a, b, c) with p = a*var^2 + b*var + c; raises DegreeTooHigh."""
    by_deg = p.coeffs_in(var)
    deg = max(by_deg, default=0)
    if deg > 2:
        raise DegreeTooHigh(var, deg)
    zero = Poly({})
    return by_deg.get(2, zero), by_deg.get(1, zero), by_deg.get(0, zero)


def _sign_minf_lt(p: Poly, var: str) -> IR:
    """p(-oo) < 0 for deg(p, var) <= 2."""
    a, b, c = _coeffs2(p, var)
    return ir_or([
        Atom.of(a, LT),
        ir_and([Atom.of(a, EQ), Atom.of(b, GT)]),
        ir_and([Atom.of(a, EQ), Atom.of(b, EQ), Atom.of(c, LT)]),
    ])


def _sign_minf_eq(p: Poly, var: str) -> IR:
    a, b, c = _coeffs2(p, var)
    return ir_and([Atom.of(a, EQ), Atom.of(b, EQ), Atom.of(c, EQ)])


@dataclass(frozen=True)
class _TestPoint:
    kind: str               # "minf" | "lin" | "quad"
    eps: bool = False
    b: Optional[Poly] = None     # lin: x = -c/b
    c: Optional[Poly] = None
    qa: Optional[Poly] = None    # quad: x = (-b + sigma*sqrt(D)) / (2a)
    qb: Optional[Poly] = None
    disc: Optional[Poly] = None
    sigma: int = 1


def _subst_lt(p: Poly, var: str, pt: _TestPoint) -> IR:
    """sign(p) < 0 at the (non-eps) test point."""
    if pt.kind == "minf":
        return _sign_minf_lt(p, var)
    a, b, c = _coeffs2(p, var)
    if pt.kind == "lin":
        n = _lin_value(a, b, c, pt)
        return Atom.of(n, LT)
    A, C = _quad_value(a, b, c, pt)
    return _sqrt_lt(A, C, pt.disc)


def _subst_eq(p: Poly, var: str, pt: _TestPoint) -> IR:
    if pt.kind == "minf":
        return _sign_minf_eq(p, var)
    a, b, c = _coeffs2(p, var)
    if pt.kind == "lin":
        return Atom.of(_lin_value(a, b, c, pt), EQ)
    A, C = _quad_value(a, b, c, pt)
    return _sqrt_eq(A, C, pt.disc)


def _lin_value(a: Poly, b: Poly, c: Poly, pt: _TestPoint) -> Poly:
    # p(-c0/b0) * b0^2  with  x = -c0/b0
    b0, c0 = pt.b, pt.c
    return a * c0 * c0 - b * c0 * b0 + c * b0 * b0


def _quad_value(a: Poly, b: Poly, c: Poly, pt: _TestPoint) -> tuple[Poly, Poly]:
    # p(root) * (2*a0)^2 = A + sigma*B*sqrt(D); returns (A, C := sigma*B)
    a0, b0, D = pt.qa, pt.qb, pt.disc
    A = a * (b0 * b0 + D) - a0 * b0 * b * Poly.const(2) + a0 * a0 * c * Poly.const(4)
    B = a0 * b * Poly.const(2) - a * b0 * Poly.const(2)
    C = B if pt.sigma > 0 else -B
    return A, C


def _sqrt_eq(A: Poly, C: Poly, D: Poly) -> IR:
    # A + C*sqrt(D) = 0  (given D >= 0)
    prod = Atom.of(A * C, LE)
    sq = Atom.of(A * A - C * C * D, EQ)
    return ir_and([prod, sq])


def _sqrt_le(A: Poly, C: Poly, D: Poly) -> IR:
    # A + C*sqrt(D) <= 0
    a_le = Atom.of(A, LE)
    c_le = Atom.of(C, LE)
    delta = A * A - C * C * D
    return ir_or([
        ir_and([a_le, c_le]),
        ir_and([a_le, Atom.of(delta, GE)]),
        ir_and([c_le, Atom.of(delta, LE)]),
    ])


def _sqrt_lt(A: Poly, C: Poly, D: Poly) -> IR:
    return ir_and([_sqrt_le(A, C, D), ir_negate(_sqrt_eq(A, C, D))])


def _subst_lt_eps(p: Poly, var: str, pt: _TestPoint) -> IR:
    """sign(p) < 0 just right of the test point."""
    if p.degree_in(var) == 0:
        return Atom.of(p, LT)
    return ir_or([
        _subst_lt(p, var, pt),
        ir_and([_subst_eq(p, var, pt), _subst_lt_eps(p.derivative(var), var, pt)]),
    ])


def _subst_eq_eps(p: Poly, var: str, pt: _TestPoint) -> IR:
    if p.degree_in(var) == 0:
        return Atom.of(p, EQ)
    return ir_and([_subst_eq(p, var, pt), _subst_eq_eps(p.derivative(var), var, pt)])


def _vs_atom(atom: Atom, var: str, pt: _TestPoint) -> IR:
    if var not in atom.poly.variables():
        return atom
    p = atom.poly
    lt = _subst_lt_eps if pt.eps else _subst_lt
    eq = _subst_eq_eps if pt.eps else _subst_eq
    pieces: list[IR] = []
    if -1 in atom.signs:
        pieces.append(lt(p, var, pt))
    if 0 in atom.signs:
        pieces.append(eq(p, var, pt))
    if 1 in atom.signs:
        pieces.append(lt(-p, var, pt))
    return ir_or(pieces)


def _guard(pt: _TestPoint) -> IR:
    if pt.kind == "minf":
        return True
    if pt.kind == "lin":
        return Atom.of(pt.b, NE)
    return ir_and([Atom.of(pt.qa, NE), Atom.of(pt.disc, GE)])


def elim_exists_ir(var: str, ir: IR, ctx: Context, deadline: float) -> IR:
    """One existential quantifier over a negation-normal IR formula."""
    if isinstance(ir, bool):
        return ir
    needs_exact: dict = {}
    needs_eps: dict = {}
    polys: dict = {}
    for atom in set_atoms(ir):
        p = atom.poly
        if var not in p.variables():
            continue
        deg = p.degree_in(var)
        if deg > 2:
            raise DegreeTooHigh(var, deg)
        k = p.key()
        polys[k] = p
        if 0 in atom.signs:
            # weak constraint: can flip from false to true exactly at a root
            needs_exact[k] = True
        else:
            # strict constraint: flips just past a root, so sample root+eps
            needs_eps[k] = True
    if not polys:
        return ir
    points: list[_TestPoint] = [_TestPoint("minf")]
    for k in sorted(polys):
        p = polys[k]
        a, b, c = _coeffs2(p, var)
        for eps in ((False,) if needs_exact.get(k) and not needs_eps.get(k)
                    else (True,) if needs_eps.get(k) and not needs_exact.get(k)
                    else (False, True)):
            points.append(_TestPoint("lin", eps=eps, b=b, c=c))
            if not a.is_zero():
                for sigma in (1, -1):
                    points.append(_TestPoint("quad", eps=eps, qa=a, qb=b,
                                             disc=b * b - c * a * Poly.const(4),
                                             sigma=sigma))
    branches: list[IR] = []
    produced = 0
    for pt in points:
        if time.monotonic() > deadline:
            raise BackendTimeout("virtual substitution exceeded its time budget")
        g = _guard(pt)
        if g is False:
            continue
        body = ir_map_atoms(ir, lambda a: _vs_atom(a, var, pt))
        branch = ir_and([g, body])
        produced += arith.ir_atom_count(branch)
        if produced > 60_000:
            raise BackendTimeout("virtual substitution output exceeded its size budget")
        branches.append(branch)
    return ir_or(branches)


def set_atoms(ir: IR) -> list[Atom]:
    seen = set()
    out = []
    for a in ir_atoms(ir):
        if a.key not in seen:
            seen.add(a.key)
            out.append(a)
    return out


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def eliminate(f: Formula, ctx: Optional[Context] = None,
              assumptions: Formula = TRUE) -> QEResult:
    """Quantifier-free equivalent of a first-order formula.

    ``assumptions`` only drive intermediate simplification; the result is
    equivalent to the input wherever they hold.  They must not mention the
    quantified variables (engine-internal quantifiers are fresh names, so
    this holds by construction).
    """
    ctx = ctx or _DEFAULT
    ctx.qe_calls += 1
    deadline = time.monotonic() + ctx.qe_timeout
    if not _is_true(assumptions) and _quantified_names(f) & free_vars(assumptions):
        assumptions = TRUE  # assumption-driven rewrites would capture
    out = _eliminate_rec(f, ctx, deadline, assumptions)
    if S.is_propositional(out):
        out = arith.simplify(out, TRUE, full=False)
    return QEResult(out, exact=True, backend="internal-vs")


def _quantified_names(f: Formula) -> set[str]:
    out: set[str] = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, (Forall, Exists)):
            out.add(g.var)
            stack.append(g.body)
        elif isinstance(g, Not):
            stack.append(g.arg)
        elif isinstance(g, (And, Or, Imply, Equiv)):
            stack.append(g.left)
            stack.append(g.right)
    return out


def _eliminate_rec(f: Formula, ctx: Context, deadline: float,
                   assumptions: Formula) -> Formula:
    if isinstance(f, (BoolConst, Cmp)):
        return f
    if isinstance(f, Not):
        return Not(_eliminate_rec(f.arg, ctx, deadline, assumptions))
    if isinstance(f, (And, Or, Imply, Equiv)):
        return type(f)(_eliminate_rec(f.left, ctx, deadline, assumptions),
                       _eliminate_rec(f.right, ctx, deadline, assumptions))
    if isinstance(f, (Forall, Exists)):
        # gather the maximal same-kind block; same-kind quantifiers commute,
        # so the elimination order within it is a free performance choice
        kind = type(f)
        block: list[str] = []
        body: Formula = f
        while isinstance(body, kind):
            block.append(body.var)
            body = body.body
        body = _eliminate_rec(body, ctx, deadline, assumptions)
        ir = formula_to_ir(body)
        try:
            ir = arith.simplify_ir(ir, assumptions, full=ctx.simplify_full,
                                   oracle=None, deadline=deadline, strict=True)
            negate = kind is Forall
            if negate:
                ir = ir_negate(ir)
            remaining = list(block)
            while remaining:
                var = _pick_variable(remaining, ir)
                remaining.remove(var)
                ir = elim_exists_ir(var, ir, ctx, deadline)
                ir = arith.simplify_ir(ir, assumptions, full=ctx.simplify_full,
                                       oracle=None, deadline=deadline, strict=True)
            if negate:
                ir = ir_negate(ir)
                ir = arith.simplify_ir(ir, assumptions, full=ctx.simplify_full,
                                       oracle=None, deadline=deadline, strict=True)
        except arith.BudgetExceeded as exc:
            raise BackendTimeout(str(exc)) from exc
        return ir_to_formula(ir)


def _pick_variable(candidates: list[str], ir: IR) -> str:
    """Cheapest-first elimination: lowest degree, then fewest atoms."""
    best = None
    best_cost = None
    for var in candidates:
        deg = 0
        occurrences = 0
        for atom in ir_atoms(ir) if not isinstance(ir, bool) else ():
            d = atom.poly.degree_in(var)
            if d:
                occurrences += 1
                deg = max(deg, d)
        cost = (deg, occurrences, var)
        if best_cost is None or cost < best_cost:
            best, best_cost = var, cost
    return best
    if isinstance(f, (Box, Diamond)):
        raise ValueError("quantifier elimination expects first-order input, found a modality")
    raise TypeError(f"unknown formula {f!r}")


def is_valid(f: Formula, assumptions: Formula = TRUE,
             ctx: Optional[Context] = None) -> bool:
    """Whether assumptions -> f holds over the reals.

    Sound in one direction by construction: True is returned only on an
    exact certificate; timeouts and unknowns from an external backend count
    as not-valid.
    """
    ctx = ctx or _DEFAULT
    key = (S.structural_key(f), S.structural_key(assumptions))
    cached = ctx._valid_cache.get(key)
    if cached is not None:
        return cached
    # validity distributes over conjunction; the pieces are smaller and
    # benefit independently from assumption-relevance filtering
    if isinstance(f, And):
        verdict = all(is_valid(c, assumptions, ctx) for c in S.conjuncts(f))
        ctx._valid_cache[key] = verdict
        return verdict
    if isinstance(f, Imply) and isinstance(f.right, And) and S.is_propositional(f.left):
        stronger = And(assumptions, f.left) if not _is_true(assumptions) else f.left
        verdict = all(is_valid(c, stronger, ctx) for c in S.conjuncts(f.right))
        ctx._valid_cache[key] = verdict
        return verdict
    if isinstance(f, Equiv) and S.is_propositional(f):
        verdict = is_valid(Imply(f.left, f.right), assumptions, ctx) and \
            is_valid(Imply(f.right, f.left), assumptions, ctx)
        ctx._valid_cache[key] = verdict
        return verdict
    # case split on the antecedent: each disjunctive-normal-form clause is a
    # sign context that usually collapses the consequent; when the antecedent
    # is too disjunctive, case split the contrapositive instead
    if isinstance(f, Imply) and S.is_propositional(f):
        full_left = And(assumptions, f.left) if not _is_true(assumptions) else f.left
        split = None
        try:
            split = ("direct", arith.dnf_clauses(full_left, clause_budget=64))
        except (arith.SizeBlowup, ValueError, arith.DivisionByZeroLiteral):
            try:
                contra = And(assumptions, Not(f.right)) if not _is_true(assumptions) \
                    else Not(f.right)
                split = ("contra", arith.dnf_clauses(contra, clause_budget=64))
            except (arith.SizeBlowup, ValueError, arith.DivisionByZeroLiteral):
                split = None
        if split is not None and len(split[1]) > 1:
            mode, clauses = split
            goal_of = (lambda c: Imply(c, f.right)) if mode == "direct" \
                else (lambda c: Imply(c, Not(f.left)))
            verdict = True
            for clause in clauses:
                antecedent = S.conj([a.to_formula() for a in clause])
                if not is_valid(goal_of(antecedent), TRUE, ctx):
                    verdict = False
                    break
            ctx._valid_cache[key] = verdict
            return verdict
    if not _is_true(assumptions) and S.is_propositional(f):
        # pre-lower degrees with assumption sign knowledge; validity of
        # assumptions -> f only depends on f where the assumptions hold
        lowered = arith.simplify_ir(arith.formula_to_ir(f), assumptions,
                                    full=True, oracle=None)
        f = arith.ir_to_formula(lowered) if not isinstance(lowered, bool) \
            else (TRUE if lowered else S.FALSE)
    goal: Formula = Imply(assumptions, f) if not _is_true(assumptions) else f
    for var in sorted(free_vars(goal)):
        goal = Forall(var, goal)
    try:
        res = eliminate(goal, ctx)
        ir = formula_to_ir(res.formula)
        verdict = ir is True
    except DegreeTooHigh:
        if ctx.backend is None:
            raise
        verdict = _backend_valid(goal, ctx)
    ctx._valid_cache[key] = verdict
    return verdict


def _is_true(f: Formula) -> bool:
    return isinstance(f, BoolConst) and f.value


def check_equivalence(a: Formula, b: Formula, assumptions: Formula = TRUE,
                      ctx: Optional[Context] = None) -> bool:
    return is_valid(Equiv(a, b), assumptions, ctx)


def _backend_valid(goal: Formula, ctx: Context) -> bool:
    ctx.smt_calls += 1
    answer = ctx.backend.check_valid(goal, ctx.qe_timeout)
    if answer == "unsat":
        return True
    if answer == "unknown":
        ctx.notes.append("external backend answered unknown; treating as not valid")
    return False


# ---------------------------------------------------------------------------
# External SMT-LIB 2 backend (validity checks only)
# ---------------------------------------------------------------------------

class SmtBackend:
    """Subprocess speaking SMT-LIB 2 on stdin/stdout.

    The solver receives (set-logic NRA), Real declarations for every free
    symbol, the negated goal, and (check-sat); `unsat` certifies validity.
    """

    def __init__(self, command: str):
        self.command = shlex.split(command)

    def check_valid(self, goal: Formula, timeout: float) -> str:
        script = self.render_validity_script(goal)
        try:
            proc = subprocess.run(self.command, input=script, text=True,
                                  capture_output=True, timeout=timeout)
        except subprocess.TimeoutExpired as exc:
            raise BackendTimeout(f"{self.command[0]} timed out") from exc
        except OSError as exc:
            raise BackendTimeout(f"cannot run {self.command[0]}: {exc}") from exc
        for line in proc.stdout.splitlines():
            word = line.strip()
            if word in ("sat", "unsat", "unknown"):
                return word
        return "unknown"

    @staticmethod
    def render_validity_script(goal: Formula) -> str:
        decls = [f"(declare-const {v} Real)" for v in sorted(free_vars(goal))]
        body = smt_formula(Not(goal))
        lines = ["(set-logic NRA)", *decls, f"(assert {body})", "(check-sat)"]
        return "\n".join(lines) + "\n"


def smt_formula(f: Formula) -> str:
    if isinstance(f, BoolConst):
        return "true" if f.value else "false"
    if isinstance(f, Cmp):
        lhs, rhs = smt_term(f.left), smt_term(f.right)
        if f.op == "!=":
            return f"(not (= {lhs} {rhs}))"
        return f"({f.op} {lhs} {rhs})"
    if isinstance(f, Not):
        return f"(not {smt_formula(f.arg)})"
    if isinstance(f, And):
        return f"(and {smt_formula(f.left)} {smt_formula(f.right)})"
    if isinstance(f, Or):
        return f"(or {smt_formula(f.left)} {smt_formula(f.right)})"
    if isinstance(f, Imply):
        return f"(=> {smt_formula(f.left)} {smt_formula(f.right)})"
    if isinstance(f, Equiv):
        return f"(= {smt_formula(f.left)} {smt_formula(f.right)})"
    if isinstance(f, Forall):
        return f"(forall (({f.var} Real)) {smt_formula(f.body)})"
    if isinstance(f, Exists):
        return f"(exists (({f.var} Real)) {smt_formula(f.body)})"
    raise ValueError(f"cannot render {f!r} for SMT")


def smt_term(t: S.Term) -> str:
    if isinstance(t, S.Variable):
        return t.name
    if isinstance(t, S.Const):
        v = t.value
        if v < 0:
            return f"(- {smt_term(S.Const(-v))})"
        if v.denominator == 1:
            return str(v.numerator)
        return f"(/ {v.numerator} {v.denominator})"
    if isinstance(t, S.Neg):
        return f"(- {smt_term(t.arg)})"
    if isinstance(t, S.Add):
        return f"(+ {smt_term(t.left)} {smt_term(t.right)})"
    if isinstance(t, S.Sub):
        return f"(- {smt_term(t.left)} {smt_term(t.right)})"
    if isinstance(t, S.Mul):
        return f"(* {smt_term(t.left)} {smt_term(t.right)})"
    if isinstance(t, S.Div):
        return f"(/ {smt_term(t.left)} {smt_term(t.right)})"
    if isinstance(t, S.Pow):
        if t.exp == 0:
            return "1"
        inner = smt_term(t.base)
        return inner if t.exp == 1 else "(* " + " ".join([inner] * t.exp) + ")"
    raise ValueError(f"cannot render {t!r} for SMT")
