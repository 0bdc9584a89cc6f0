"""Closed-form ODE solving and the continuous-dynamics reduction oracle.

Solvable systems are integrator chains: in some topological order every
right-hand side is polynomial in strictly earlier evolved variables plus
symbols the system never writes.  Those admit exact polynomial solutions in
the duration, obtained by integrating along the order, and the box/diamond
modality over the ODE turns into a quantified arithmetic formula that the
quantifier-elimination engine discharges:

    [ODE & Q] P   ->  forall t (A(t) /\ t >= 0 /\ forall 0<=s<=t Q(s)) -> P(t)
    <ODE & Q> P   ->  exists t (A(t) /\ t >= 0 /\ forall 0<=s<=t Q(s)) /\ P(t)

where F(t) substitutes the closed-form solutions at time t.

Non-solvable systems fall back to user-supplied certificates:

  * invariant formula hints (conjunctions of p >= 0 / p > 0 / p = 0 atoms),
    each verified by a Lie-derivative sign condition or by Darboux
    divisibility (L(p) = g * p for a polynomial cofactor g);
  * conserved quantities (terms with identically zero Lie derivative), used
    as equality links between the initial state and a universally
    quantified evolved copy.

The box reduction then returns D /\ QE(forall copy (links /\ D' /\ Q' -> P')),
which entails the modality but is flagged inexact.  Diamond modalities over
non-solvable dynamics reduce to false (a sound under-approximation).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from . import arith, qe, syntax as S
from .arith import Poly, term_to_poly
from .qe import Context
from .syntax import (
    And, Cmp, Exists, Forall, Formula, Imply, TRUE, Term, Variable, conj,
    free_vars,
)


class NotSolvable(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class HintNotInvariant(Exception):
    pass


@dataclass(frozen=True)
class OdeSystem:
    equations: tuple[tuple[str, Term], ...]
    domain: Formula

    def evolved(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.equations)

    @staticmethod
    def of(game: S.ODE) -> "OdeSystem":
        return OdeSystem(game.equations, game.domain)


@dataclass
class ClosedFormSolution:
    duration_var: str
    solutions: dict[str, Poly]  # polynomials over initial values and the duration

    def term(self, var: str) -> Term:
        return self.solutions[var].to_term()

    def at(self, var: str, duration: Poly) -> Poly:
        return self.solutions[var].subst(self.duration_var, duration)


def solve(system: OdeSystem, duration_var: str = "s~dur") -> ClosedFormSolution:
    """Exact polynomial solution of an integrator-chain system."""
    evolved = set(system.evolved())
    rhs_polys: dict[str, Poly] = {}
    for var, rhs in system.equations:
        try:
            rhs_polys[var] = term_to_poly(rhs)
        except ValueError as exc:
            raise NotSolvable(f"right-hand side of {var}' is not polynomial: {exc}") from exc
    deps = {var: rhs_polys[var].variables() & evolved for var in rhs_polys}
    order: list[str] = []
    placed: set[str] = set()
    pending = list(system.evolved())
    while pending:
        progressed = False
        remaining = []
        for var in pending:
            if deps[var] <= placed:
                order.append(var)
                placed.add(var)
                progressed = True
            else:
                remaining.append(var)
        if not progressed:
            raise NotSolvable(
                f"cyclic dependency among {{{', '.join(sorted(remaining))}}}; "
                "not an integrator chain")
        pending = remaining
    sols: dict[str, Poly] = {}
    for var in order:
        integrand = rhs_polys[var]
        for dep in deps[var]:
            integrand = integrand.subst(dep, sols[dep])
        sols[var] = Poly.var(var) + _integrate(integrand, duration_var)
    return ClosedFormSolution(duration_var, sols)


def _integrate(p: Poly, var: str) -> Poly:
    out: dict = {}
    for mono, coeff in p.terms.items():
        entries = dict(mono)
        e = entries.get(var, 0)
        entries[var] = e + 1
        out_mono = tuple(sorted(entries.items()))
        prev = out.get(out_mono, 0)
        out[out_mono] = prev + Fraction(coeff) / (e + 1)
    return Poly({m: arith._coeff(c) for m, c in out.items() if c})


def _subst_state(f: Formula, sol: ClosedFormSolution, duration: Poly) -> Formula:
    """Replace every evolved variable in f by its solution at the duration.

    Simultaneous: solutions mention other evolved variables as initial
    values, which must not be rewritten in turn.
    """
    evolved = [v for v in sol.solutions if v in free_vars(f)]
    if not evolved:
        return f
    temp = {v: f"{v}{S.RESERVED_SEP}init" for v in evolved}
    out = S.rename_vars(f, temp)
    for v in evolved:
        out = S.substitute(out, temp[v], sol.at(v, duration).to_term())
    return out


def odereduce(modality: str, system: OdeSystem, post: Formula,
              assumptions: Formula = TRUE, ctx: Optional[Context] = None,
              hints: tuple[Formula, ...] = (),
              conserved: tuple[Term, ...] = ()) -> tuple[Formula, bool]:
    """Reduce a box or diamond ODE modality to propositional arithmetic.

    Returns (formula, exact).  ``modality`` is "box" or "diamond".
    """
    assert modality in ("box", "diamond")
    ctx = ctx or Context()
    try:
        sol = solve(system, ctx.fresh("s"))
    except NotSolvable:
        if modality == "box" and (hints or conserved):
            return hint_strengthen(hints, system, post, ctx, conserved=conserved,
                                   assumptions=assumptions)
        # sound under-approximation: claim nothing
        return S.FALSE, False
    t_var = ctx.fresh("t")
    s_var = ctx.fresh("u")
    t = Poly.var(t_var)
    parts: list[Formula] = []
    if not _is_trivially_true(assumptions):
        parts.append(_subst_state(assumptions, sol, t))
    parts.append(Cmp(">=", Variable(t_var), S.ZERO))
    if not _is_trivially_true(system.domain):
        inner = Imply(And(Cmp(">=", Variable(s_var), S.ZERO),
                          Cmp("<=", Variable(s_var), Variable(t_var))),
                      _subst_state(system.domain, sol, Poly.var(s_var)))
        parts.append(Forall(s_var, inner))
    antecedent = conj(parts)
    post_at_t = _subst_state(post, sol, t)
    if modality == "box":
        quantified: Formula = Forall(t_var, Imply(antecedent, post_at_t))
    else:
        quantified = Exists(t_var, And(antecedent, post_at_t))
    res = qe.eliminate(quantified, ctx, assumptions)
    return res.formula, res.exact


def _is_trivially_true(f: Formula) -> bool:
    return isinstance(f, S.BoolConst) and f.value


# ---------------------------------------------------------------------------
# Differential-invariant hints and conserved quantities
# ---------------------------------------------------------------------------

def lie_derivative(p: Poly, system: OdeSystem) -> Poly:
    out = Poly({})
    for var, rhs in system.equations:
        out = out + p.derivative(var) * term_to_poly(rhs)
    return out


def _check_invariant_hint(hint: Formula, system: OdeSystem, ctx: Context,
                          established: list[Formula]) -> None:
    """Reject hints that are not differential invariants of the system."""
    context = conj([system.domain, *established, hint])
    for atom in S.conjuncts(hint):
        if isinstance(atom, S.BoolConst):
            if not atom.value:
                raise HintNotInvariant("hint contains the literal false")
            continue
        if not isinstance(atom, Cmp):
            raise HintNotInvariant(
                f"hints must be conjunctions of atoms, found {type(atom).__name__}")
        if atom.op in ("!=", "<", "<="):
            p = term_to_poly(S.Sub(atom.right, atom.left))
            op = {"<": ">", "<=": ">=", "!=": "!="}[atom.op]
        else:
            p = term_to_poly(S.Sub(atom.left, atom.right))
            op = atom.op
        lie = lie_derivative(p, system)
        if lie.is_zero():
            continue
        cofactor = lie.exact_div(p)
        if cofactor is not None:
            # Darboux: L(p) = g*p keeps the sign of p along the flow
            continue
        if op in (">", ">="):
            cond = Cmp(">=", lie.to_term(), S.ZERO)
        elif op == "=":
            cond = Cmp("=", lie.to_term(), S.ZERO)
        else:
            raise HintNotInvariant(
                f"unsupported hint atom {atom.op!r} (use >=, >, or =)")
        try:
            if not qe.is_valid(cond, context, ctx):
                raise HintNotInvariant(
                    f"hint atom is not preserved along the flow: "
                    f"Lie derivative sign condition failed")
        except qe.DegreeTooHigh as exc:
            raise HintNotInvariant(
                f"cannot certify hint atom (degree too high: {exc})") from exc


def _check_conserved(term: Term, system: OdeSystem) -> Poly:
    p = term_to_poly(term)
    lie = lie_derivative(p, system)
    if not lie.is_zero():
        raise HintNotInvariant(
            f"conserved-quantity candidate has nonzero Lie derivative")
    return p


def hint_strengthen(hints, system: OdeSystem, post: Formula,
                    ctx: Optional[Context] = None,
                    conserved=(), assumptions: Formula = TRUE) -> tuple[Formula, bool]:
    """Certificate-based precondition for a box ODE modality.

    Returns (D /\ D1, exact=False) where D is the conjunction of accepted
    invariant hints and D1 eliminates a universally quantified copy of the
    evolved variables constrained by D, the domain, and the conserved-value
    links; the result entails the box postcondition by construction.
    """
    ctx = ctx or Context()
    hints = tuple(hints)
    conserved = tuple(conserved)
    established: list[Formula] = []
    for hint in hints:
        _check_invariant_hint(hint, system, ctx, established)
        established.append(hint)
    conserved_polys = [_check_conserved(e, system) for e in conserved]
    evolved = list(system.evolved())
    copies = {var: ctx.fresh(var) for var in evolved}
    rename = dict(copies)

    def at_copy(f: Formula) -> Formula:
        return S.rename_vars(f, rename)

    links: list[Formula] = []
    for p in conserved_polys:
        copy_p = p
        for var, twin in copies.items():
            copy_p = copy_p.subst(var, Poly.var(twin))
        links.append(Cmp("=", copy_p.to_term(), p.to_term()))
    hypotheses = conj([*links,
                       *[at_copy(h) for h in hints],
                       at_copy(system.domain)])
    core: Formula = Imply(hypotheses, at_copy(post))
    for var in sorted(copies.values()):
        core = Forall(var, core)
    d1 = qe.eliminate(core, ctx, assumptions).formula
    return And(conj(hints), d1) if hints else d1, False
