"""The reduction oracle: loop-free game-logic formulas to quantifier-free
real-arithmetic, with an exactness flag.

The compilation is the usual modality calculus, applied innermost-first with
eager simplification after every rule:

    [a; b]P        -> reduce over a of the reduction of [b]P (inner
                      reduction under trivial assumptions)
    [a ++ b]P      -> [a]P /\ [b]P          <a ++ b>P -> <a>P \/ <b>P
    [x := e]P      -> P{e/x}, simplified
    [x := *]P      -> forall x P, eliminated   (dually exists for diamond)
    [?q]P          -> q -> P                <?q>P -> q /\ P
    [ODE & Q]P     -> continuous reduction (solvable closed forms, or the
                      invariant/conserved-hint certificate, flagged inexact)
    [a^d]P         -> <a>P                  <a^d>P -> [a]P

The exactness flag is the conjunction of the continuous steps' flags: when
true the result is equivalent to the input under the assumptions; when false
it merely implies it.  Inexact subresults are only sound in positive
positions, so in negative positions (under negation or on the left of an
implication) an inexact branch collapses to the trivially sound bound
instead.  Degree overflows from quantifier elimination also collapse the
offending branch to the sound bound, flagged inexact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import arith, ode, qe, syntax as S
from .qe import BackendTimeout, Context, DegreeTooHigh
from .syntax import (
    And, Assign, AssignAny, BoolConst, Box, Choice, Cmp, Diamond, Dual,
    Equiv, Exists, Forall, Formula, HybridGame, Imply, Loop, Not, ODE, Or,
    Seq, TRUE, FALSE, Term, Test,
)


class LoopInInput(Exception):
    pass


@dataclass
class ReduceResult:
    formula: Formula
    exact: bool


def reduce(f: Formula, assumptions: Formula = TRUE,
           ctx: Optional[Context] = None,
           hints: tuple[Formula, ...] = (),
           conserved: tuple[Term, ...] = ()) -> ReduceResult:
    """Compile a loop-free formula to propositional arithmetic."""
    ctx = ctx or Context()
    key = (S.structural_key(f), S.structural_key(assumptions),
           tuple(S.structural_key(h) for h in hints),
           tuple(S.structural_key(c) for c in conserved))
    cached = ctx._reduce_cache.get(key)
    if cached is not None:
        return cached
    result = _reduce(f, assumptions, ctx, hints, conserved, positive=True)
    final = ctx.simplify(result.formula, assumptions)
    result = ReduceResult(final, result.exact)
    if ctx.record_reduces:
        ctx.reduce_log.append((f, assumptions, result))
    ctx._reduce_cache[key] = result
    return result


def _bottom(positive: bool) -> ReduceResult:
    return ReduceResult(FALSE if positive else TRUE, False)


def _reduce(f: Formula, A: Formula, ctx: Context, hints, conserved,
            positive: bool) -> ReduceResult:
    if S.is_propositional(f):
        return ReduceResult(ctx.simplify(f, A), True)
    if isinstance(f, (Box, Diamond)):
        return _reduce_modal(isinstance(f, Box), f.game, f.body, A, ctx,
                             hints, conserved, positive)
    if isinstance(f, (And, Or)):
        r1 = _reduce(f.left, A, ctx, hints, conserved, positive)
        r2 = _reduce(f.right, A, ctx, hints, conserved, positive)
        out = type(f)(r1.formula, r2.formula)
        return ReduceResult(ctx.simplify(out, A), r1.exact and r2.exact)
    if isinstance(f, Not):
        r = _reduce(f.arg, A, ctx, hints, conserved, not positive)
        return ReduceResult(ctx.simplify(Not(r.formula), A), r.exact)
    if isinstance(f, Imply):
        r1 = _reduce(f.left, A, ctx, hints, conserved, not positive)
        r2 = _reduce(f.right, A, ctx, hints, conserved, positive)
        return ReduceResult(ctx.simplify(Imply(r1.formula, r2.formula), A),
                            r1.exact and r2.exact)
    if isinstance(f, Equiv):
        expanded = And(Imply(f.left, f.right), Imply(f.right, f.left))
        return _reduce(expanded, A, ctx, hints, conserved, positive)
    if isinstance(f, (Forall, Exists)):
        r = _reduce(f.body, A, ctx, hints, conserved, positive)
        quantified = type(f)(f.var, r.formula)
        try:
            out = qe.eliminate(quantified, ctx, A).formula
        except (DegreeTooHigh, BackendTimeout):
            return _bottom(positive)
        return ReduceResult(ctx.simplify(out, A), r.exact)
    raise TypeError(f"unknown formula {f!r}")


def _reduce_modal(is_box: bool, game: HybridGame, post: Formula, A: Formula,
                  ctx: Context, hints, conserved, positive: bool) -> ReduceResult:
    exact = True
    if not S.is_propositional(post):
        inner = _reduce(post, TRUE, ctx, hints, conserved, positive)
        post = inner.formula
        exact = inner.exact

    if isinstance(game, Loop):
        raise LoopInInput("reduce expects a loop-free game")
    if isinstance(game, Dual):
        r = _reduce_modal(not is_box, game.body, post, A, ctx, hints,
                          conserved, positive)
        return ReduceResult(r.formula, r.exact and exact)
    if isinstance(game, Seq):
        inner_modal = (Box if is_box else Diamond)(game.second, post)
        ikey = ("inner", S.structural_key(inner_modal), positive,
                tuple(S.structural_key(h) for h in hints),
                tuple(S.structural_key(c) for c in conserved))
        r_inner = ctx._reduce_cache.get(ikey)
        if r_inner is None:
            r_inner = _reduce(inner_modal, TRUE, ctx, hints, conserved, positive)
            ctx._reduce_cache[ikey] = r_inner
        r_outer = _reduce_modal(is_box, game.first, r_inner.formula, A, ctx,
                                hints, conserved, positive)
        return ReduceResult(r_outer.formula,
                            exact and r_inner.exact and r_outer.exact)
    if isinstance(game, Choice):
        r1 = _reduce_modal(is_box, game.left, post, A, ctx, hints, conserved, positive)
        r2 = _reduce_modal(is_box, game.right, post, A, ctx, hints, conserved, positive)
        combined = (And if is_box else Or)(r1.formula, r2.formula)
        return ReduceResult(ctx.simplify(combined, A),
                            exact and r1.exact and r2.exact)
    if isinstance(game, Assign):
        out = S.substitute(post, game.var, game.term)
        return ReduceResult(ctx.simplify(out, A), exact)
    if isinstance(game, AssignAny):
        quantified = (Forall if is_box else Exists)(game.var, post)
        try:
            out = qe.eliminate(quantified, ctx, A).formula
        except (DegreeTooHigh, BackendTimeout):
            return _bottom(positive)
        return ReduceResult(ctx.simplify(out, A), exact)
    if isinstance(game, Test):
        out = Imply(game.cond, post) if is_box else And(game.cond, post)
        return ReduceResult(ctx.simplify(out, A), exact)
    if isinstance(game, ODE):
        system = ode.OdeSystem.of(game)
        try:
            formula, ode_exact = ode.odereduce(
                "box" if is_box else "diamond", system, post, A, ctx,
                hints=hints, conserved=conserved)
        except (DegreeTooHigh, BackendTimeout):
            return _bottom(positive)
        except ode.HintNotInvariant:
            raise
        return ReduceResult(ctx.simplify(formula, TRUE), exact and ode_exact)
    raise TypeError(f"unknown game {game!r}")
