"""Syntax trees for terms, first-order real-arithmetic formulas, and hybrid games.

All nodes are immutable (frozen dataclasses), hashable, and compared
structurally, so they are safe to share between threads and to use as cache
keys.  Variables are plain strings; names containing ``~`` are reserved for
machine-generated symbols (tagged twins ``x~1``/``x~2`` and fresh quantifier
variables like ``s~3``) and are rejected by the concrete-syntax parser, which
guarantees they can never collide with user input.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Union

RESERVED_SEP = "~"


class TagCollision(Exception):
    """A tagged twin name already occurs in the renamed object."""


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

class Term:
    __slots__ = ()

    def __add__(self, other: Term) -> Term:
        return Add(self, other)

    def __sub__(self, other: Term) -> Term:
        return Sub(self, other)

    def __mul__(self, other: Term) -> Term:
        return Mul(self, other)

    def __neg__(self) -> Term:
        return Neg(self)


@dataclass(frozen=True, slots=True)
class Variable(Term):
    name: str


@dataclass(frozen=True, slots=True)
class Const(Term):
    value: Fraction

    def __post_init__(self) -> None:
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True, slots=True)
class Neg(Term):
    arg: Term


@dataclass(frozen=True, slots=True)
class Add(Term):
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class Sub(Term):
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class Mul(Term):
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class Div(Term):
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class Pow(Term):
    base: Term
    exp: int

    def __post_init__(self) -> None:
        if self.exp < 0:
            raise ValueError("Pow exponent must be a nonnegative integer")


def num(value) -> Const:
    """Exact rational constant from an int, Fraction, or numeric string."""
    return Const(Fraction(value))


ZERO = num(0)
ONE = num(1)


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------

class Formula:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class BoolConst(Formula):
    value: bool


TRUE = BoolConst(True)
FALSE = BoolConst(False)

CMP_OPS = ("<", "<=", "=", ">=", ">", "!=")


@dataclass(frozen=True, slots=True)
class Cmp(Formula):
    op: str
    left: Term
    right: Term

    def __post_init__(self) -> None:
        if self.op not in CMP_OPS:
            raise ValueError(f"unknown comparison operator {self.op!r}")


@dataclass(frozen=True, slots=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True, slots=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Imply(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Equiv(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Forall(Formula):
    var: str
    body: Formula


@dataclass(frozen=True, slots=True)
class Exists(Formula):
    var: str
    body: Formula


@dataclass(frozen=True, slots=True)
class Box(Formula):
    game: "HybridGame"
    body: Formula


@dataclass(frozen=True, slots=True)
class Diamond(Formula):
    game: "HybridGame"
    body: Formula


def conj(formulas: Iterable[Formula]) -> Formula:
    """Right-nested conjunction; empty iterable gives true."""
    items = [f for f in formulas]
    if not items:
        return TRUE
    out = items[-1]
    for f in reversed(items[:-1]):
        out = And(f, out)
    return out


def disj(formulas: Iterable[Formula]) -> Formula:
    items = [f for f in formulas]
    if not items:
        return FALSE
    out = items[-1]
    for f in reversed(items[:-1]):
        out = Or(f, out)
    return out


# ---------------------------------------------------------------------------
# Hybrid games
# ---------------------------------------------------------------------------

class HybridGame:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Assign(HybridGame):
    var: str
    term: Term


@dataclass(frozen=True, slots=True)
class AssignAny(HybridGame):
    var: str


@dataclass(frozen=True, slots=True)
class Test(HybridGame):
    cond: Formula


@dataclass(frozen=True, slots=True)
class ODE(HybridGame):
    equations: tuple[tuple[str, Term], ...]
    domain: Formula


@dataclass(frozen=True, slots=True)
class Seq(HybridGame):
    first: HybridGame
    second: HybridGame


@dataclass(frozen=True, slots=True)
class Choice(HybridGame):
    left: HybridGame
    right: HybridGame


@dataclass(frozen=True, slots=True)
class Loop(HybridGame):
    body: HybridGame


@dataclass(frozen=True, slots=True)
class Dual(HybridGame):
    body: HybridGame


def seq(games: Iterable[HybridGame]) -> HybridGame:
    items = list(games)
    if not items:
        return Test(TRUE)
    out = items[-1]
    for g in reversed(items[:-1]):
        out = Seq(g, out)
    return out


def choice(games: Iterable[HybridGame]) -> HybridGame:
    items = list(games)
    if not items:
        raise ValueError("choice over an empty list of games")
    out = items[-1]
    for g in reversed(items[:-1]):
        out = Choice(g, out)
    return out


def dchoice(games: Iterable[HybridGame]) -> HybridGame:
    """Demonic choice, encoded as the dual of an angelic choice of duals."""
    items = list(games)
    if len(items) == 1:
        return items[0]
    return Dual(choice([Dual(g) for g in items]))


def bounded_repeat(game: HybridGame, n: int, demonic: bool = False) -> HybridGame:
    """At most ``n`` rounds of ``game``: nested (de)monic choices of stop/go."""
    out: HybridGame = Test(TRUE)
    mk = dchoice if demonic else lambda gs: choice(gs)
    for _ in range(n):
        out = mk([Test(TRUE), Seq(game, out)])
    return out


# ---------------------------------------------------------------------------
# Variable sets
# ---------------------------------------------------------------------------

VariableSet = frozenset
Node = Union[Term, Formula, HybridGame]


def free_vars(node: Node) -> frozenset[str]:
    """Free variables, with must-bound removal across game modalities."""
    if isinstance(node, Term):
        return _term_vars(node)
    if isinstance(node, Formula):
        return _formula_free(node)
    if isinstance(node, HybridGame):
        return _game_free(node)[0]
    raise TypeError(f"free_vars: unsupported node {node!r}")


def _term_vars(t: Term) -> frozenset[str]:
    if isinstance(t, Variable):
        return frozenset((t.name,))
    if isinstance(t, Const):
        return frozenset()
    if isinstance(t, Neg):
        return _term_vars(t.arg)
    if isinstance(t, (Add, Sub, Mul, Div)):
        return _term_vars(t.left) | _term_vars(t.right)
    if isinstance(t, Pow):
        return _term_vars(t.base)
    raise TypeError(f"unknown term {t!r}")


def _formula_free(f: Formula) -> frozenset[str]:
    if isinstance(f, BoolConst):
        return frozenset()
    if isinstance(f, Cmp):
        return _term_vars(f.left) | _term_vars(f.right)
    if isinstance(f, Not):
        return _formula_free(f.arg)
    if isinstance(f, (And, Or, Imply, Equiv)):
        return _formula_free(f.left) | _formula_free(f.right)
    if isinstance(f, (Forall, Exists)):
        return _formula_free(f.body) - {f.var}
    if isinstance(f, (Box, Diamond)):
        game_free, must_bound = _game_free(f.game)
        return game_free | (_formula_free(f.body) - must_bound)
    raise TypeError(f"unknown formula {f!r}")


def _game_free(g: HybridGame) -> tuple[frozenset[str], frozenset[str]]:
    """Returns (free variables, must-bound variables) of a game."""
    if isinstance(g, Assign):
        return _term_vars(g.term), frozenset((g.var,))
    if isinstance(g, AssignAny):
        return frozenset(), frozenset((g.var,))
    if isinstance(g, Test):
        return _formula_free(g.cond), frozenset()
    if isinstance(g, ODE):
        # Evolved variables are read (initial values matter), hence free.
        fv = _formula_free(g.domain)
        for var, rhs in g.equations:
            fv = fv | {var} | _term_vars(rhs)
        return fv, frozenset()
    if isinstance(g, Seq):
        fv1, mb1 = _game_free(g.first)
        fv2, mb2 = _game_free(g.second)
        return fv1 | (fv2 - mb1), mb1 | mb2
    if isinstance(g, Choice):
        fv1, mb1 = _game_free(g.left)
        fv2, mb2 = _game_free(g.right)
        return fv1 | fv2, mb1 & mb2
    if isinstance(g, Loop):
        fv, _ = _game_free(g.body)
        return fv, frozenset()
    if isinstance(g, Dual):
        return _game_free(g.body)
    raise TypeError(f"unknown game {g!r}")


def bound_vars(g: HybridGame) -> frozenset[str]:
    """Variables written anywhere in the game (assigned or evolved)."""
    if isinstance(g, (Assign, AssignAny)):
        return frozenset((g.var,))
    if isinstance(g, Test):
        return frozenset()
    if isinstance(g, ODE):
        return frozenset(var for var, _ in g.equations)
    if isinstance(g, (Seq, Choice)):
        a, b = (g.first, g.second) if isinstance(g, Seq) else (g.left, g.right)
        return bound_vars(a) | bound_vars(b)
    if isinstance(g, (Loop, Dual)):
        return bound_vars(g.body)
    raise TypeError(f"unknown game {g!r}")


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------

def substitute_term(t: Term, var: str, replacement: Term) -> Term:
    if isinstance(t, Variable):
        return replacement if t.name == var else t
    if isinstance(t, Const):
        return t
    if isinstance(t, Neg):
        return Neg(substitute_term(t.arg, var, replacement))
    if isinstance(t, Add):
        return Add(substitute_term(t.left, var, replacement), substitute_term(t.right, var, replacement))
    if isinstance(t, Sub):
        return Sub(substitute_term(t.left, var, replacement), substitute_term(t.right, var, replacement))
    if isinstance(t, Mul):
        return Mul(substitute_term(t.left, var, replacement), substitute_term(t.right, var, replacement))
    if isinstance(t, Div):
        return Div(substitute_term(t.left, var, replacement), substitute_term(t.right, var, replacement))
    if isinstance(t, Pow):
        return Pow(substitute_term(t.base, var, replacement), t.exp)
    raise TypeError(f"unknown term {t!r}")


def _fresh_like(name: str, avoid: frozenset[str]) -> str:
    i = 0
    while True:
        candidate = f"{name}{RESERVED_SEP}r{i}"
        if candidate not in avoid:
            return candidate
        i += 1


def substitute(f: Formula, var: str, replacement: Term) -> Formula:
    """Capture-avoiding substitution of ``replacement`` for free ``var``.

    Quantifiers are alpha-renamed when they would capture; game modalities
    whose game writes ``var`` are left untouched (their occurrences of ``var``
    are bound by the game).
    """
    if isinstance(f, BoolConst):
        return f
    if isinstance(f, Cmp):
        return Cmp(f.op, substitute_term(f.left, var, replacement), substitute_term(f.right, var, replacement))
    if isinstance(f, Not):
        return Not(substitute(f.arg, var, replacement))
    if isinstance(f, (And, Or, Imply, Equiv)):
        ctor = type(f)
        return ctor(substitute(f.left, var, replacement), substitute(f.right, var, replacement))
    if isinstance(f, (Forall, Exists)):
        ctor = type(f)
        if f.var == var:
            return f
        if f.var in _term_vars(replacement) and var in _formula_free(f.body):
            fresh = _fresh_like(f.var, _formula_free(f.body) | _term_vars(replacement) | {var})
            body = substitute(f.body, f.var, Variable(fresh))
            return ctor(fresh, substitute(body, var, replacement))
        return ctor(f.var, substitute(f.body, var, replacement))
    if isinstance(f, (Box, Diamond)):
        ctor = type(f)
        if var not in _formula_free(f):
            return f
        if var in bound_vars(f.game):
            # Bound occurrences stay untouched; a game cannot be renamed the
            # way a quantifier can, and no engine path substitutes into one.
            return f
        return ctor(_substitute_game(f.game, var, replacement), substitute(f.body, var, replacement))
    raise TypeError(f"unknown formula {f!r}")


def _substitute_game(g: HybridGame, var: str, replacement: Term) -> HybridGame:
    if isinstance(g, Assign):
        return Assign(g.var, substitute_term(g.term, var, replacement))
    if isinstance(g, AssignAny):
        return g
    if isinstance(g, Test):
        return Test(substitute(g.cond, var, replacement))
    if isinstance(g, ODE):
        eqs = tuple((v, substitute_term(rhs, var, replacement)) for v, rhs in g.equations)
        return ODE(eqs, substitute(g.domain, var, replacement))
    if isinstance(g, Seq):
        return Seq(_substitute_game(g.first, var, replacement), _substitute_game(g.second, var, replacement))
    if isinstance(g, Choice):
        return Choice(_substitute_game(g.left, var, replacement), _substitute_game(g.right, var, replacement))
    if isinstance(g, Loop):
        return Loop(_substitute_game(g.body, var, replacement))
    if isinstance(g, Dual):
        return Dual(_substitute_game(g.body, var, replacement))
    raise TypeError(f"unknown game {g!r}")


# ---------------------------------------------------------------------------
# Tag renaming (doubled systems)
# ---------------------------------------------------------------------------

def tagged_name(name: str, tag: int) -> str:
    return f"{name}{RESERVED_SEP}{tag}"


def all_names(node: Node) -> frozenset[str]:
    """Every variable name occurring in the node, bound or free."""
    if isinstance(node, Term):
        return _term_vars(node)
    if isinstance(node, Formula):
        if isinstance(node, BoolConst):
            return frozenset()
        if isinstance(node, Cmp):
            return _term_vars(node.left) | _term_vars(node.right)
        if isinstance(node, Not):
            return all_names(node.arg)
        if isinstance(node, (And, Or, Imply, Equiv)):
            return all_names(node.left) | all_names(node.right)
        if isinstance(node, (Forall, Exists)):
            return all_names(node.body) | {node.var}
        if isinstance(node, (Box, Diamond)):
            return all_names(node.game) | all_names(node.body)
    if isinstance(node, HybridGame):
        if isinstance(node, Assign):
            return {node.var} | _term_vars(node.term)
        if isinstance(node, AssignAny):
            return frozenset((node.var,))
        if isinstance(node, Test):
            return all_names(node.cond)
        if isinstance(node, ODE):
            out = all_names(node.domain)
            for var, rhs in node.equations:
                out = out | {var} | _term_vars(rhs)
            return out
        if isinstance(node, Seq):
            return all_names(node.first) | all_names(node.second)
        if isinstance(node, Choice):
            return all_names(node.left) | all_names(node.right)
        if isinstance(node, (Loop, Dual)):
            return all_names(node.body)
    raise TypeError(f"all_names: unsupported node {node!r}")


def tag_rename(node: Node, vars: Iterable[str], tag: int):
    """Rename every occurrence (read or write) of each variable to its tagged twin."""
    names = frozenset(vars)
    if not names:
        return node
    mapping = {v: tagged_name(v, tag) for v in names}
    present = all_names(node)
    for twin in mapping.values():
        if twin in present:
            raise TagCollision(f"tagged name {twin} already occurs")
    return _rename(node, mapping)


def rename_vars(node: Node, mapping: dict[str, str]):
    """Unchecked simultaneous variable renaming (reads and writes alike)."""
    return _rename(node, mapping)


def _rename(node: Node, m: dict[str, str]):
    if isinstance(node, Term):
        if isinstance(node, Variable):
            return Variable(m.get(node.name, node.name))
        if isinstance(node, Const):
            return node
        if isinstance(node, Neg):
            return Neg(_rename(node.arg, m))
        if isinstance(node, (Add, Sub, Mul, Div)):
            return type(node)(_rename(node.left, m), _rename(node.right, m))
        if isinstance(node, Pow):
            return Pow(_rename(node.base, m), node.exp)
    if isinstance(node, Formula):
        if isinstance(node, BoolConst):
            return node
        if isinstance(node, Cmp):
            return Cmp(node.op, _rename(node.left, m), _rename(node.right, m))
        if isinstance(node, Not):
            return Not(_rename(node.arg, m))
        if isinstance(node, (And, Or, Imply, Equiv)):
            return type(node)(_rename(node.left, m), _rename(node.right, m))
        if isinstance(node, (Forall, Exists)):
            return type(node)(m.get(node.var, node.var), _rename(node.body, m))
        if isinstance(node, (Box, Diamond)):
            return type(node)(_rename(node.game, m), _rename(node.body, m))
    if isinstance(node, HybridGame):
        if isinstance(node, Assign):
            return Assign(m.get(node.var, node.var), _rename(node.term, m))
        if isinstance(node, AssignAny):
            return AssignAny(m.get(node.var, node.var))
        if isinstance(node, Test):
            return Test(_rename(node.cond, m))
        if isinstance(node, ODE):
            eqs = tuple((m.get(v, v), _rename(rhs, m)) for v, rhs in node.equations)
            return ODE(eqs, _rename(node.domain, m))
        if isinstance(node, Seq):
            return Seq(_rename(node.first, m), _rename(node.second, m))
        if isinstance(node, Choice):
            return Choice(_rename(node.left, m), _rename(node.right, m))
        if isinstance(node, Loop):
            return Loop(_rename(node.body, m))
        if isinstance(node, Dual):
            return Dual(_rename(node.body, m))
    raise TypeError(f"rename: unsupported node {node!r}")


# ---------------------------------------------------------------------------
# Structural utilities
# ---------------------------------------------------------------------------

def node_count(node: Node) -> int:
    """Number of AST nodes; the size measure used by the simplifier."""
    if isinstance(node, (Variable, Const, BoolConst, AssignAny)):
        return 1
    if isinstance(node, (Neg, Not, Loop, Dual)):
        inner = node.arg if isinstance(node, (Neg, Not)) else node.body
        return 1 + node_count(inner)
    if isinstance(node, (Add, Sub, Mul, Div)):
        return 1 + node_count(node.left) + node_count(node.right)
    if isinstance(node, Pow):
        return 1 + node_count(node.base)
    if isinstance(node, Cmp):
        return 1 + node_count(node.left) + node_count(node.right)
    if isinstance(node, (And, Or, Imply, Equiv)):
        return 1 + node_count(node.left) + node_count(node.right)
    if isinstance(node, (Forall, Exists)):
        return 1 + node_count(node.body)
    if isinstance(node, (Box, Diamond)):
        return 1 + node_count(node.game) + node_count(node.body)
    if isinstance(node, Assign):
        return 1 + node_count(node.term)
    if isinstance(node, Test):
        return 1 + node_count(node.cond)
    if isinstance(node, ODE):
        return 1 + sum(1 + node_count(rhs) for _, rhs in node.equations) + node_count(node.domain)
    if isinstance(node, Seq):
        return 1 + node_count(node.first) + node_count(node.second)
    if isinstance(node, Choice):
        return 1 + node_count(node.left) + node_count(node.right)
    raise TypeError(f"node_count: unsupported node {node!r}")


def is_propositional(f: Formula) -> bool:
    """No quantifier and no modality anywhere."""
    if isinstance(f, (BoolConst, Cmp)):
        return True
    if isinstance(f, Not):
        return is_propositional(f.arg)
    if isinstance(f, (And, Or, Imply, Equiv)):
        return is_propositional(f.left) and is_propositional(f.right)
    return False


def is_first_order(f: Formula) -> bool:
    """No modality (quantifiers allowed)."""
    if isinstance(f, (BoolConst, Cmp)):
        return True
    if isinstance(f, Not):
        return is_first_order(f.arg)
    if isinstance(f, (And, Or, Imply, Equiv)):
        return is_first_order(f.left) and is_first_order(f.right)
    if isinstance(f, (Forall, Exists)):
        return is_first_order(f.body)
    return False


def conjuncts(f: Formula) -> Iterator[Formula]:
    """Flatten nested conjunctions."""
    if isinstance(f, And):
        yield from conjuncts(f.left)
        yield from conjuncts(f.right)
    else:
        yield f


def disjuncts(f: Formula) -> Iterator[Formula]:
    if isinstance(f, Or):
        yield from disjuncts(f.left)
        yield from disjuncts(f.right)
    else:
        yield f


def structural_key(node: Node) -> str:
    """Deterministic serialization used for tie-breaking and cache keys."""
    parts: list[str] = []
    _skey(node, parts)
    return "".join(parts)


def _skey(node: Node, out: list[str]) -> None:
    if isinstance(node, Variable):
        out.append(node.name)
    elif isinstance(node, Const):
        out.append(str(node.value))
    elif isinstance(node, BoolConst):
        out.append("T" if node.value else "F")
    elif isinstance(node, Pow):
        out.append(f"^|{node.exp}(")
        _skey(node.base, out)
        out.append(")")
    elif isinstance(node, Cmp):
        out.append(f"cmp{node.op}(")
        _skey(node.left, out)
        out.append(",")
        _skey(node.right, out)
        out.append(")")
    elif isinstance(node, (Forall, Exists)):
        out.append(f"{type(node).__name__}|{node.var}(")
        _skey(node.body, out)
        out.append(")")
    elif isinstance(node, (Assign, AssignAny)):
        out.append(f"{type(node).__name__}|{node.var}(")
        if isinstance(node, Assign):
            _skey(node.term, out)
        out.append(")")
    elif isinstance(node, ODE):
        out.append("ODE(")
        for v, rhs in node.equations:
            out.append(f"{v}'=")
            _skey(rhs, out)
            out.append(",")
        out.append("&")
        _skey(node.domain, out)
        out.append(")")
    else:
        out.append(type(node).__name__)
        out.append("(")
        for name in getattr(node, "__slots__", ()):
            child = getattr(node, name)
            if isinstance(child, (Term, Formula, HybridGame)):
                _skey(child, out)
                out.append(",")
        out.append(")")
