"""Exact polynomial arithmetic, atom normalization, and the eager simplifier.

Everything here is exact: coefficients are ``fractions.Fraction`` and atoms
are canonicalized to integer-primitive polynomials compared against zero, so
structurally equal polynomials get identical representations.  Comparisons
are encoded as (polynomial, sign set) pairs where the sign set is a subset
of {-1, 0, +1}; boolean negation is sign-set complement, conjunction on a
shared polynomial is intersection, and disjunction is union, which makes the
simplifier's atom-level reasoning a few lines of set algebra.

Division is normalized away by the sign-safe product transform
``p/q ~ 0  ->  p*q ~ 0`` (plus a ``q != 0`` side condition for the weak
relations, where the product alone would not imply it).  A literal zero
denominator is an error, never simplified away.

The simplifier pipeline: atom normalization, constant folding, same-polynomial
sign-set merging, subsumption/absorption, assumption-driven atom decisions
(optionally via a validity oracle), and assumption-equality inlining.  The
result never has more AST nodes than the input; when a rewrite grows the
formula, the input is returned instead.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from functools import cmp_to_key
from fractions import Fraction
from typing import Callable, Iterable, Optional, Union

from . import syntax as S
from .syntax import (
    FALSE, TRUE, And, BoolConst, Cmp, Const, Div, Equiv, Exists, Forall,
    Formula, Imply, Mul, Neg, Not, Or, Pow, Sub, Term, Variable,
)


class DivisionByZeroLiteral(Exception):
    """A denominator normalized to the literal zero polynomial."""


class BudgetExceeded(Exception):
    """A simplification pass overran its wall-clock deadline."""


class SizeBlowup(Exception):
    """DNF exceeded the configured clause budget."""


# ---------------------------------------------------------------------------
# Polynomials
# ---------------------------------------------------------------------------

Mono = tuple  # sorted tuple of (var, exp) pairs; () is the constant monomial


def _coeff(c):
    """Prefer plain ints over whole Fractions: same arithmetic, much faster
    hashing and multiplication (equal values hash equally, so dict keys and
    polynomial equality are unaffected)."""
    if isinstance(c, Fraction):
        if c.denominator == 1:
            return c.numerator
        return c
    return c


def _mono_mul(a: Mono, b: Mono) -> Mono:
    if not a:
        return b
    if not b:
        return a
    out = dict(a)
    for var, exp in b:
        out[var] = out.get(var, 0) + exp
    return tuple(sorted(out.items()))


def _mono_cmp(a: Mono, b: Mono) -> int:
    """Graded lexicographic order; alphabetically smaller variables are more
    significant.  A genuine monomial order (total and multiplicative), which
    exact division and gcd correctness depend on."""
    da = sum(e for _, e in a)
    db = sum(e for _, e in b)
    if da != db:
        return -1 if da < db else 1
    ia = ib = 0
    while ia < len(a) or ib < len(b):
        va = a[ia][0] if ia < len(a) else None
        vb = b[ib][0] if ib < len(b) else None
        if va == vb:
            ea, eb = a[ia][1], b[ib][1]
            if ea != eb:
                return -1 if ea < eb else 1
            ia += 1
            ib += 1
        elif vb is None or (va is not None and va < vb):
            return 1  # a carries a positive power of a more significant var
        else:
            return -1
    return 0


_MONO_KEY = cmp_to_key(_mono_cmp)


def _mono_key(m: Mono):
    return _MONO_KEY(m)


class Poly:
    """Sparse multivariate polynomial with exact rational coefficients.

    Instances are never mutated after construction, so the key and variable
    set are computed once and cached."""

    __slots__ = ("terms", "_key", "_vars")

    def __init__(self, terms: dict):
        self.terms = terms
        self._key = None
        self._vars = None

    # -- constructors --
    @staticmethod
    def const(value) -> "Poly":
        c = _coeff(Fraction(value))
        return Poly({(): c} if c else {})

    @staticmethod
    def var(name: str) -> "Poly":
        return Poly({((name, 1),): 1})

    # -- predicates --
    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and () in self.terms)

    def const_value(self) -> Fraction:
        return Fraction(self.terms.get((), 0))

    def variables(self) -> frozenset:
        if self._vars is None:
            out = set()
            for m in self.terms:
                for var, _ in m:
                    out.add(var)
            self._vars = frozenset(out)
        return self._vars

    def total_degree(self) -> int:
        return max((sum(e for _, e in m) for m in self.terms), default=0)

    # -- arithmetic --
    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m)
            if s is None:
                out[m] = c
            else:
                s = s + c
                if s:
                    out[m] = s
                else:
                    del out[m]
        return Poly(out)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        if not self.terms or not other.terms:
            return Poly({})
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                c = c1 * c2
                s = out.get(m)
                if s is None:
                    out[m] = c
                else:
                    s = s + c
                    if s:
                        out[m] = s
                    else:
                        del out[m]
        return Poly(out)

    def scale(self, c) -> "Poly":
        c = _coeff(Fraction(c))
        if not c:
            return Poly({})
        return Poly({m: _coeff(coeff * c) for m, coeff in self.terms.items()})

    def pow_int(self, n: int) -> "Poly":
        out = Poly.const(1)
        base = self
        while n > 0:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # -- structure --
    def degree_in(self, var: str) -> int:
        deg = 0
        for m in self.terms:
            for v, e in m:
                if v == var and e > deg:
                    deg = e
        return deg

    def coeffs_in(self, var: str) -> dict[int, "Poly"]:
        """Coefficients of powers of ``var`` as polynomials in the rest."""
        out: dict[int, dict] = {}
        for m, c in self.terms.items():
            e = 0
            rest = []
            for v, k in m:
                if v == var:
                    e = k
                else:
                    rest.append((v, k))
            bucket = out.setdefault(e, {})
            rm = tuple(rest)
            prev = bucket.get(rm)
            bucket[rm] = c if prev is None else prev + c
        return {e: Poly({m: c for m, c in bucket.items() if c}) for e, bucket in out.items()}

    def derivative(self, var: str) -> "Poly":
        out: dict = {}
        for m, c in self.terms.items():
            for i, (v, e) in enumerate(m):
                if v == var:
                    nm = list(m)
                    if e == 1:
                        del nm[i]
                    else:
                        nm[i] = (v, e - 1)
                    key = tuple(nm)
                    nc = c * e
                    prev = out.get(key)
                    out[key] = nc if prev is None else prev + nc
                    break
        return Poly({m: c for m, c in out.items() if c})

    def subst(self, var: str, value: "Poly") -> "Poly":
        """Substitute a polynomial for a variable."""
        if var not in self.variables():
            return self
        powers: dict[int, Poly] = {0: Poly.const(1)}

        def power(k: int) -> Poly:
            if k not in powers:
                powers[k] = power(k - 1) * value
            return powers[k]

        out = Poly({})
        for m, c in self.terms.items():
            e = 0
            rest = []
            for v, k in m:
                if v == var:
                    e = k
                else:
                    rest.append((v, k))
            base = Poly({tuple(rest): c})
            out = out + (base * power(e) if e else base)
        return out

    def subst_values(self, env: dict[str, Fraction]) -> "Poly":
        out = self
        for var, val in env.items():
            if var in out.variables():
                out = out.subst(var, Poly.const(val))
        return out

    def eval(self, env: dict[str, Fraction]) -> Fraction:
        total = Fraction(0)  # coefficients may be int or Fraction; both mix
        for m, c in self.terms.items():
            v = c
            for var, e in m:
                v *= env[var] ** e
            total += v
        return total

    # -- canonical form --
    def key(self):
        if self._key is None:
            self._key = tuple(sorted(self.terms.items()))
        return self._key

    def lead(self) -> tuple[Mono, Fraction]:
        m = max(self.terms, key=_mono_key)
        return m, self.terms[m]

    def primitive(self) -> tuple["Poly", Fraction]:
        """Integer-primitive form: self == primitive * scale, scale > 0."""
        if not self.terms:
            return self, Fraction(1)
        den_lcm = 1
        for c in self.terms.values():
            d = c.denominator if isinstance(c, Fraction) else 1
            den_lcm = den_lcm * d // math.gcd(den_lcm, d)
        num_gcd = 0
        for c in self.terms.values():
            n = c.numerator if isinstance(c, Fraction) else c
            d = c.denominator if isinstance(c, Fraction) else 1
            num_gcd = math.gcd(num_gcd, abs(n * (den_lcm // d)))
        scale = Fraction(num_gcd, den_lcm)
        return Poly({m: _coeff(c / scale) for m, c in self.terms.items()}), scale

    def exact_div(self, divisor: "Poly") -> Optional["Poly"]:
        """Exact polynomial quotient, or None if not divisible."""
        if divisor.is_zero():
            return None
        if divisor.is_const():
            return self.scale(1 / divisor.const_value())
        rem = self
        quot = Poly({})
        dm, dc = divisor.lead()
        dset = dict(dm)
        while not rem.is_zero():
            m, c = rem.lead()
            mset = dict(m)
            qm = {}
            ok = True
            for v, e in dset.items():
                if mset.get(v, 0) < e:
                    ok = False
                    break
                qm[v] = mset[v] - e
            if not ok:
                return None
            for v, e in mset.items():
                if v not in dset:
                    qm[v] = e
            qmono = tuple(sorted((v, e) for v, e in qm.items() if e))
            qpoly = Poly({qmono: _coeff(Fraction(c) / Fraction(dc))})
            quot = quot + qpoly
            rem = rem - qpoly * divisor
        return quot

    def to_term(self) -> Term:
        if not self.terms:
            return S.ZERO
        parts = []
        for m in sorted(self.terms, key=_mono_key, reverse=True):
            c = Fraction(self.terms[m])
            factors: list[Term] = []
            for var, e in m:
                factors.append(Variable(var) if e == 1 else Pow(Variable(var), e))
            if not factors:
                parts.append((c, Const(abs(c))))
                continue
            body = factors[0]
            for f in factors[1:]:
                body = Mul(body, f)
            if abs(c) != 1:
                body = Mul(Const(abs(c)), body)
            parts.append((c, body))
        out: Term = parts[0][1] if parts[0][0] > 0 else Neg(parts[0][1])
        for c, body in parts[1:]:
            out = S.Add(out, body) if c > 0 else Sub(out, body)
        return out

    def __repr__(self) -> str:  # debugging only
        from .parser import print_term
        return f"Poly({print_term(self.to_term())})"


@dataclass(frozen=True)
class RationalFn:
    """num/den pair of polynomials; den is never the zero polynomial."""
    num: Poly
    den: Poly

    def side_conditions(self) -> list[Formula]:
        if self.den.is_const():
            return []
        return [Atom.of(self.den, NE).to_formula()]


def normalize_term(t: Term) -> RationalFn:
    """Canonical num/den form; constant denominators are folded into num."""
    rf = _term_to_ratfn(t)
    if rf.den.is_const():
        c = rf.den.const_value()
        return RationalFn(rf.num.scale(1 / c), Poly.const(1))
    return rf


def _term_to_ratfn(t: Term) -> RationalFn:
    if isinstance(t, Variable):
        return RationalFn(Poly.var(t.name), Poly.const(1))
    if isinstance(t, Const):
        return RationalFn(Poly.const(t.value), Poly.const(1))
    if isinstance(t, Neg):
        rf = _term_to_ratfn(t.arg)
        return RationalFn(-rf.num, rf.den)
    if isinstance(t, (S.Add, Sub)):
        a = _term_to_ratfn(t.left)
        b = _term_to_ratfn(t.right)
        bn = b.num if isinstance(t, S.Add) else -b.num
        if a.den.key() == b.den.key():
            return RationalFn(a.num + bn, a.den)
        return RationalFn(a.num * b.den + bn * a.den, a.den * b.den)
    if isinstance(t, Mul):
        a = _term_to_ratfn(t.left)
        b = _term_to_ratfn(t.right)
        return RationalFn(a.num * b.num, a.den * b.den)
    if isinstance(t, Div):
        a = _term_to_ratfn(t.left)
        b = _term_to_ratfn(t.right)
        if b.num.is_zero():
            raise DivisionByZeroLiteral(f"literal zero denominator in {t!r}")
        return RationalFn(a.num * b.den, a.den * b.num)
    if isinstance(t, Pow):
        a = _term_to_ratfn(t.base)
        return RationalFn(a.num.pow_int(t.exp), a.den.pow_int(t.exp))
    raise TypeError(f"unknown term {t!r}")


def term_to_poly(t: Term) -> Poly:
    """Polynomial form of a term; fails if a variable denominator remains."""
    rf = normalize_term(t)
    if not rf.den.is_const():
        raise ValueError(f"term is not polynomial: division by {rf.den!r}")
    return rf.num


# ---------------------------------------------------------------------------
# Atoms and the NNF intermediate representation
# ---------------------------------------------------------------------------

LT = frozenset((-1,))
EQ = frozenset((0,))
GT = frozenset((1,))
LE = frozenset((-1, 0))
GE = frozenset((0, 1))
NE = frozenset((-1, 1))
ALL_SIGNS = frozenset((-1, 0, 1))

_OP_SIGNS = {"<": LT, "<=": LE, "=": EQ, ">=": GE, ">": GT, "!=": NE}
_SIGNS_OP = {LT: "<", LE: "<=", EQ: "=", GE: ">=", GT: ">", NE: "!="}


class Atom:
    """Canonical comparison: integer-primitive polynomial vs a sign set."""

    __slots__ = ("poly", "signs", "_key")

    def __init__(self, poly: Poly, signs: frozenset):
        self.poly = poly
        self.signs = signs
        self._key = (poly.key(), signs)

    @staticmethod
    def of(poly: Poly, signs: frozenset) -> Union["Atom", bool]:
        if poly.is_const():
            sign = poly.const_value()
            s = -1 if sign < 0 else (1 if sign > 0 else 0)
            return s in signs
        prim, _ = poly.primitive()
        _, lead = prim.lead()
        if lead < 0:
            prim = -prim
            signs = frozenset(-s for s in signs)
        return Atom(prim, signs)

    @property
    def key(self):
        return self._key

    def negate(self) -> "Atom":
        return Atom(self.poly, ALL_SIGNS - self.signs)

    def to_formula(self) -> Formula:
        pos = Poly({m: c for m, c in self.poly.terms.items() if c > 0})
        neg = Poly({m: -c for m, c in self.poly.terms.items() if c < 0})
        return Cmp(_SIGNS_OP[self.signs], pos.to_term(), neg.to_term())

    def eval(self, env: dict[str, Fraction]) -> bool:
        v = self.poly.eval(env)
        s = -1 if v < 0 else (1 if v > 0 else 0)
        return s in self.signs

    def __repr__(self) -> str:  # debugging only
        from .parser import print_formula
        return f"Atom({print_formula(self.to_formula())})"


class NAnd:
    __slots__ = ("items", "_key")

    def __init__(self, items: tuple):
        self.items = items
        self._key = None


class NOr:
    __slots__ = ("items", "_key")

    def __init__(self, items: tuple):
        self.items = items
        self._key = None


IR = Union[bool, Atom, NAnd, NOr]


def _ir_key(ir: IR):
    if isinstance(ir, bool):
        return ir
    if isinstance(ir, Atom):
        return ("a", ir.key)
    if ir._key is None:
        tag = "&" if isinstance(ir, NAnd) else "|"
        ir._key = (tag, tuple(_ir_key(i) for i in ir.items))
    return ir._key


def ir_negate(ir: IR) -> IR:
    if isinstance(ir, bool):
        return not ir
    if isinstance(ir, Atom):
        return ir.negate()
    if isinstance(ir, NAnd):
        return ir_or([ir_negate(i) for i in ir.items])
    return ir_and([ir_negate(i) for i in ir.items])


def ir_and(items: Iterable[IR]) -> IR:
    flat: list[IR] = []
    for it in items:
        if it is True:
            continue
        if it is False:
            return False
        if isinstance(it, NAnd):
            flat.extend(it.items)
        else:
            flat.append(it)
    merged = _merge_atoms(flat, intersect=True)
    if merged is False:
        return False
    merged = _subsume(merged, conj=True)
    if not merged:
        return True
    if len(merged) == 1:
        return merged[0]
    return NAnd(tuple(merged))


def ir_or(items: Iterable[IR]) -> IR:
    flat: list[IR] = []
    for it in items:
        if it is False:
            continue
        if it is True:
            return True
        if isinstance(it, NOr):
            flat.extend(it.items)
        else:
            flat.append(it)
    merged = _merge_atoms(flat, intersect=False)
    if merged is False:
        return True  # some sign set became complete
    merged = _subsume(merged, conj=False)
    if not merged:
        return False
    if len(merged) == 1:
        return merged[0]
    return NOr(tuple(merged))


def _merge_atoms(items: list[IR], intersect: bool):
    """Merge same-polynomial atoms; returns False when a contradiction
    (conjunction) or tautology (disjunction) arises."""
    signs_by_poly: dict = {}
    order: list = []
    rest: list[IR] = []
    seen_rest: set = set()
    for it in items:
        if isinstance(it, Atom):
            prev = signs_by_poly.get(it.poly.key())
            if prev is None:
                signs_by_poly[it.poly.key()] = (it.poly, it.signs)
                order.append(it.poly.key())
            else:
                poly, s = prev
                s = (s & it.signs) if intersect else (s | it.signs)
                signs_by_poly[it.poly.key()] = (poly, s)
        else:
            k = _ir_key(it)
            if k not in seen_rest:
                seen_rest.add(k)
                rest.append(it)
    out: list[IR] = []
    for k in order:
        poly, s = signs_by_poly[k]
        if intersect and not s:
            return False
        if not intersect and s == ALL_SIGNS:
            return False
        out.append(Atom(poly, s))
    out.extend(rest)
    return out


def _literal_set(ir: IR, conj: bool) -> Optional[dict]:
    """Atom sign-sets of a pure conjunction (or disjunction) of atoms.
    Large clauses are skipped: subsumption between them rarely pays."""
    if isinstance(ir, Atom):
        return {ir.poly.key(): ir.signs}
    box = NAnd if conj else NOr
    if isinstance(ir, box) and len(ir.items) <= 24 \
            and all(isinstance(i, Atom) for i in ir.items):
        out: dict = {}
        for a in ir.items:
            prev = out.get(a.poly.key())
            out[a.poly.key()] = a.signs if prev is None else (prev & a.signs if conj else prev | a.signs)
        return out
    return None


def _subsume(items: list[IR], conj: bool) -> list[IR]:
    """Absorption: in a disjunction, drop clauses implied by another clause
    (dually for conjunctions).  Only pure atom-clauses participate."""
    if len(items) > 40:
        return items
    lits = [_literal_set(it, conj=not conj) for it in items]
    drop = [False] * len(items)
    for i in range(len(items)):
        if drop[i] or lits[i] is None:
            continue
        for j in range(len(items)):
            if i == j or drop[j] or lits[j] is None:
                continue
            if _implies_litset(lits[j], lits[i], conj):
                drop[j] = True
    return [it for i, it in enumerate(items) if not drop[i]]


def _implies_litset(a: dict, b: dict, conj: bool) -> bool:
    """Whether dropping a's owner is justified against b's owner.

    Or-context (conj=False): a, b are conjunction literal maps; a's clause is
    absorbed when a -> b, i.e. every literal of b is weaker than a's on the
    same polynomial.  And-context: a, b are disjunction literal maps; a's
    clause is redundant when b -> a, i.e. every literal of b implies one of
    a's."""
    if not conj:
        for k, sb in b.items():
            sa = a.get(k)
            if sa is None or not sa <= sb:
                return False
        return True
    for k, sb in b.items():
        sa = a.get(k)
        if sa is None or not sb <= sa:
            return False
    return True


# -- multivariate gcd and square-free decomposition ---------------------------

def _poly_content_in(f: Poly, var: str) -> Poly:
    coeffs = list(f.coeffs_in(var).values())
    g = coeffs[0]
    for c in coeffs[1:]:
        g = poly_gcd(g, c)
        if g.is_const():
            break
    return g


def _pseudo_rem(f: Poly, g: Poly, var: str) -> Poly:
    dg = g.degree_in(var)
    lc_g = g.coeffs_in(var).get(dg, Poly({}))
    while not f.is_zero():
        df = f.degree_in(var)
        if df < dg:
            break
        lc_f = f.coeffs_in(var).get(df, Poly({}))
        shift = Poly({((var, df - dg),): Fraction(1)}) if df > dg else Poly.const(1)
        f = f * lc_g - g * lc_f * shift
    return f


def poly_gcd(p: Poly, q: Poly) -> Poly:
    """Primitive multivariate gcd (Euclid with pseudo-remainders)."""
    if p.is_zero():
        return q.primitive()[0] if not q.is_zero() else Poly.const(1)
    if q.is_zero():
        return p.primitive()[0]
    if p.is_const() or q.is_const():
        return Poly.const(1)
    shared = p.variables() & q.variables()
    if not shared:
        return Poly.const(1)
    var = sorted(shared)[0]
    cp = _poly_content_in(p, var)
    cq = _poly_content_in(q, var)
    pp = p.exact_div(cp)
    qq = q.exact_div(cq)
    if pp is None or qq is None:
        return Poly.const(1)
    if pp.degree_in(var) < qq.degree_in(var):
        pp, qq = qq, pp
    while not qq.is_zero():
        r = _pseudo_rem(pp, qq, var)
        if not r.is_zero():
            rc = r.exact_div(_poly_content_in(r, var))
            if rc is None:
                return Poly.const(1)
            r, _ = rc.primitive()
        pp, qq = qq, r
    base = pp.exact_div(_poly_content_in(pp, var))
    if base is None:
        return Poly.const(1)
    out = poly_gcd(cp, cq) * base
    out, _ = out.primitive()
    _, lead = out.lead()
    return -out if lead < 0 else out


_SQF_CACHE: dict = {}
_SQF_TERM_CAP = 40
_SQF_DEGREE_CAP = 10


def square_free_factors(p: Poly) -> list[tuple[Poly, int]]:
    """Square-free decomposition p = prod f_i^i (positive leading signs;
    the constant factor is dropped, so signs must be taken from p's lead)."""
    key = p.key()
    cached = _SQF_CACHE.get(key)
    if cached is not None:
        return cached
    g = p
    for var in sorted(p.variables()):
        d = p.derivative(var)
        if not d.is_zero():
            g = poly_gcd(g, d)
        if g.is_const():
            break
    if g.is_const():
        prim, _ = p.primitive()
        _, lead = prim.lead()
        result = [(-prim if lead < 0 else prim, 1)]
    else:
        h = p.exact_div(g)
        if h is None:  # numeric corner; give up
            result = [(p, 1)]
        else:
            sub = square_free_factors(g)
            factors: list[tuple[Poly, int]] = [(f, m + 1) for f, m in sub]
            rest = h
            for f, _ in sub:
                quotient = rest.exact_div(f)
                if quotient is not None:
                    rest = quotient
            rest, _ = rest.primitive()
            if not rest.is_const():
                _, lead = rest.lead()
                factors.append((-rest if lead < 0 else rest, 1))
            result = factors
        if not _verify_factorization(p, result):
            result = [(p, 1)]
    if len(_SQF_CACHE) > 4096:
        _SQF_CACHE.clear()
    _SQF_CACHE[key] = result
    return result


def _verify_factorization(p: Poly, factors: list[tuple[Poly, int]]) -> bool:
    """p must equal a positive rational times the factor product."""
    prod = Poly.const(1)
    for f, m in factors:
        prod = prod * f.pow_int(m)
    if prod.is_zero() or p.is_zero():
        return False
    pm, pc = p.lead()
    qm, qc = prod.lead()
    if pm != qm or pc * qc <= 0:
        return False
    scaled = prod.scale(pc / qc)
    return (p - scaled).is_zero()


# -- degree-lowering atom rewrites ------------------------------------------

def strict_var_signs(known: dict) -> dict[str, frozenset]:
    """Sign knowledge for single variables out of assumption atoms."""
    out: dict[str, frozenset] = {}
    for key, signs in known.items():
        terms = dict(key)
        if len(terms) != 1:
            continue
        (mono, coeff), = terms.items()
        if len(mono) == 1 and mono[0][1] == 1:
            var = mono[0][0]
            s = signs if coeff > 0 else frozenset(-x for x in signs)
            out[var] = out.get(var, ALL_SIGNS) & s
    return out


def _common_exponents(poly: Poly) -> dict[str, int]:
    common: Optional[dict[str, int]] = None
    for mono in poly.terms:
        entries = dict(mono)
        if common is None:
            common = entries
        else:
            common = {v: min(k, entries[v]) for v, k in common.items() if v in entries}
        if not common:
            return {}
    return common or {}


def _mirror(signs: frozenset) -> frozenset:
    return frozenset(-s for s in signs)


_BINOMIAL_CACHE: dict = {}


def _binomial_divisors(var_signs: dict[str, frozenset]):
    """Sums of two same-strict-sign variables; such sums have that sign, so
    dividing them out of an atom is sound (trial division only)."""
    key = tuple(sorted((v, tuple(sorted(s))) for v, s in var_signs.items()))
    hit = _BINOMIAL_CACHE.get(key)
    if hit is not None:
        return hit
    pos = sorted(v for v, s in var_signs.items() if s == GT)
    neg = sorted(v for v, s in var_signs.items() if s == LT)
    out = []
    for group, sign in ((pos, 1), (neg, -1)):
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                out.append((Poly.var(group[i]) + Poly.var(group[j]), sign))
    if len(_BINOMIAL_CACHE) > 1024:
        _BINOMIAL_CACHE.clear()
    _BINOMIAL_CACHE[key] = out
    return out


_ATOM_REWRITE_CACHE: dict = {}


def _relevant_signs_key(poly: Poly, var_signs: dict) -> tuple:
    return tuple((v, tuple(sorted(var_signs[v])))
                 for v in sorted(poly.variables()) if v in var_signs)


def reduce_atom_ir(poly: Poly, signs: frozenset,
                   var_signs: dict[str, frozenset]) -> IR:
    cache_key = (poly.key(), signs, _relevant_signs_key(poly, var_signs))
    hit = _ATOM_REWRITE_CACHE.get(cache_key)
    if hit is not None:
        return hit
    out = _reduce_atom_ir(poly, signs, var_signs)
    if len(_ATOM_REWRITE_CACHE) > 100_000:
        _ATOM_REWRITE_CACHE.clear()
    _ATOM_REWRITE_CACHE[cache_key] = out
    return out


def _reduce_atom_ir(poly: Poly, signs: frozenset,
                    var_signs: dict[str, frozenset]) -> IR:
    """Lower atom degree by cancelling factors of known sign.

    Rules: a variable with known strict sign divides out entirely (flipping
    the relation for odd powers of a negative); a variable known nonzero
    loses even powers; a single-monomial atom folds exponents to 1 or 2; a
    common even power var^2k without sign knowledge splits into
    ``var = 0 \\/ rest`` (weak relations) or ``var != 0 /\\ rest`` (strict).
    """
    changed = True
    while changed and poly.terms:
        changed = False
        if len(poly.terms) == 1:
            (mono, coeff), = poly.terms.items()
            folded = tuple((v, 1 if e % 2 else 2) for v, e in mono)
            if folded != mono:
                poly = Poly({folded: coeff})
                changed = True
        for var, k in _common_exponents(poly).items():
            vs = var_signs.get(var, ALL_SIGNS)
            if vs == GT or vs == LT:
                poly = poly.exact_div(Poly.var(var).pow_int(k))
                if vs == LT and k % 2:
                    signs = _mirror(signs)
                changed = True
            elif vs == NE and k >= 2:
                drop = k - (k % 2)
                poly = poly.exact_div(Poly.var(var).pow_int(drop))
                changed = True
        if not changed and poly.total_degree() >= 2:
            pvars = poly.variables()
            for divisor, dsign in _binomial_divisors(var_signs):
                if not divisor.variables() <= pvars:
                    continue
                quotient = poly.exact_div(divisor)
                k = 0
                while quotient is not None:
                    poly = quotient
                    k += 1
                    quotient = poly.exact_div(divisor)
                if k:
                    if dsign < 0 and k % 2:
                        signs = _mirror(signs)
                    changed = True
    if (poly.total_degree() >= 3 and len(poly.terms) <= _SQF_TERM_CAP
            and poly.total_degree() <= _SQF_DEGREE_CAP):
        factors = square_free_factors(poly)
        if len(factors) > 1 or (factors and factors[0][1] > 1):
            return _factored_atom_ir(poly, factors, signs, var_signs)
    for var, k in _common_exponents(poly).items():
        vs = var_signs.get(var, ALL_SIGNS)
        if vs == GE or vs == LE:
            # sign of var^k * q is 0 at var = 0 and otherwise follows q
            # (mirrored for odd powers of a nonpositive variable)
            rest = poly.exact_div(Poly.var(var).pow_int(k))
            inner_signs = _mirror(signs) if (vs == LE and k % 2) else signs
            inner = reduce_atom_ir(rest, inner_signs, var_signs)
            nonzero = Atom.of(Poly.var(var), GT if vs == GE else LT)
            if 0 in signs:
                return ir_or([Atom.of(Poly.var(var), EQ), ir_and([nonzero, inner])])
            return ir_and([nonzero, inner])
        if k >= 2:
            # var^(2j) is nonnegative and zero exactly at var = 0, with no
            # assumption needed
            drop = k - (k % 2)
            rest = poly.exact_div(Poly.var(var).pow_int(drop))
            inner = reduce_atom_ir(rest, signs, var_signs)
            if 0 in signs:
                return ir_or([Atom.of(Poly.var(var), EQ), inner])
            return ir_and([Atom.of(Poly.var(var), NE), inner])
    return Atom.of(poly, signs)


def _factored_atom_ir(poly: Poly, factors: list[tuple[Poly, int]],
                      signs: frozenset, var_signs: dict) -> IR:
    """Atom over a square-free decomposition (poly is lead-positive, so the
    dropped constant factor is positive and the sign comes from the parts)."""
    odd = Poly.const(1)
    evens: list[Poly] = []
    for f, m in factors:
        if m % 2:
            odd = odd * f
        else:
            evens.append(f)
    pieces: list[IR] = []
    if 0 in signs:
        pieces.append(ir_or([Atom.of(f, EQ) for f, _ in factors]))
    for want, rel in ((1, GT), (-1, LT)):
        if want in signs:
            parts: list[IR] = [reduce_atom_ir(f, NE, var_signs) for f in evens]
            if odd.is_const():
                parts.append(odd.const_value() > 0 if want > 0 else odd.const_value() < 0)
            else:
                parts.append(reduce_atom_ir(odd, rel, var_signs))
            pieces.append(ir_and(parts))
    return ir_or(pieces)


def formula_to_ir(f: Formula, positive: bool = True) -> IR:
    if isinstance(f, BoolConst):
        return f.value if positive else not f.value
    if isinstance(f, Cmp):
        ir = _cmp_to_ir(f)
        return ir if positive else ir_negate(ir)
    if isinstance(f, Not):
        return formula_to_ir(f.arg, not positive)
    if isinstance(f, And):
        parts = [formula_to_ir(f.left, positive), formula_to_ir(f.right, positive)]
        return ir_and(parts) if positive else ir_or(parts)
    if isinstance(f, Or):
        parts = [formula_to_ir(f.left, positive), formula_to_ir(f.right, positive)]
        return ir_or(parts) if positive else ir_and(parts)
    if isinstance(f, Imply):
        parts = [formula_to_ir(f.left, not positive), formula_to_ir(f.right, positive)]
        return ir_or(parts) if positive else ir_and(parts)
    if isinstance(f, Equiv):
        a = formula_to_ir(Imply(f.left, f.right), True)
        b = formula_to_ir(Imply(f.right, f.left), True)
        both = ir_and([a, b])
        return both if positive else ir_negate(both)
    raise ValueError(f"formula is not propositional arithmetic: {f!r}")


def _cmp_to_ir(f: Cmp) -> IR:
    diff = Sub(f.left, f.right)
    rf = normalize_term(diff)
    signs = _OP_SIGNS[f.op]
    if rf.den.is_const():
        return Atom.of(rf.num, signs)
    # p/q ~ 0  <->  p*q ~' 0 (strict relations imply q != 0 by themselves;
    # the weak ones need the side condition so q = 0 stays an error).
    prod = Atom.of(rf.num * rf.den, signs)
    if signs in (LT, GT, NE):
        return prod
    side = Atom.of(rf.den, NE)
    return ir_and([prod, side])


def ir_to_formula(ir: IR) -> Formula:
    if isinstance(ir, bool):
        return TRUE if ir else FALSE
    if isinstance(ir, Atom):
        return ir.to_formula()
    if isinstance(ir, NAnd):
        return S.conj([ir_to_formula(i) for i in ir.items])
    return S.disj([ir_to_formula(i) for i in ir.items])


def ir_atoms(ir: IR) -> Iterable[Atom]:
    if isinstance(ir, Atom):
        yield ir
    elif isinstance(ir, (NAnd, NOr)):
        for item in ir.items:
            yield from ir_atoms(item)


def ir_map_atoms(ir: IR, fn: Callable[[Atom], IR]) -> IR:
    if isinstance(ir, bool):
        return ir
    if isinstance(ir, Atom):
        return fn(ir)
    items = [ir_map_atoms(i, fn) for i in ir.items]
    return ir_and(items) if isinstance(ir, NAnd) else ir_or(items)


# ---------------------------------------------------------------------------
# Simplifier
# ---------------------------------------------------------------------------

# Optional oracle with two methods, implemented by the engine context:
#   decide_atom(atom, assumptions) -> True/False/None
#   entails(formula, assumptions)  -> bool   (True only on a certificate)
DecideOracle = object


def simplify(f: Formula, assumptions: Formula = TRUE, *, full: bool = True,
             oracle: Optional[DecideOracle] = None,
             deadline: Optional[float] = None) -> Formula:
    """Equivalent-under-assumptions simplification; never grows the formula.

    With a deadline the pass degrades gracefully: whatever is simplified by
    then is returned (any prefix of the rewrites preserves equivalence)."""
    if not S.is_propositional(f):
        raise ValueError("simplify expects propositional arithmetic")
    try:
        ir = simplify_ir(formula_to_ir(f), assumptions, full=full, oracle=oracle,
                         deadline=deadline, strict=False)
    except BudgetExceeded:
        return f
    if isinstance(ir, bool):
        return TRUE if ir else FALSE
    candidate = ir_to_formula(ir)
    if S.node_count(candidate) < S.node_count(f):
        return candidate
    if S.node_count(candidate) == S.node_count(f):
        # deterministic tie-break: lexicographically smaller key wins
        return candidate if S.structural_key(candidate) <= S.structural_key(f) else f
    return f


def simplify_ir(ir: IR, assumptions: Formula = TRUE, *, full: bool = True,
                oracle: Optional[DecideOracle] = None,
                deadline: Optional[float] = None, strict: bool = True) -> IR:
    if isinstance(ir, bool):
        return ir
    use_assum = full and not (isinstance(assumptions, BoolConst) and assumptions.value)
    return _apply_assumptions(ir, assumptions if use_assum else TRUE,
                              oracle if use_assum else None, deadline, strict)


def _assumption_signs(assumptions: Formula) -> dict:
    """poly-key -> known sign set, from the conjunctive structure of A."""
    try:
        ir = formula_to_ir(assumptions)
    except (ValueError, DivisionByZeroLiteral):
        return {}
    out: dict = {}
    items = ir.items if isinstance(ir, NAnd) else (ir,)
    for it in items:
        if isinstance(it, Atom):
            prev = out.get(it.poly.key())
            out[it.poly.key()] = it.signs if prev is None else prev & it.signs
    return out


def _equality_bindings(known_signs: dict) -> dict[str, Fraction]:
    """var -> rational value for assumption atoms of shape var = const."""
    out: dict[str, Fraction] = {}
    for key, signs in known_signs.items():
        if signs != EQ:
            continue
        terms = dict(key)
        monos = list(terms.items())
        var_monos = [(m, c) for m, c in monos if m]
        const = terms.get((), Fraction(0))
        if len(var_monos) != 1:
            continue
        mono, coeff = var_monos[0]
        if len(mono) == 1 and mono[0][1] == 1:
            out[mono[0][0]] = Fraction(-const, coeff)
    return out


# -- interval sign estimation -------------------------------------------------

_ADD_TABLE = {
    (1, 1): (1,), (1, 0): (1,), (0, 0): (0,),
    (-1, -1): (-1,), (-1, 0): (-1,), (1, -1): (-1, 0, 1),
}


def _set_add(a: frozenset, b: frozenset) -> frozenset:
    out = set()
    for x in a:
        for y in b:
            out.update(_ADD_TABLE[(x, y) if (x, y) in _ADD_TABLE else (y, x)])
            if len(out) == 3:
                return ALL_SIGNS
    return frozenset(out)


def _set_mul(a: frozenset, b: frozenset) -> frozenset:
    return frozenset(x * y for x in a for y in b)


def sign_estimate(poly: Poly, var_signs: dict[str, frozenset]) -> frozenset:
    """Possible signs of the polynomial given per-variable sign knowledge."""
    total: Optional[frozenset] = None
    for mono, coeff in poly.terms.items():
        s = frozenset((1 if coeff > 0 else -1,))
        for var, e in mono:
            vs = var_signs.get(var, ALL_SIGNS)
            if e % 2 == 0:
                vs = frozenset(1 if x else 0 for x in vs)
            s = _set_mul(s, vs)
            if s == ALL_SIGNS:
                break
        total = s if total is None else _set_add(total, s)
        if total == ALL_SIGNS:
            return ALL_SIGNS
    return total if total is not None else EQ


# -- contextual simplification -------------------------------------------------

def _harvest(items, known: dict) -> tuple[dict, dict]:
    """Extend sign knowledge with the atom children of a conjunction."""
    local = dict(known)
    for it in items:
        if isinstance(it, Atom):
            k = it.poly.key()
            prev = local.get(k)
            local[k] = it.signs if prev is None else prev & it.signs
    return local, _equality_bindings(local)


def _decide_syntactic(atom: Atom, known: dict, var_signs: dict) -> IR:
    s = known.get(atom.poly.key())
    if s is not None:
        if s <= atom.signs:
            return True
        if not (s & atom.signs):
            return False
    est = sign_estimate(atom.poly, var_signs)
    if est <= atom.signs:
        return True
    if not (est & atom.signs):
        return False
    return atom


def _rewrite_atom(atom: Atom, known: dict, bindings: dict, var_signs: dict,
                  assumptions: Formula, oracle) -> IR:
    if bindings:
        inlined = Atom.of(atom.poly.subst_values(bindings), atom.signs)
        if isinstance(inlined, bool):
            return inlined
        atom = inlined
    lowered = reduce_atom_ir(atom.poly, atom.signs, var_signs)

    def decide(a: Atom) -> IR:
        verdict = _decide_syntactic(a, known, var_signs)
        if not isinstance(verdict, Atom):
            return verdict
        if oracle is not None:
            answer = oracle.decide_atom(a.to_formula(), assumptions)
            if answer is not None:
                return answer
        return a

    if isinstance(lowered, bool):
        return lowered
    if isinstance(lowered, Atom):
        return decide(lowered)
    return ir_map_atoms(lowered, decide)


def _ctx_simplify(ir: IR, known: dict, bindings: dict,
                  assumptions: Formula, oracle, deadline: Optional[float],
                  strict: bool) -> IR:
    if isinstance(ir, bool):
        return ir
    if deadline is not None and time.monotonic() > deadline:
        if strict:
            raise BudgetExceeded("simplification exceeded its time budget")
        return ir
    var_signs = strict_var_signs(known)
    if isinstance(ir, Atom):
        return _rewrite_atom(ir, known, bindings, var_signs, assumptions, oracle)
    if isinstance(ir, NOr):
        return ir_or([_ctx_simplify(i, known, bindings, assumptions, oracle,
                                    deadline, strict)
                      for i in ir.items])
    # conjunction: atom children strengthen the context of their siblings
    local, local_bindings = _harvest(ir.items, known)
    out = []
    for it in ir.items:
        if isinstance(it, Atom):
            # an atom may only be judged against inherited knowledge, not
            # against itself via the harvested context
            out.append(_rewrite_atom(it, known, bindings, var_signs,
                                     assumptions, oracle))
        else:
            out.append(_ctx_simplify(it, local, local_bindings, assumptions,
                                     oracle, deadline, strict))
    return ir_and(out)


def _apply_assumptions(ir: IR, assumptions: Formula, oracle: Optional[DecideOracle],
                       deadline: Optional[float] = None, strict: bool = True) -> IR:
    known = _assumption_signs(assumptions)
    bindings = _equality_bindings(known)
    out = _ctx_simplify(ir, known, bindings, assumptions, oracle, deadline, strict)
    if oracle is not None:
        out = _semantic_prune(out, assumptions, oracle, deadline)
    return out


def ir_atom_count(ir: IR) -> int:
    if isinstance(ir, bool):
        return 0
    if isinstance(ir, Atom):
        return 1
    return sum(ir_atom_count(i) for i in ir.items)


_ir_atom_count = ir_atom_count


_PRUNE_ITEM_CAP = 16
_PRUNE_ATOM_CAP = 220


def _semantic_prune(ir: IR, assumptions: Formula, oracle,
                    deadline: Optional[float] = None, depth: int = 2) -> IR:
    """Drop conjuncts implied by the rest and disjuncts implying the rest,
    certified by the entailment oracle (quantifier elimination).  Applied to
    the top levels only; nested occurrences rarely pay for their QE cost."""
    if isinstance(ir, (bool, Atom)) or depth <= 0:
        return ir
    if deadline is not None and time.monotonic() > deadline:
        return ir
    cache = getattr(oracle, "prune_cache", None)
    cache_key = None
    if cache is not None:
        cache_key = (_ir_key(ir), S.structural_key(assumptions), depth)
        hit = cache.get(cache_key)
        if hit is not None:
            return hit
    conj_mode = isinstance(ir, NAnd)
    items = [_semantic_prune(i, assumptions, oracle, deadline, depth - 1)
             for i in ir.items]
    rebuilt = ir_and(items) if conj_mode else ir_or(items)
    if isinstance(rebuilt, (bool, Atom)):
        return rebuilt
    items = list(rebuilt.items)
    if len(items) > _PRUNE_ITEM_CAP or _ir_atom_count(rebuilt) > _PRUNE_ATOM_CAP:
        return rebuilt
    conj_mode = isinstance(rebuilt, NAnd)
    changed = True
    while changed and len(items) > 1:
        if deadline is not None and time.monotonic() > deadline:
            break
        changed = False
        for i in range(len(items) - 1, -1, -1):
            others = items[:i] + items[i + 1:]
            rest = ir_and(others) if conj_mode else ir_or(others)
            if conj_mode:
                goal = S.Imply(ir_to_formula(rest), ir_to_formula(items[i]))
            else:
                goal = S.Imply(ir_to_formula(items[i]), ir_to_formula(rest))
            if oracle.entails(goal, assumptions):
                items.pop(i)
                changed = True
                break
    out = ir_and(items) if conj_mode else ir_or(items)
    if cache is not None:
        if len(cache) > 20_000:
            cache.clear()
        cache[cache_key] = out
    return out


# ---------------------------------------------------------------------------
# Exact evaluation
# ---------------------------------------------------------------------------

class EvalError(Exception):
    pass


def compile_term(t: Term):
    """Compile a term to a callable evaluating it over Fraction environments."""
    if isinstance(t, Variable):
        name = t.name
        return lambda env: env[name]
    if isinstance(t, Const):
        value = t.value
        return lambda env: value
    if isinstance(t, Neg):
        f = compile_term(t.arg)
        return lambda env: -f(env)
    if isinstance(t, (S.Add, Sub, Mul, Div)):
        lf = compile_term(t.left)
        rf = compile_term(t.right)
        if isinstance(t, S.Add):
            return lambda env: lf(env) + rf(env)
        if isinstance(t, Sub):
            return lambda env: lf(env) - rf(env)
        if isinstance(t, Mul):
            return lambda env: lf(env) * rf(env)

        def divide(env):
            d = rf(env)
            if d == 0:
                raise EvalError("division by zero during evaluation")
            return lf(env) / d
        return divide
    if isinstance(t, Pow):
        bf = compile_term(t.base)
        e = t.exp
        return lambda env: bf(env) ** e
    raise TypeError(f"unknown term {t!r}")


_CMP_FNS = {
    "<": lambda a, b: a < b, "<=": lambda a, b: a <= b,
    "=": lambda a, b: a == b, ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b, "!=": lambda a, b: a != b,
}


def compile_formula(f: Formula):
    """Compile propositional arithmetic to a boolean-valued callable."""
    if isinstance(f, BoolConst):
        value = f.value
        return lambda env: value
    if isinstance(f, Cmp):
        op = _CMP_FNS[f.op]
        lf = compile_term(f.left)
        rf = compile_term(f.right)
        return lambda env: op(lf(env), rf(env))
    if isinstance(f, Not):
        g = compile_formula(f.arg)
        return lambda env: not g(env)
    if isinstance(f, And):
        a, b = compile_formula(f.left), compile_formula(f.right)
        return lambda env: a(env) and b(env)
    if isinstance(f, Or):
        a, b = compile_formula(f.left), compile_formula(f.right)
        return lambda env: a(env) or b(env)
    if isinstance(f, Imply):
        a, b = compile_formula(f.left), compile_formula(f.right)
        return lambda env: (not a(env)) or b(env)
    if isinstance(f, Equiv):
        a, b = compile_formula(f.left), compile_formula(f.right)
        return lambda env: a(env) == b(env)
    raise ValueError("only propositional arithmetic can be evaluated")


def numeric_counterexample(f: Formula, samples: int = 160, seed: int = 7):
    """A Fraction environment falsifying a propositional formula, or None.

    Exact arithmetic, so a returned environment is a genuine counterexample;
    None only means the cheap search failed.
    """
    import random as _random
    if not S.is_propositional(f):
        return None
    variables = sorted(S.free_vars(f))
    try:
        fn = compile_formula(f)
    except (ValueError, TypeError):
        return None
    rng = _random.Random(seed)
    pools = (1, 1, 2, 3, 4)
    for _ in range(samples):
        env = {v: Fraction(rng.randint(-12, 12), rng.choice(pools))
               for v in variables}
        try:
            if not fn(env):
                return env
        except EvalError:
            continue
    return None


# ---------------------------------------------------------------------------
# Normal forms
# ---------------------------------------------------------------------------

def nnf(f: Formula) -> Formula:
    """Negation normal form with negations folded into atoms."""
    return ir_to_formula(formula_to_ir(f))


def dnf(f: Formula, clause_budget: int = 256) -> Formula:
    """Disjunctive normal form as a flat disjunction of conjunctions."""
    ir = formula_to_ir(f)
    clauses = _dnf_ir(ir, clause_budget)
    if clauses is True:
        return TRUE
    if clauses is False or not clauses:
        return FALSE
    return S.disj([S.conj([a.to_formula() for a in clause]) for clause in clauses])


def dnf_clauses(f: Formula, clause_budget: int = 256) -> list[list[Atom]]:
    ir = formula_to_ir(f)
    clauses = _dnf_ir(ir, clause_budget)
    if clauses is True:
        return [[]]
    if clauses is False:
        return []
    return clauses


def _dnf_ir(ir: IR, budget: int):
    """Returns True, False, or a list of clauses (lists of atoms)."""
    if isinstance(ir, bool):
        return ir
    if isinstance(ir, Atom):
        return [[ir]]
    if isinstance(ir, NOr):
        out: list[list[Atom]] = []
        for item in ir.items:
            sub = _dnf_ir(item, budget)
            if sub is True:
                return True
            if sub is False:
                continue
            out.extend(sub)
            if len(out) > budget:
                raise SizeBlowup(f"DNF exceeded {budget} clauses")
        return out if out else False
    # conjunction: distribute
    product: list[list[Atom]] = [[]]
    for item in ir.items:
        sub = _dnf_ir(item, budget)
        if sub is True:
            continue
        if sub is False:
            return False
        new: list[list[Atom]] = []
        for clause in product:
            for extra in sub:
                merged = _merge_clause(clause, extra)
                if merged is not None:
                    new.append(merged)
            if len(new) > budget:
                raise SizeBlowup(f"DNF exceeded {budget} clauses")
        product = new
        if not product:
            return False
    return product


def _merge_clause(a: list[Atom], b: list[Atom]) -> Optional[list[Atom]]:
    signs: dict = {}
    polys: dict = {}
    for atom in list(a) + list(b):
        k = atom.poly.key()
        polys[k] = atom.poly
        s = signs.get(k, ALL_SIGNS) & atom.signs
        if not s:
            return None
        signs[k] = s
    return [Atom(polys[k], s) for k, s in signs.items()]
