"""Concrete syntax: problem-sketch files, formula strings, and printing.

The problem-file grammar:

    problem   := "problem" IDENT "{" section+ "}"
    section   := "assum:" formula ";" | "action" IDENT ":" program ";"
               | "plant:" "{" odeitem ("," odeitem)* "&" formula "}" ";"
               | "cycle:" term ";" | "safe:" formula ";"
               | "hint:" formula ";" | "conserved:" term ";"
    odeitem   := IDENT "'" "=" term
    program   := assign | "?" formula | program ";" program
               | program "++" program | "(" program ")"
    assign    := IDENT ":=" term | IDENT ":=" "*"

Formulas use infix comparisons (< <= = != >= >), connectives ! & | -> <->,
quantifiers \\forall x / \\exists x, and box/diamond modalities [game]f and
<game>f over the full game syntax (;, ++, ^d, *, ?test, x:=e, x:=*, ODEs).
Numeric literals are exact rationals; 0.5 parses as 1/2.

The timer variable ``t`` is reserved: the engine injects it into the plant,
so it may not occur in user sections.  Identifiers containing ``~`` cannot be
produced by the lexer at all, which keeps machine-generated names fresh.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import syntax as S
from .syntax import (
    FALSE, TRUE, And, Assign, AssignAny, Box, Choice, Cmp, Const, Diamond,
    Div, Dual, Equiv, Exists, Forall, Formula, HybridGame, Imply, Loop, Mul,
    Neg, Not, ODE, Or, Pow, Seq, Sub, Term, Test, Variable,
)

TIMER_VAR = "t"
SECTION_KEYWORDS = {"assum", "action", "plant", "cycle", "safe", "hint", "conserved", "problem"}


class SyntaxError_(Exception):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message


class TemplateViolation(Exception):
    pass


@dataclass(frozen=True)
class ProblemSketch:
    name: str
    assum: Formula
    actions: tuple[tuple[str, HybridGame], ...]
    plant_odes: tuple[tuple[str, Term], ...]
    domain: Formula
    cycle_bound: Term
    safe: Formula
    hints: tuple[Formula, ...] = ()
    conserved: tuple[Term, ...] = ()

    def action_map(self) -> dict[str, HybridGame]:
        return dict(self.actions)


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TWO_CHAR = (":=", "++", "->", "<=", ">=", "!=", "^d")
_ONE_CHAR = "(){}[]<>=&|!+-*/^;,:?'"


@dataclass
class Token:
    kind: str  # IDENT, NUM, SYM, EOF
    text: str
    line: int
    col: int


def _lex(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":  # comment to end of line
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text.startswith("<->", i):
            tokens.append(Token("SYM", "<->", line, col))
            i += 3
            col += 3
            continue
        two = text[i:i + 2]
        if two in _TWO_CHAR:
            tokens.append(Token("SYM", two, line, col))
            i += 2
            col += 2
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                if text[j] == ".":
                    seen_dot = True
                j += 1
            tokens.append(Token("NUM", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_" or c == "\\":
            j = i + 1 if c == "\\" else i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if word == "\\":
                raise SyntaxError_(line, col, "dangling backslash")
            tokens.append(Token("IDENT", word, line, col))
            col += j - i
            i = j
            continue
        if c in _ONE_CHAR:
            tokens.append(Token("SYM", c, line, col))
            i += 1
            col += 1
            continue
        raise SyntaxError_(line, col, f"unexpected character {c!r}")
    tokens.append(Token("EOF", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Recursive-descent parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.tokens = _lex(text)
        self.pos = 0

    # -- token helpers --
    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at_sym(self, text: str, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok.kind == "SYM" and tok.text == text

    def at_ident(self, text: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == "IDENT" and (text is None or tok.text == text)

    def expect_sym(self, text: str) -> Token:
        tok = self.next()
        if tok.kind != "SYM" or tok.text != text:
            raise SyntaxError_(tok.line, tok.col, f"expected {text!r}, found {tok.text!r}")
        return tok

    def expect_ident(self) -> Token:
        tok = self.next()
        if tok.kind != "IDENT":
            raise SyntaxError_(tok.line, tok.col, f"expected identifier, found {tok.text!r}")
        return tok

    def fail(self, message: str):
        tok = self.peek()
        raise SyntaxError_(tok.line, tok.col, message)

    # -- terms --
    def term(self) -> Term:
        return self.additive()

    def additive(self) -> Term:
        left = self.multiplicative()
        while self.at_sym("+") or self.at_sym("-"):
            op = self.next().text
            right = self.multiplicative()
            left = S.Add(left, right) if op == "+" else S.Sub(left, right)
        return left

    def multiplicative(self) -> Term:
        left = self.unary_term()
        while self.at_sym("*") or self.at_sym("/"):
            op = self.next().text
            right = self.unary_term()
            left = Mul(left, right) if op == "*" else Div(left, right)
        return left

    def unary_term(self) -> Term:
        if self.at_sym("-"):
            self.next()
            return Neg(self.unary_term())
        return self.power()

    def power(self) -> Term:
        base = self.atom_term()
        if self.at_sym("^"):
            self.next()
            tok = self.next()
            if tok.kind != "NUM" or "." in tok.text:
                raise SyntaxError_(tok.line, tok.col, "exponent must be a nonnegative integer")
            return Pow(base, int(tok.text))
        return base

    def atom_term(self) -> Term:
        tok = self.peek()
        if tok.kind == "NUM":
            self.next()
            return Const(Fraction(tok.text))
        if tok.kind == "IDENT":
            if tok.text.startswith("\\"):
                raise SyntaxError_(tok.line, tok.col, f"unexpected {tok.text!r} in term")
            self.next()
            return Variable(tok.text)
        if self.at_sym("("):
            self.next()
            inner = self.term()
            self.expect_sym(")")
            return inner
        self.fail("expected a term")

    # -- formulas --
    def formula(self) -> Formula:
        return self.equiv()

    def equiv(self) -> Formula:
        left = self.imply()
        while self.at_sym("<->"):
            self.next()
            left = Equiv(left, self.imply())
        return left

    def imply(self) -> Formula:
        left = self.disjunction()
        if self.at_sym("->"):
            self.next()
            return Imply(left, self.imply())  # right-associative
        return left

    def disjunction(self) -> Formula:
        left = self.conjunction()
        while self.at_sym("|"):
            self.next()
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> Formula:
        left = self.unary_formula()
        while self.at_sym("&"):
            self.next()
            left = And(left, self.unary_formula())
        return left

    def unary_formula(self) -> Formula:
        if self.at_sym("!"):
            self.next()
            return Not(self.unary_formula())
        if self.at_ident("\\forall") or self.at_ident("\\exists"):
            kw = self.next().text
            var = self.expect_ident().text
            body = self.unary_formula()
            return Forall(var, body) if kw == "\\forall" else Exists(var, body)
        if self.at_sym("["):
            self.next()
            game = self.game()
            self.expect_sym("]")
            return Box(game, self.unary_formula())
        if self.at_sym("<") and self._try_modal_diamond():
            self.next()
            game = self.game()
            self.expect_sym(">")
            return Diamond(game, self.unary_formula())
        return self.atomic_formula()

    def _try_modal_diamond(self) -> bool:
        """Lookahead: is this '<' a diamond modality rather than a comparison?"""
        save = self.pos
        try:
            self.next()
            self.game()
            ok = self.at_sym(">")
        except SyntaxError_:
            ok = False
        self.pos = save
        return ok

    def atomic_formula(self) -> Formula:
        if self.at_ident("true"):
            self.next()
            return TRUE
        if self.at_ident("false"):
            self.next()
            return FALSE
        if self.at_sym("("):
            # Could be a parenthesized formula or a parenthesized term
            # followed by a comparison; backtrack on failure.
            save = self.pos
            try:
                self.next()
                inner = self.formula()
                self.expect_sym(")")
                if self._at_cmp_op():
                    raise SyntaxError_(self.peek().line, self.peek().col, "comparison of formulas")
                return inner
            except SyntaxError_:
                self.pos = save
        left = self.term()
        op = self._cmp_op()
        right = self.term()
        return Cmp(op, left, right)

    def _at_cmp_op(self) -> bool:
        return any(self.at_sym(op) for op in ("<", "<=", "=", ">=", ">", "!="))

    def _cmp_op(self) -> str:
        for op in ("<=", ">=", "!=", "<", ">", "="):
            if self.at_sym(op):
                self.next()
                return op
        self.fail("expected a comparison operator")

    # -- games --
    def game(self) -> HybridGame:
        left = self.game_seq()
        while self.at_sym("++"):
            self.next()
            left = Choice(left, self.game_seq())
        return left

    def game_seq(self) -> HybridGame:
        left = self.game_postfix()
        while self.at_sym(";"):
            # ';' also terminates sections; only continue when a game follows.
            if not self._game_follows(1):
                break
            self.next()
            left = Seq(left, self.game_postfix())
        return left

    def _game_follows(self, offset: int) -> bool:
        tok = self.peek(offset)
        if tok.kind == "SYM" and tok.text in ("?", "(", "{"):
            return True
        if tok.kind == "IDENT" and not tok.text.startswith("\\"):
            nxt = self.peek(offset + 1)
            return nxt.kind == "SYM" and nxt.text == ":="
        return False

    def game_postfix(self) -> HybridGame:
        g = self.game_atom()
        while True:
            if self.at_sym("^d"):
                self.next()
                g = Dual(g)
            elif self.at_sym("*") and not self._game_follows(1) and not self.at_sym("*", 1):
                self.next()
                g = Loop(g)
            else:
                return g

    def game_atom(self) -> HybridGame:
        if self.at_sym("?"):
            self.next()
            return Test(self.unary_formula())
        if self.at_sym("("):
            self.next()
            inner = self.game()
            self.expect_sym(")")
            return inner
        if self.at_sym("{"):
            self.next()
            eqs = [self.ode_item()]
            while self.at_sym(","):
                self.next()
                eqs.append(self.ode_item())
            domain: Formula = TRUE
            if self.at_sym("&"):
                self.next()
                domain = self.formula()
            self.expect_sym("}")
            return ODE(tuple(eqs), domain)
        if self.peek().kind == "IDENT":
            name = self.expect_ident().text
            self.expect_sym(":=")
            if self.at_sym("*"):
                self.next()
                return AssignAny(name)
            return Assign(name, self.term())
        self.fail("expected a game")

    def ode_item(self) -> tuple[str, Term]:
        name = self.expect_ident().text
        self.expect_sym("'")
        self.expect_sym("=")
        return name, self.term()

    # -- problems --
    def problem(self) -> ProblemSketch:
        tok = self.expect_ident()
        if tok.text != "problem":
            raise SyntaxError_(tok.line, tok.col, "expected 'problem'")
        name = self.expect_ident().text
        self.expect_sym("{")
        assum: Formula = TRUE
        actions: list[tuple[str, HybridGame]] = []
        plant: tuple[tuple[str, Term], ...] | None = None
        domain: Formula = TRUE
        cycle: Term | None = None
        safe: Formula | None = None
        hints: list[Formula] = []
        conserved: list[Term] = []
        while not self.at_sym("}"):
            kw = self.expect_ident()
            if kw.text == "assum":
                self.expect_sym(":")
                assum = self.formula()
            elif kw.text == "action":
                act_name = self.expect_ident().text
                self.expect_sym(":")
                actions.append((act_name, self.game()))
            elif kw.text == "plant":
                self.expect_sym(":")
                self.expect_sym("{")
                eqs = [self.ode_item()]
                while self.at_sym(","):
                    self.next()
                    eqs.append(self.ode_item())
                if self.at_sym("&"):
                    self.next()
                    domain = self.formula()
                self.expect_sym("}")
                plant = tuple(eqs)
            elif kw.text == "cycle":
                self.expect_sym(":")
                cycle = self.term()
            elif kw.text == "safe":
                self.expect_sym(":")
                safe = self.formula()
            elif kw.text == "hint":
                self.expect_sym(":")
                hints.append(self.formula())
            elif kw.text == "conserved":
                self.expect_sym(":")
                conserved.append(self.term())
            else:
                raise SyntaxError_(kw.line, kw.col, f"unknown section {kw.text!r}")
            self.expect_sym(";")
        self.expect_sym("}")
        tok = self.next()
        if tok.kind != "EOF":
            raise SyntaxError_(tok.line, tok.col, "trailing input after problem")
        if plant is None:
            raise TemplateViolation("missing plant section")
        if cycle is None:
            raise TemplateViolation("missing cycle section")
        if safe is None:
            raise TemplateViolation("missing safe section")
        if not actions:
            raise TemplateViolation("a problem needs at least one action")
        sketch = ProblemSketch(name, assum, tuple(actions), plant, domain, cycle, safe,
                               tuple(hints), tuple(conserved))
        _validate(sketch)
        return sketch


def _validate(p: ProblemSketch) -> None:
    def check_timer(node, where: str) -> None:
        if TIMER_VAR in S.all_names(node):
            raise TemplateViolation(f"timer variable '{TIMER_VAR}' is reserved and may not appear in {where}")

    check_timer(p.assum, "assum")
    check_timer(p.safe, "safe")
    check_timer(p.domain, "the plant domain")
    check_timer(p.cycle_bound, "cycle")
    for f in p.hints:
        check_timer(f, "hint")
    for e in p.conserved:
        check_timer(e, "conserved")
    seen = set()
    for var, rhs in p.plant_odes:
        if var == TIMER_VAR:
            raise TemplateViolation("the plant may not evolve the reserved timer variable directly")
        if var in seen:
            raise TemplateViolation(f"duplicate plant equation for {var}")
        seen.add(var)
        check_timer(rhs, "the plant")
        _require_polynomial(rhs, f"plant equation for {var}")
    for fm in (p.assum, p.safe, p.domain):
        if not S.is_propositional(fm):
            raise TemplateViolation("assum, safe, and the plant domain must be propositional arithmetic")
    for f in p.hints:
        if not S.is_propositional(f):
            raise TemplateViolation("hints must be propositional arithmetic")
    safe_vars = S.free_vars(p.safe)
    for name, prog in p.actions:
        check_timer(prog, f"action {name}")
        _validate_action_program(prog, name)
        written = S.bound_vars(prog)
        clash = written & safe_vars
        if clash:
            raise TemplateViolation(
                f"action {name} writes {sorted(clash)} which appear in safe")


def _validate_action_program(g: HybridGame, name: str) -> None:
    if isinstance(g, (Assign, AssignAny)):
        return
    if isinstance(g, Test):
        if not S.is_propositional(g.cond):
            raise TemplateViolation(f"action {name}: tests must be propositional arithmetic")
        return
    if isinstance(g, Seq):
        _validate_action_program(g.first, name)
        _validate_action_program(g.second, name)
        return
    if isinstance(g, Choice):
        _validate_action_program(g.left, name)
        _validate_action_program(g.right, name)
        return
    raise TemplateViolation(
        f"action {name}: programs are discrete (choices, assignments, tests only)")


def _require_polynomial(t: Term, where: str) -> None:
    if isinstance(t, (Variable, Const)):
        return
    if isinstance(t, (Neg,)):
        _require_polynomial(t.arg, where)
        return
    if isinstance(t, (S.Add, Sub, Mul)):
        _require_polynomial(t.left, where)
        _require_polynomial(t.right, where)
        return
    if isinstance(t, Pow):
        _require_polynomial(t.base, where)
        return
    if isinstance(t, Div):
        if S.free_vars(t.right):
            raise TemplateViolation(f"{where}: right-hand sides must be polynomial")
        _require_polynomial(t.left, where)
        return
    raise TypeError(f"unknown term {t!r}")


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def parse_problem(text: str) -> ProblemSketch:
    return _Parser(text).problem()


def parse_formula(text: str) -> Formula:
    p = _Parser(text)
    f = p.formula()
    tok = p.next()
    if tok.kind != "EOF":
        raise SyntaxError_(tok.line, tok.col, "trailing input after formula")
    return f


def parse_term(text: str) -> Term:
    p = _Parser(text)
    t = p.term()
    tok = p.next()
    if tok.kind != "EOF":
        raise SyntaxError_(tok.line, tok.col, "trailing input after term")
    return t


# ---------------------------------------------------------------------------
# Printing (output re-parses to a structurally equal AST)
# ---------------------------------------------------------------------------

_TERM_PREC = {"add": 1, "mul": 2, "neg": 3, "pow": 4, "atom": 5}


def print_term(t: Term, prec: int = 0) -> str:
    if isinstance(t, Variable):
        return t.name
    if isinstance(t, Const):
        v = t.value
        if v.denominator == 1 and v >= 0:
            return str(v.numerator)
        s = str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
        return s if prec < _TERM_PREC["mul"] else f"({s})"
    if isinstance(t, Neg):
        inner = print_term(t.arg, _TERM_PREC["neg"])
        s = f"-{inner}"
        return s if prec < _TERM_PREC["mul"] else f"({s})"
    if isinstance(t, S.Add):
        s = f"{print_term(t.left, _TERM_PREC['add'])} + {print_term(t.right, _TERM_PREC['add'] + 1)}"
        return s if prec <= _TERM_PREC["add"] else f"({s})"
    if isinstance(t, Sub):
        s = f"{print_term(t.left, _TERM_PREC['add'])} - {print_term(t.right, _TERM_PREC['add'] + 1)}"
        return s if prec <= _TERM_PREC["add"] else f"({s})"
    if isinstance(t, Mul):
        s = f"{print_term(t.left, _TERM_PREC['mul'])}*{print_term(t.right, _TERM_PREC['mul'] + 1)}"
        return s if prec <= _TERM_PREC["mul"] else f"({s})"
    if isinstance(t, Div):
        s = f"{print_term(t.left, _TERM_PREC['mul'])}/{print_term(t.right, _TERM_PREC['mul'] + 1)}"
        return s if prec <= _TERM_PREC["mul"] else f"({s})"
    if isinstance(t, Pow):
        return f"{print_term(t.base, _TERM_PREC['pow'] + 1)}^{t.exp}"
    raise TypeError(f"unknown term {t!r}")


_FORMULA_PREC = {"equiv": 1, "imply": 2, "or": 3, "and": 4, "unary": 5}


def print_formula(f: Formula, prec: int = 0) -> str:
    if isinstance(f, S.BoolConst):
        return "true" if f.value else "false"
    if isinstance(f, Cmp):
        return f"{print_term(f.left)} {f.op} {print_term(f.right)}"
    if isinstance(f, Not):
        return f"!{print_formula(f.arg, _FORMULA_PREC['unary'])}"
    if isinstance(f, And):
        s = f"{print_formula(f.left, _FORMULA_PREC['and'])} & {print_formula(f.right, _FORMULA_PREC['and'])}"
        return s if prec < _FORMULA_PREC["and"] else f"({s})"
    if isinstance(f, Or):
        s = f"{print_formula(f.left, _FORMULA_PREC['or'])} | {print_formula(f.right, _FORMULA_PREC['or'])}"
        return s if prec < _FORMULA_PREC["or"] else f"({s})"
    if isinstance(f, Imply):
        s = f"{print_formula(f.left, _FORMULA_PREC['imply'] + 1)} -> {print_formula(f.right, _FORMULA_PREC['imply'])}"
        return s if prec < _FORMULA_PREC["imply"] else f"({s})"
    if isinstance(f, Equiv):
        s = f"{print_formula(f.left, _FORMULA_PREC['equiv'] + 1)} <-> {print_formula(f.right, _FORMULA_PREC['equiv'] + 1)}"
        return s if prec < _FORMULA_PREC["equiv"] else f"({s})"
    if isinstance(f, Forall):
        return f"\\forall {f.var} ({print_formula(f.body)})"
    if isinstance(f, Exists):
        return f"\\exists {f.var} ({print_formula(f.body)})"
    if isinstance(f, Box):
        return f"[{print_game(f.game)}] ({print_formula(f.body)})"
    if isinstance(f, Diamond):
        return f"<{print_game(f.game)}> ({print_formula(f.body)})"
    raise TypeError(f"unknown formula {f!r}")


_GAME_PREC = {"choice": 1, "seq": 2, "postfix": 3}


def print_game(g: HybridGame, prec: int = 0) -> str:
    if isinstance(g, Assign):
        return f"{g.var} := {print_term(g.term)}"
    if isinstance(g, AssignAny):
        return f"{g.var} := *"
    if isinstance(g, Test):
        return f"?{print_formula(g.cond, _FORMULA_PREC['unary'])}"
    if isinstance(g, ODE):
        eqs = ", ".join(f"{v}' = {print_term(rhs)}" for v, rhs in g.equations)
        return f"{{{eqs} & {print_formula(g.domain)}}}"
    if isinstance(g, Seq):
        s = f"{print_game(g.first, _GAME_PREC['seq'])}; {print_game(g.second, _GAME_PREC['seq'])}"
        return s if prec < _GAME_PREC["seq"] else f"({s})"
    if isinstance(g, Choice):
        s = f"{print_game(g.left, _GAME_PREC['choice'] + 1)} ++ {print_game(g.right, _GAME_PREC['choice'])}"
        return s if prec < _GAME_PREC["choice"] else f"({s})"
    if isinstance(g, Loop):
        return f"{print_game(g.body, _GAME_PREC['postfix'])}*"
    if isinstance(g, Dual):
        return f"{print_game(g.body, _GAME_PREC['postfix'])}^d"
    raise TypeError(f"unknown game {g!r}")


def print_problem(p: ProblemSketch) -> str:
    lines = [f"problem {p.name} {{"]
    lines.append(f"  assum: {print_formula(p.assum)};")
    for name, prog in p.actions:
        lines.append(f"  action {name}: {print_game(prog)};")
    eqs = ", ".join(f"{v}' = {print_term(rhs)}" for v, rhs in p.plant_odes)
    lines.append(f"  plant: {{ {eqs} & {print_formula(p.domain)} }};")
    lines.append(f"  cycle: {print_term(p.cycle_bound)};")
    lines.append(f"  safe: {print_formula(p.safe)};")
    for h in p.hints:
        lines.append(f"  hint: {print_formula(h)};")
    for e in p.conserved:
        lines.append(f"  conserved: {print_term(e)};")
    lines.append("}")
    return "\n".join(lines) + "\n"
