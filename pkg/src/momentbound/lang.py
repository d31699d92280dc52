"""Concrete syntax and AST for the analyzed language.

Programs are a set of parameterless functions over global real-valued
variables.  Statements: skip, tick(c), assignment, sampling, call, while,
probabilistic branch, conditional, sequencing.  Numeric literals are exact
rationals.  `#` starts a line comment; an optional `@pre(...)` line declares
a precondition on initial states.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


# Expressions


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Const(Expr):
    value: Fraction


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


def sub(a: Expr, b: Expr) -> Expr:
    """Sugar: a - b is a + (-1) * b."""
    return Add(a, Mul(Const(Fraction(-1)), b))


# Conditions


@dataclass(frozen=True)
class Cond:
    pass


@dataclass(frozen=True)
class CTrue(Cond):
    pass


@dataclass(frozen=True)
class Not(Cond):
    inner: Cond


@dataclass(frozen=True)
class And(Cond):
    left: Cond
    right: Cond


@dataclass(frozen=True)
class Le(Cond):
    left: Expr
    right: Expr


def lt(a: Expr, b: Expr) -> Cond:
    return Not(Le(b, a))


def ge(a: Expr, b: Expr) -> Cond:
    return Le(b, a)


def gt(a: Expr, b: Expr) -> Cond:
    return Not(Le(a, b))


# Distributions


@dataclass(frozen=True)
class Dist:
    pass


@dataclass(frozen=True)
class Uniform(Dist):
    a: Fraction
    b: Fraction


@dataclass(frozen=True)
class Discrete(Dist):
    support: tuple[tuple[Fraction, Fraction], ...]  # (value, probability)


# Statements; `loc` is a unique id used to key per-location analysis results
# and is ignored by structural equality.


@dataclass(frozen=True)
class Stmt:
    pass


def _meta():
    return field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Skip(Stmt):
    loc: int = _meta()


@dataclass(frozen=True)
class Tick(Stmt):
    cost: Fraction
    loc: int = _meta()


@dataclass(frozen=True)
class Assign(Stmt):
    var: str
    expr: Expr
    loc: int = _meta()


@dataclass(frozen=True)
class Sample(Stmt):
    var: str
    dist: Dist
    loc: int = _meta()


@dataclass(frozen=True)
class Call(Stmt):
    fun: str
    loc: int = _meta()


@dataclass(frozen=True)
class While(Stmt):
    cond: Cond
    body: Stmt
    loc: int = _meta()


@dataclass(frozen=True)
class Prob(Stmt):
    p: Fraction
    left: Stmt
    right: Stmt
    loc: int = _meta()


@dataclass(frozen=True)
class If(Stmt):
    cond: Cond
    then: Stmt
    els: Stmt
    loc: int = _meta()


@dataclass(frozen=True)
class Seq(Stmt):
    first: Stmt
    second: Stmt
    loc: int = _meta()


@dataclass(frozen=True)
class Program:
    decls: dict[str, Stmt]
    main: Stmt
    vars: tuple[str, ...]
    pre: Cond

    def functions(self) -> dict[str, Stmt]:
        return dict(self.decls)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    where: str

    def __str__(self):
        return f"{self.code} at {self.where}: {self.message}"


# Tokenizer

_SYMBOLS = [":=", "<=", ">=", "<", ">", "(", ")", ",", ";", "~", "+", "-", "*", "@", ":"]
_KEYWORDS = {
    "func", "begin", "end", "while", "do", "od", "if", "prob", "then", "else",
    "fi", "tick", "call", "skip", "true", "not", "and", "uniform", "discrete",
    "pre",
}


@dataclass
class _Token:
    kind: str  # 'ident', 'kw', 'num', 'sym', 'eof'
    text: str
    line: int
    col: int
    value: Optional[Fraction] = None


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            start = i
            start_col = col
            while i < n and text[i].isdigit():
                i += 1
            if i < n and text[i] == "." and i + 1 < n and text[i + 1].isdigit():
                i += 1
                while i < n and text[i].isdigit():
                    i += 1
                raw = text[start:i]
                whole, frac = raw.split(".")
                value = Fraction(int(whole + frac), 10 ** len(frac))
            elif i < n and text[i] == "/" and i + 1 < n and text[i + 1].isdigit():
                i += 1
                dstart = i
                while i < n and text[i].isdigit():
                    i += 1
                value = Fraction(int(text[start:dstart - 1]), int(text[dstart:i]))
                raw = text[start:i]
            else:
                raw = text[start:i]
                value = Fraction(int(raw))
            col += i - start
            tokens.append(_Token("num", raw, line, start_col, value))
            continue
        if ch.isalpha() or ch == "_":
            start = i
            start_col = col
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            word = text[start:i]
            col += i - start
            kind = "kw" if word in _KEYWORDS else "ident"
            tokens.append(_Token(kind, word, line, start_col))
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(_Token("sym", sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0
        self.loc_counter = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def error(self, message: str) -> ParseError:
        t = self.peek()
        return ParseError(message, t.line, t.col)

    def expect(self, kind: str, text: str | None = None) -> _Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            raise self.error(f"expected {want!r}, found {t.text!r}")
        return self.next()

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def fresh_loc(self) -> int:
        self.loc_counter += 1
        return self.loc_counter

    # program := [@pre(cond)] funcdecl+

    def parse_program(self) -> Program:
        pre: Cond = CTrue()
        decls: dict[str, Stmt] = {}
        order: list[str] = []
        while not self.at("eof"):
            if self.at("sym", "@"):
                self.next()
                self.expect("kw", "pre")
                self.expect("sym", "(")
                pre = self.parse_cond()
                self.expect("sym", ")")
                continue
            name, body = self.parse_funcdecl()
            if name in decls:
                raise self.error(f"duplicate function {name!r}")
            decls[name] = body
            order.append(name)
        if "main" not in decls:
            raise ParseError("program has no main function", 1, 1)
        main = decls.pop("main")
        order.remove("main")
        program = Program(decls=decls, main=main, vars=(), pre=pre)
        variables = _collect_vars(program, order)
        program = Program(decls=decls, main=main, vars=variables, pre=pre)
        _check_calls(self, program)
        return program

    def parse_funcdecl(self) -> tuple[str, Stmt]:
        self.expect("kw", "func")
        name = self.expect("ident").text
        self.expect("sym", "(")
        self.expect("sym", ")")
        self.expect("kw", "begin")
        body = self.parse_stmt_seq(("end",))
        self.expect("kw", "end")
        return name, body

    def parse_stmt_seq(self, stop: tuple[str, ...]) -> Stmt:
        stmts = [self.parse_stmt()]
        while self.at("sym", ";"):
            self.next()
            stmts.append(self.parse_stmt())
        if not (self.peek().kind == "kw" and self.peek().text in stop):
            raise self.error(f"expected one of {stop} or ';'")
        seq = stmts[-1]
        for s in reversed(stmts[:-1]):
            seq = Seq(s, seq, loc=self.fresh_loc())
        return seq

    def parse_stmt(self) -> Stmt:
        t = self.peek()
        if t.kind == "kw":
            if t.text == "skip":
                self.next()
                return Skip(loc=self.fresh_loc())
            if t.text == "tick":
                self.next()
                self.expect("sym", "(")
                c = self.parse_signed_number()
                self.expect("sym", ")")
                return Tick(c, loc=self.fresh_loc())
            if t.text == "call":
                self.next()
                f = self.expect("ident").text
                return Call(f, loc=self.fresh_loc())
            if t.text == "while":
                self.next()
                cond = self.parse_cond()
                self.expect("kw", "do")
                body = self.parse_stmt_seq(("od",))
                self.expect("kw", "od")
                return While(cond, body, loc=self.fresh_loc())
            if t.text == "if":
                self.next()
                if self.at("kw", "prob"):
                    self.next()
                    self.expect("sym", "(")
                    p = self.parse_signed_number()
                    self.expect("sym", ")")
                    if not (0 <= p <= 1):
                        raise self.error(f"branch probability {p} outside [0, 1]")
                    self.expect("kw", "then")
                    left = self.parse_stmt_seq(("else", "fi"))
                    right: Stmt = Skip(loc=self.fresh_loc())
                    if self.at("kw", "else"):
                        self.next()
                        right = self.parse_stmt_seq(("fi",))
                    self.expect("kw", "fi")
                    return Prob(p, left, right, loc=self.fresh_loc())
                cond = self.parse_cond()
                self.expect("kw", "then")
                then = self.parse_stmt_seq(("else", "fi"))
                els: Stmt = Skip(loc=self.fresh_loc())
                if self.at("kw", "else"):
                    self.next()
                    els = self.parse_stmt_seq(("fi",))
                self.expect("kw", "fi")
                return If(cond, then, els, loc=self.fresh_loc())
        if t.kind == "ident":
            name = self.next().text
            if self.at("sym", ":="):
                self.next()
                return Assign(name, self.parse_expr(), loc=self.fresh_loc())
            if self.at("sym", "~"):
                self.next()
                return Sample(name, self.parse_dist(), loc=self.fresh_loc())
            raise self.error("expected ':=' or '~' after variable")
        raise self.error(f"expected a statement, found {t.text!r}")

    def parse_dist(self) -> Dist:
        t = self.peek()
        if self.at("kw", "uniform"):
            self.next()
            self.expect("sym", "(")
            a = self.parse_signed_number()
            self.expect("sym", ",")
            b = self.parse_signed_number()
            self.expect("sym", ")")
            if not a < b:
                raise ParseError("uniform requires a < b", t.line, t.col)
            return Uniform(a, b)
        if self.at("kw", "discrete"):
            self.next()
            self.expect("sym", "(")
            support = []
            while True:
                v = self.parse_signed_number()
                self.expect("sym", ":")
                p = self.parse_signed_number()
                support.append((v, p))
                if self.at("sym", ","):
                    self.next()
                    continue
                break
            self.expect("sym", ")")
            if any(p < 0 for _, p in support):
                raise ParseError("discrete probabilities must be nonnegative", t.line, t.col)
            if sum(p for _, p in support) != 1:
                raise ParseError("discrete probabilities must sum to 1", t.line, t.col)
            return Discrete(tuple(support))
        raise self.error("expected a distribution")

    def parse_signed_number(self) -> Fraction:
        negative = False
        if self.at("sym", "-"):
            self.next()
            negative = True
        t = self.expect("num")
        assert t.value is not None
        return -t.value if negative else t.value

    # cond := atom ('and' atom)*

    def parse_cond(self) -> Cond:
        left = self.parse_cond_atom()
        while self.at("kw", "and"):
            self.next()
            left = And(left, self.parse_cond_atom())
        return left

    def parse_cond_atom(self) -> Cond:
        if self.at("kw", "true"):
            self.next()
            return CTrue()
        if self.at("kw", "not"):
            self.next()
            return Not(self.parse_cond_atom())
        if self.at("sym", "("):
            # Could be a parenthesized condition or expression comparison;
            # conditions always end at a comparison operator, so try cond.
            save = self.pos
            self.next()
            try:
                inner = self.parse_cond()
                self.expect("sym", ")")
                return inner
            except ParseError:
                self.pos = save
        left = self.parse_expr()
        t = self.peek()
        if t.kind == "sym" and t.text in ("<=", "<", ">=", ">"):
            self.next()
            right = self.parse_expr()
            if t.text == "<=":
                return Le(left, right)
            if t.text == "<":
                return lt(left, right)
            if t.text == ">=":
                return ge(left, right)
            return gt(left, right)
        raise self.error("expected a comparison operator")

    # expr := term (('+'|'-') term)* ; term := factor ('*' factor)*

    def parse_expr(self) -> Expr:
        left = self.parse_term()
        while self.at("sym", "+") or self.at("sym", "-"):
            op = self.next().text
            right = self.parse_term()
            left = Add(left, right) if op == "+" else sub(left, right)
        return left

    def parse_term(self) -> Expr:
        left = self.parse_factor()
        while self.at("sym", "*"):
            self.next()
            left = Mul(left, self.parse_factor())
        return left

    def parse_factor(self) -> Expr:
        if self.at("sym", "-"):
            self.next()
            inner = self.parse_factor()
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Mul(Const(Fraction(-1)), inner)
        if self.at("sym", "("):
            self.next()
            e = self.parse_expr()
            self.expect("sym", ")")
            return e
        if self.at("num"):
            t = self.next()
            assert t.value is not None
            return Const(t.value)
        if self.at("ident"):
            return Var(self.next().text)
        raise self.error("expected an expression")


def _collect_vars(program: Program, decl_order: list[str]) -> tuple[str, ...]:
    seen: list[str] = []

    def note(name: str):
        if name not in seen:
            seen.append(name)

    def walk_expr(e: Expr):
        if isinstance(e, Var):
            note(e.name)
        elif isinstance(e, (Add, Mul)):
            walk_expr(e.left)
            walk_expr(e.right)

    def walk_cond(c: Cond):
        if isinstance(c, Not):
            walk_cond(c.inner)
        elif isinstance(c, And):
            walk_cond(c.left)
            walk_cond(c.right)
        elif isinstance(c, Le):
            walk_expr(c.left)
            walk_expr(c.right)

    def walk_stmt(s: Stmt):
        if isinstance(s, Assign):
            note(s.var)
            walk_expr(s.expr)
        elif isinstance(s, Sample):
            note(s.var)
        elif isinstance(s, While):
            walk_cond(s.cond)
            walk_stmt(s.body)
        elif isinstance(s, Prob):
            walk_stmt(s.left)
            walk_stmt(s.right)
        elif isinstance(s, If):
            walk_cond(s.cond)
            walk_stmt(s.then)
            walk_stmt(s.els)
        elif isinstance(s, Seq):
            walk_stmt(s.first)
            walk_stmt(s.second)

    walk_cond(program.pre)
    for name in decl_order:
        walk_stmt(program.decls[name])
    walk_stmt(program.main)
    return tuple(seen)


def _check_calls(parser: _Parser, program: Program):
    def walk(s: Stmt):
        if isinstance(s, Call) and s.fun not in program.decls:
            raise ParseError(f"call to undeclared function {s.fun!r}", 0, 0)
        for child in _children(s):
            walk(child)

    for body in program.decls.values():
        walk(body)
    walk(program.main)


def _children(s: Stmt) -> Iterator[Stmt]:
    if isinstance(s, While):
        yield s.body
    elif isinstance(s, Prob):
        yield s.left
        yield s.right
    elif isinstance(s, If):
        yield s.then
        yield s.els
    elif isinstance(s, Seq):
        yield s.first
        yield s.second


def parse_program(text: str) -> Program:
    return _Parser(_tokenize(text)).parse_program()


def iter_stmts(s: Stmt) -> Iterator[Stmt]:
    """All statements in the subtree rooted at s, preorder."""
    yield s
    for child in _children(s):
        yield from iter_stmts(child)


def program_stmts(p: Program) -> Iterator[Stmt]:
    for body in p.decls.values():
        yield from iter_stmts(body)
    yield from iter_stmts(p.main)


def cond_vars(c: Cond) -> set[str]:
    if isinstance(c, Not):
        return cond_vars(c.inner)
    if isinstance(c, And):
        return cond_vars(c.left) | cond_vars(c.right)
    if isinstance(c, Le):
        return expr_vars(c.left) | expr_vars(c.right)
    return set()


def expr_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, (Add, Mul)):
        return expr_vars(e.left) | expr_vars(e.right)
    return set()


def validate(p: Program) -> list[Diagnostic]:
    """Check the program invariants; an empty list means all hold."""
    out: list[Diagnostic] = []
    declared = set(p.vars)

    def where(s: Stmt) -> str:
        return f"stmt#{s.loc}"

    def check_stmt(s: Stmt):
        if isinstance(s, Call) and s.fun not in p.decls:
            out.append(Diagnostic("UndefinedFunction", f"function {s.fun!r} is not declared", where(s)))
        if isinstance(s, Prob) and not (0 <= s.p <= 1):
            out.append(Diagnostic("ProbabilityOutOfRange", f"probability {s.p} outside [0, 1]", where(s)))
        if isinstance(s, Sample):
            d = s.dist
            if isinstance(d, Uniform) and not d.a < d.b:
                out.append(Diagnostic("InvalidUniform", "uniform requires a < b", where(s)))
            if isinstance(d, Discrete):
                if not d.support:
                    out.append(Diagnostic("InvalidDiscrete", "empty support", where(s)))
                elif any(prob < 0 for _, prob in d.support):
                    out.append(Diagnostic("InvalidDiscrete", "negative probability", where(s)))
                elif sum(prob for _, prob in d.support) != 1:
                    out.append(Diagnostic("InvalidDiscrete", "probabilities do not sum to 1", where(s)))
        if isinstance(s, Assign):
            missing = expr_vars(s.expr) - declared
            if missing or s.var not in declared:
                out.append(Diagnostic("UnknownVariable", f"variables {missing or {s.var}} not in program variable set", where(s)))
        if isinstance(s, (While, If)):
            missing = cond_vars(s.cond) - declared
            if missing:
                out.append(Diagnostic("UnknownVariable", f"variables {missing} not in program variable set", where(s)))

    for stmt in program_stmts(p):
        check_stmt(stmt)
    missing_pre = cond_vars(p.pre) - declared
    if missing_pre:
        out.append(Diagnostic("UnknownVariable", f"precondition mentions {missing_pre}", "@pre"))
    return out


# Pretty printer; parse(pretty_print(p)) is structurally equal to p.


def pretty_print(p: Program) -> str:
    lines: list[str] = []
    if not isinstance(p.pre, CTrue):
        lines.append(f"@pre({_pp_cond(p.pre)})")
    for name, body in p.decls.items():
        lines.append(f"func {name}() begin")
        lines.extend(_pp_stmt(body, 1))
        lines.append("end")
    lines.append("func main() begin")
    lines.extend(_pp_stmt(p.main, 1))
    lines.append("end")
    return "\n".join(lines) + "\n"


def _pp_stmt(s: Stmt, indent: int) -> list[str]:
    pad = "  " * indent
    if isinstance(s, Seq):
        first = _pp_stmt(s.first, indent)
        first[-1] += ";"
        return first + _pp_stmt(s.second, indent)
    if isinstance(s, Skip):
        return [pad + "skip"]
    if isinstance(s, Tick):
        return [pad + f"tick({_pp_frac(s.cost)})"]
    if isinstance(s, Assign):
        return [pad + f"{s.var} := {_pp_expr(s.expr, 0)}"]
    if isinstance(s, Sample):
        return [pad + f"{s.var} ~ {_pp_dist(s.dist)}"]
    if isinstance(s, Call):
        return [pad + f"call {s.fun}"]
    if isinstance(s, While):
        return [pad + f"while {_pp_cond(s.cond)} do"] + _pp_stmt(s.body, indent + 1) + [pad + "od"]
    if isinstance(s, Prob):
        head = [pad + f"if prob({_pp_frac(s.p)}) then"]
        mid = _pp_stmt(s.left, indent + 1)
        tail = [pad + "else"] + _pp_stmt(s.right, indent + 1) + [pad + "fi"]
        return head + mid + tail
    if isinstance(s, If):
        head = [pad + f"if {_pp_cond(s.cond)} then"]
        mid = _pp_stmt(s.then, indent + 1)
        tail = [pad + "else"] + _pp_stmt(s.els, indent + 1) + [pad + "fi"]
        return head + mid + tail
    raise TypeError(f"unknown statement {s!r}")


def _pp_frac(x: Fraction) -> str:
    return str(x)


def _pp_expr(e: Expr, prec: int) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Const):
        s = _pp_frac(e.value)
        return s if e.value >= 0 or prec == 0 else f"({s})"
    if isinstance(e, Add):
        s = f"{_pp_expr(e.left, 1)} + {_pp_expr(e.right, 1)}"
        return f"({s})" if prec > 1 else s
    if isinstance(e, Mul):
        s = f"{_pp_expr(e.left, 2)} * {_pp_expr(e.right, 2)}"
        return f"({s})" if prec > 2 else s
    raise TypeError(f"unknown expression {e!r}")


def _pp_cond(c: Cond) -> str:
    if isinstance(c, CTrue):
        return "true"
    if isinstance(c, Not):
        inner = _pp_cond(c.inner)
        if isinstance(c.inner, (And,)):
            inner = f"({inner})"
        return f"not {inner}"
    if isinstance(c, And):
        return f"{_pp_cond(c.left)} and {_pp_cond(c.right)}"
    if isinstance(c, Le):
        return f"{_pp_expr(c.left, 1)} <= {_pp_expr(c.right, 1)}"
    raise TypeError(f"unknown condition {c!r}")


def _pp_dist(d: Dist) -> str:
    if isinstance(d, Uniform):
        return f"uniform({_pp_frac(d.a)}, {_pp_frac(d.b)})"
    if isinstance(d, Discrete):
        inner = ", ".join(f"{_pp_frac(v)}: {_pp_frac(p)}" for v, p in d.support)
        return f"discrete({inner})"
    raise TypeError(f"unknown distribution {d!r}")


def expr_to_poly(e: Expr):
    """Convert an expression to an exact polynomial."""
    from .poly import Polynomial

    if isinstance(e, Var):
        return Polynomial.var(e.name)
    if isinstance(e, Const):
        return Polynomial.constant(e.value)
    if isinstance(e, Add):
        return expr_to_poly(e.left) + expr_to_poly(e.right)
    if isinstance(e, Mul):
        return expr_to_poly(e.left) * expr_to_poly(e.right)
    raise TypeError(f"unknown expression {e!r}")
