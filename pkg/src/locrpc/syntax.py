"""Source syntax of the located lambda calculus: AST, parser, printer."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Iterator


class Location(enum.Enum):
    CLIENT = "c"
    SERVER = "s"

    def __lt__(self, other: Location) -> bool:
        return self is Location.CLIENT and other is Location.SERVER

    def __str__(self) -> str:
        return self.value

    @property
    def other(self) -> Location:
        return Location.SERVER if self is Location.CLIENT else Location.CLIENT

    @staticmethod
    def parse(text: str) -> Location:
        match text:
            case "c" | "client":
                return Location.CLIENT
            case "s" | "server":
                return Location.SERVER
        raise ValueError(f"unknown location {text!r}")


CLIENT = Location.CLIENT
SERVER = Location.SERVER


@dataclass(frozen=True)
class Unit:
    def __repr__(self) -> str:
        return "Unit"


UNIT = Unit()

Literal = int | str | Unit


def show_literal(lit: Literal) -> str:
    match lit:
        case Unit():
            return "()"
        case bool():
            raise TypeError("booleans are not literals")
        case int():
            return str(lit)
        case str():
            return json.dumps(lit, ensure_ascii=False)
    raise TypeError(f"not a literal: {lit!r}")


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int
    line: int = 1
    col: int = 1

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


# Terms. Spans never take part in equality or hashing.


@dataclass(frozen=True)
class Var:
    name: str
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Lam:
    loc: Location
    param: str
    body: SrcTerm
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class App:
    fun: SrcTerm
    arg: SrcTerm
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Const:
    lit: Literal
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


SrcTerm = Var | Lam | App | Const


def is_value(term: SrcTerm) -> bool:
    return isinstance(term, (Var, Lam, Const))


class ParseError(ValueError):
    """Malformed source text. Reported as a SyntaxError diagnostic."""

    kind = "SyntaxError"

    def __init__(self, message: str, span: SourceSpan):
        super().__init__(message)
        self.message = message
        self.span = span


# ---------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>--[^\n]*)
  | (?P<lam>\\[cs](?![A-Za-z0-9_']))
  | (?P<ident>[a-z][A-Za-z0-9_']*)
  | (?P<int>-?[0-9]+)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<punct>[().])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    span: SourceSpan


def _tokens(source: str) -> Iterator[_Tok]:
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            span = SourceSpan(pos, pos + 1, line, pos - line_start + 1)
            raise ParseError(f"unexpected character {source[pos]!r}", span)
        kind = m.lastgroup
        text = m.group()
        span = SourceSpan(pos, m.end(), line, pos - line_start + 1)
        if kind == "ws":
            for i, ch in enumerate(text):
                if ch == "\n":
                    line += 1
                    line_start = pos + i + 1
        elif kind != "comment":
            yield _Tok(kind, text, span)
        pos = m.end()
    yield _Tok("eof", "", SourceSpan(pos, pos, line, pos - line_start + 1))


# ---------------------------------------------------------------- parser


class _Parser:
    def __init__(self, source: str):
        self.toks = list(_tokens(source))
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            want = repr(text) if text else kind
            got = repr(t.text) if t.text else "end of input"
            raise ParseError(f"expected {want}, found {got}", t.span)
        return self.advance()

    def starts_atom(self) -> bool:
        t = self.tok
        return t.kind in ("ident", "int", "str") or (t.kind == "punct" and t.text == "(")

    def term(self) -> SrcTerm:
        if self.tok.kind == "lam":
            return self.lam()
        head = self.atom()
        while True:
            if self.starts_atom():
                arg = self.atom()
            elif self.tok.kind == "lam":
                arg = self.lam()
            else:
                return head
            head = App(head, arg, _join(head.span, arg.span))

    def lam(self) -> Lam:
        start = self.advance()
        loc = Location.parse(start.text[1])
        param = self.expect("ident").text
        self.expect("punct", ".")
        body = self.term()
        return Lam(loc, param, body, _join(start.span, body.span))

    def atom(self) -> SrcTerm:
        t = self.tok
        match t.kind:
            case "ident":
                self.advance()
                return Var(t.text, t.span)
            case "int":
                self.advance()
                return Const(int(t.text), t.span)
            case "str":
                self.advance()
                try:
                    value = json.loads(t.text)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"bad string literal: {exc.msg}", t.span) from None
                return Const(value, t.span)
            case "punct" if t.text == "(":
                self.advance()
                if self.tok.kind == "punct" and self.tok.text == ")":
                    close = self.advance()
                    return Const(UNIT, _join(t.span, close.span))
                inner = self.term()
                self.expect("punct", ")")
                return inner
        got = repr(t.text) if t.text else "end of input"
        raise ParseError(f"expected a term, found {got}", t.span)


def _join(a: SourceSpan | None, b: SourceSpan | None) -> SourceSpan | None:
    if a is None or b is None:
        return a or b
    return SourceSpan(a.start, b.end, a.line, a.col)


def parse(source: str) -> SrcTerm:
    """Parse a complete program. Raises ParseError on malformed input."""
    p = _Parser(source)
    try:
        term = p.term()
    except RecursionError:
        raise ParseError("nesting too deep", p.tok.span) from None
    if p.tok.kind != "eof":
        raise ParseError(f"unexpected {p.tok.text!r} after term", p.tok.span)
    return term


# ---------------------------------------------------------------- printing


def pretty(term: SrcTerm) -> str:
    match term:
        case Var(name):
            return name
        case Const(lit):
            return show_literal(lit)
        case Lam(loc, param, body):
            return f"\\{loc.value} {param}. {pretty(body)}"
        case App(fun, arg):
            left = f"({pretty(fun)})" if isinstance(fun, Lam) else pretty(fun)
            right = f"({pretty(arg)})" if isinstance(arg, (App, Lam)) else pretty(arg)
            return f"{left} {right}"
    raise TypeError(f"not a term: {term!r}")


def dump(term: SrcTerm) -> str:
    """Constructor-style rendering of the AST."""
    match term:
        case Var(name):
            return f"Var {name}"
        case Const(lit):
            return f"Const {show_literal(lit)}"
        case Lam(loc, param, body):
            where = "Client" if loc is CLIENT else "Server"
            return f"Lam({where}, {param}, {dump(body)})"
        case App(fun, arg):
            return f"App({dump(fun)}, {dump(arg)})"
    raise TypeError(f"not a term: {term!r}")


# ---------------------------------------------------------------- binding


def free_vars(term: SrcTerm) -> set[str]:
    match term:
        case Var(name):
            return {name}
        case Const():
            return set()
        case Lam(_, param, body):
            return free_vars(body) - {param}
        case App(fun, arg):
            return free_vars(fun) | free_vars(arg)
    raise TypeError(f"not a term: {term!r}")


def all_names(term: SrcTerm) -> set[str]:
    match term:
        case Var(name):
            return {name}
        case Const():
            return set()
        case Lam(_, param, body):
            return all_names(body) | {param}
        case App(fun, arg):
            return all_names(fun) | all_names(arg)
    raise TypeError(f"not a term: {term!r}")


def fresh_name(base: str, avoid: set[str]) -> str:
    stem = base.rstrip("0123456789") or "x"
    n = 2
    while f"{stem}{n}" in avoid:
        n += 1
    return f"{stem}{n}"


def subst(term: SrcTerm, name: str, value: SrcTerm) -> SrcTerm:
    """Capture-avoiding substitution term{value/name}."""
    match term:
        case Var(n):
            return value if n == name else term
        case Const():
            return term
        case App(fun, arg):
            return App(subst(fun, name, value), subst(arg, name, value), term.span)
        case Lam(loc, param, body):
            if param == name:
                return term
            fv = free_vars(value)
            if param in fv and name in free_vars(body):
                new = fresh_name(param, fv | all_names(body) | {name})
                body = subst(body, param, Var(new))
                param = new
            return Lam(loc, param, subst(body, name, value), term.span)
    raise TypeError(f"not a term: {term!r}")


def alpha_eq(a: SrcTerm, b: SrcTerm) -> bool:
    """Equality up to consistent renaming of bound variables."""

    def go(x: SrcTerm, y: SrcTerm, ex: dict[str, int], ey: dict[str, int], depth: int) -> bool:
        match x, y:
            case Var(n), Var(m):
                return ex.get(n, n) == ey.get(m, m) if (n in ex) == (m in ey) else False
            case Const(l1), Const(l2):
                return type(l1) is type(l2) and l1 == l2
            case Lam(la, pa, ba), Lam(lb, pb, bb):
                if la is not lb:
                    return False
                return go(ba, bb, {**ex, pa: depth}, {**ey, pb: depth}, depth + 1)
            case App(f1, a1), App(f2, a2):
                return go(f1, f2, ex, ey, depth) and go(a1, a2, ex, ey, depth)
        return False

    return go(a, b, {}, {}, 0)


def size(term: SrcTerm) -> int:
    match term:
        case Lam(_, _, body):
            return 1 + size(body)
        case App(fun, arg):
            return 1 + size(fun) + size(arg)
    return 1
