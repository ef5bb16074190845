"""Line-oriented LL(1) parser for ``.epp`` protocol scripts.

Grammar (one statement per line, ``#`` starts a comment)::

    script    := { statement }
    statement := "PROTOCOL" name
               | "PARAM" name "=" number
               | "DISTRIBUTE" count
               | "DARKBELL"
               | "TEST" basis count
               | "REPEAT" count "{"  { statement }  "}"
               | "BICNOT" ("Z" | "X") [ "random" | "fixed" ]
               | "MEASURE" ("LOCAL" basis [basis] | "COLLECTIVE" basis) "ON" role
               | "MEASURE" "BELL" "READ"
               | "KEEPIF" [ "ALICE" | "BOB" ] bit
               | "DISCARD"
               | "KEY" basis
               | "GATE" NAME arity
    count     := integer | name bound by PARAM
    role      := "destination" | "test" | "trash"
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from ..errors import ProtocolSyntaxError
from . import ast

_TOKEN = re.compile(r"[{}=]|[^\s{}=]+")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
BASES = ("X", "Y", "Z")
KEYWORDS = ("PROTOCOL", "PARAM", "DISTRIBUTE", "DARKBELL", "TEST", "REPEAT", "BICNOT",
            "MEASURE", "KEEPIF", "DISCARD", "KEY", "GATE")


@dataclass(frozen=True)
class Token:
    text: str
    line: int
    column: int


class _Parser:
    def __init__(self, source: str):
        self.lines: list[list[Token]] = []
        for lineno, raw in enumerate(source.splitlines(), start=1):
            text = raw.split("#", 1)[0]
            toks = [Token(m.group(), lineno, m.start() + 1) for m in _TOKEN.finditer(text)]
            if toks:
                self.lines.append(toks)
        self.pos = 0
        self.name: str | None = None
        self.params: dict[str, int | float] = {}
        self.used: list[Token] = []

    # line cursor -----------------------------------------------------------

    def _line(self) -> list[Token] | None:
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def parse(self) -> ast.ProtocolSpec:
        steps = self._block(closing=False)
        if not steps:
            raise ProtocolSyntaxError("no steps")
        for tok in self.used:
            if tok.text not in self.params:
                raise ProtocolSyntaxError(f"unbound parameter {tok.text!r}", tok.line, tok.column)
        return ast.ProtocolSpec(self.name or "protocol", tuple(steps), dict(self.params))

    def _block(self, closing: bool, opener: Token | None = None) -> list[ast.Step]:
        steps: list[ast.Step] = []
        while True:
            toks = self._line()
            if toks is None:
                if closing:
                    raise ProtocolSyntaxError("unterminated REPEAT block", opener.line, opener.column, ("}",))
                return steps
            if toks[0].text == "}":
                if not closing:
                    raise ProtocolSyntaxError("unmatched '}'", toks[0].line, toks[0].column)
                _Line(toks[1:], toks[0]).end()
                self.pos += 1
                return steps
            self.pos += 1
            step = self._statement(toks, nested=closing)
            if step is not None:
                steps.append(step)

    def _statement(self, toks: list[Token], nested: bool) -> ast.Step | None:
        head = toks[0]
        ln = _Line(toks[1:], head)
        kw = head.text
        lineno = head.line
        if kw == "PROTOCOL":
            if nested:
                raise ProtocolSyntaxError("PROTOCOL is only allowed at top level", lineno, head.column)
            self.name = ln.name()
            ln.end()
            return None
        if kw == "PARAM":
            if nested:
                raise ProtocolSyntaxError("PARAM is only allowed at top level", lineno, head.column)
            name = ln.name()
            ln.expect("=")
            self.params[name] = ln.number()
            ln.end()
            return None
        if kw == "DISTRIBUTE":
            step = ast.Distribute(self._count(ln), line=lineno)
        elif kw == "DARKBELL":
            step = ast.DarkBell(line=lineno)
        elif kw == "TEST":
            basis = ln.choice(BASES)
            step = ast.TestSample(basis, self._count(ln), line=lineno)
        elif kw == "REPEAT":
            count = self._count(ln)
            ln.expect("{")
            ln.end()
            return ast.Repeat(count, tuple(self._block(closing=True, opener=head)), line=lineno)
        elif kw == "BICNOT":
            basis = ln.choice(("Z", "X"))
            grouping = ln.choice(ast.GROUPINGS) if ln.peek() else "random"
            step = ast.BiCnot(basis, grouping, line=lineno)
        elif kw == "MEASURE":
            step = self._measure(ln, lineno)
        elif kw == "KEEPIF":
            party = None
            if ln.peek() in ("ALICE", "BOB"):
                party = ln.choice(("ALICE", "BOB")).lower()
            step = ast.KeepIf(int(ln.choice(("0", "1"))), party, line=lineno)
        elif kw == "DISCARD":
            step = ast.Discard(line=lineno)
        elif kw == "KEY":
            step = ast.Key(ln.choice(BASES), line=lineno)
        elif kw == "GATE":
            name = ln.name()
            step = ast.Gate(name, ln.integer(), line=lineno)
        else:
            raise ProtocolSyntaxError(f"unknown step kind {kw!r}", lineno, head.column, KEYWORDS)
        ln.end()
        return step

    def _measure(self, ln: "_Line", lineno: int) -> ast.Measure:
        kind = ln.choice(("LOCAL", "COLLECTIVE", "BELL"))
        if kind == "BELL":
            ln.choice(("READ",))
            return ast.Measure("bell", line=lineno)
        basis = ln.choice(BASES)
        basis_b = None
        if kind == "LOCAL" and ln.peek() in BASES:
            basis_b = ln.choice(BASES)
            if basis_b == basis:
                basis_b = None
        ln.choice(("ON",))
        role = ln.choice(ast.ROLES)
        return ast.Measure(kind.lower(), basis, role, basis_b, line=lineno)

    def _count(self, ln: "_Line") -> ast.Count:
        tok = ln.take("count")
        if tok.text.isdigit():
            return int(tok.text)
        if not _NAME.match(tok.text):
            raise ProtocolSyntaxError(f"bad count {tok.text!r}", tok.line, tok.column, ("integer", "parameter name"))
        self.used.append(tok)
        return tok.text


class _Line:
    """Token cursor over the remainder of one statement."""

    def __init__(self, toks: list[Token], head: Token):
        self.toks = toks
        self.i = 0
        self.head = head

    def peek(self) -> str | None:
        return self.toks[self.i].text if self.i < len(self.toks) else None

    def _eol_column(self) -> int:
        last = self.toks[-1] if self.toks else self.head
        return last.column + len(last.text)

    def take(self, what: str, expected: tuple[str, ...] = ()) -> Token:
        if self.i >= len(self.toks):
            raise ProtocolSyntaxError(f"missing {what}", self.head.line, self._eol_column(), expected or (what,))
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def choice(self, options: tuple[str, ...]) -> str:
        tok = self.take(options[0] if len(options) == 1 else "keyword", options)
        if tok.text not in options:
            raise ProtocolSyntaxError(f"unexpected {tok.text!r}", tok.line, tok.column, options)
        return tok.text

    def expect(self, text: str) -> None:
        self.choice((text,))

    def name(self) -> str:
        tok = self.take("name")
        if not _NAME.match(tok.text):
            raise ProtocolSyntaxError(f"bad name {tok.text!r}", tok.line, tok.column, ("name",))
        return tok.text

    def integer(self) -> int:
        tok = self.take("integer")
        if not tok.text.isdigit():
            raise ProtocolSyntaxError(f"bad integer {tok.text!r}", tok.line, tok.column, ("integer",))
        return int(tok.text)

    def number(self) -> int | float:
        tok = self.take("number")
        try:
            return int(tok.text)
        except ValueError:
            pass
        try:
            return float(tok.text)
        except ValueError:
            raise ProtocolSyntaxError(f"bad number {tok.text!r}", tok.line, tok.column, ("number",)) from None

    def end(self) -> None:
        if self.i < len(self.toks):
            tok = self.toks[self.i]
            raise ProtocolSyntaxError(f"unexpected {tok.text!r}", tok.line, tok.column, ("end of line",))


def parse(source: str) -> ast.ProtocolSpec:
    """Parse a protocol script; raises :class:`ProtocolSyntaxError` with line/column."""
    return _Parser(source).parse()


def parse_file(path: str | Path) -> ast.ProtocolSpec:
    path = Path(path)
    spec = parse(path.read_text(encoding="utf-8"))
    if spec.name == "protocol":
        spec = ast.ProtocolSpec(path.stem, spec.steps, spec.parameters)
    return spec
