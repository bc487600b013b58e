"""Lexer and recursive-descent parser for STARQL.

Clause order is fixed::

    PREFIX*  [CREATE PULSE]  CREATE STREAM ... AS  (CONSTRUCT | SELECT)
    [FROM STATIC]  [WHERE]  [FROM STREAM]  [USING PULSE]  [SEQUENCE BY]  [HAVING]
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .. import expressions as ex
from .ast import (
    IRI,
    MS,
    Construct,
    GraphPattern,
    IndexTerm,
    PulseDecl,
    Quantified,
    SelectOutput,
    Sequencing,
    StarqlQuery,
    StaticSource,
    StreamSource,
    StringLiteral,
    Triple,
)


class StarqlSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


@dataclass(frozen=True)
class Token:
    kind: str  # name var iri pname num dur str sym eof
    text: str
    line: int
    column: int
    value: object = None


_UNITS = {"ms": "ms", "sec": "sec", "secs": "sec", "s": "sec", "min": "min", "mins": "min",
          "hour": "hour", "hours": "hour", "day": "day", "days": "day", "year": "year", "years": "year"}

_SPEC = [
    ("ws", r"[ \t\r]+"),
    ("nl", r"\n"),
    ("comment", r"#[^\n]*"),
    ("sym", r"<-|->|<=|>=|!="),
    ("iri", r"<[^\s<>\[\]]*>"),
    ("var", r"\?[A-Za-z_]\w*"),
    ("num", r"\d+(?:\.\d+)?(?:[eE][+-]?\d+)?[A-Za-z]*"),
    ("pname", r"(?:[A-Za-z_][\w\-]*)?:[A-Za-z_][\w\-]*|[A-Za-z_][\w\-]*:(?![\w])"),
    ("name", r"[A-Za-z_]\w*"),
    ("str", r"\"[^\"\n]*\"|'[^'\n]*'"),
    ("sym", r"[{}()\[\],.;=<>+\-*/:]"),
]
_MASTER = re.compile("|".join(f"(?P<{k}{i}>{p})" for i, (k, p) in enumerate(_SPEC)))


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _MASTER.match(text, pos)
        col = pos - line_start + 1
        if not m:
            raise StarqlSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = re.sub(r"\d+$", "", m.lastgroup)
        lexeme = m.group()
        pos = m.end()
        if kind == "nl":
            line += 1
            line_start = pos
            continue
        if kind in ("ws", "comment"):
            continue
        if kind == "num":
            num = re.match(r"\d+(?:\.\d+)?(?:[eE][+-]?\d+)?", lexeme).group()
            unit = lexeme[len(num):]
            if unit:
                if unit not in _UNITS:
                    raise StarqlSyntaxError(f"unknown unit {unit!r} (expected ms, sec, min, hour, day or year)",
                                            line, col)
                ms = float(num) * MS[_UNITS[unit]]
                if ms != int(ms):
                    raise StarqlSyntaxError(f"duration {lexeme} is not a whole number of milliseconds", line, col)
                toks.append(Token("dur", lexeme, line, col, int(ms)))
            else:
                toks.append(Token("num", lexeme, line, col, float(num)))
            continue
        toks.append(Token(kind, lexeme, line, col))
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


KEYWORDS = {
    "PREFIX", "CREATE", "PULSE", "STREAM", "AS", "CONSTRUCT", "SELECT", "GRAPH", "NOW", "FROM", "STATIC",
    "ONTOLOGY", "DATA", "WHERE", "USING", "SEQUENCE", "BY", "HAVING", "EXISTS", "FORALL", "IN", "AND",
    "OR", "NOT", "WITH", "START", "FREQUENCY",
}

# clause id -> position in the fixed order
_CLAUSES = ["FROM STATIC", "WHERE", "FROM STREAM", "USING PULSE", "SEQUENCE BY", "HAVING"]


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.pos = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        raise StarqlSyntaxError(message, tok.line, tok.column)

    def is_kw(self, word: str, tok: Token | None = None) -> bool:
        tok = tok or self.tok
        return tok.kind == "name" and tok.text.upper() == word

    def is_sym(self, s: str, tok: Token | None = None) -> bool:
        tok = tok or self.tok
        return tok.kind == "sym" and tok.text == s

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.pos += 1
        return t

    def expect_kw(self, word: str) -> Token:
        if not self.is_kw(word):
            self.error(f"expected {word}, got {self.describe()}")
        return self.advance()

    def expect_sym(self, s: str) -> Token:
        if not self.is_sym(s):
            self.error(f"expected {s!r}, got {self.describe()}")
        return self.advance()

    def describe(self, tok: Token | None = None) -> str:
        tok = tok or self.tok
        return "end of input" if tok.kind == "eof" else repr(tok.text)

    def name(self, what: str = "a name") -> str:
        t = self.tok
        if t.kind != "name" or t.text.upper() in KEYWORDS:
            self.error(f"expected {what}, got {self.describe()}")
        return self.advance().text

    def duration(self) -> int:
        t = self.tok
        if t.kind == "dur":
            return self.advance().value
        if t.kind == "num" and t.value == 0:
            self.advance()
            return 0
        self.error(f"expected a duration such as 1min, got {self.describe()}")

    # -- query
    def query(self) -> StarqlQuery:
        prefixes = []
        while self.is_kw("PREFIX"):
            prefixes.append(self.prefix())
        pulse = None
        if self.is_kw("CREATE") and self.is_kw("PULSE", self.peek()):
            pulse = self.pulse()
            if self.is_kw("CREATE") and self.is_kw("PULSE", self.peek()):
                self.error("duplicate clause CREATE PULSE")
        if self.is_kw("PREFIX"):
            self.error("PREFIX declarations must come first")
        self.expect_kw("CREATE")
        self.expect_kw("STREAM")
        out_name = self.name("a stream name")
        self.expect_kw("AS")
        output = self.output()
        parts: dict = {}
        last = -1
        while self.tok.kind != "eof":
            clause = self.clause_id()
            if clause in parts:
                self.error(f"duplicate clause {clause}")
            idx = _CLAUSES.index(clause)
            if idx < last:
                self.error(f"clause {clause} is out of order (it must come before {_CLAUSES[last]})")
            last = idx
            parts[clause] = self.clause(clause)
        return StarqlQuery(
            prefixes=tuple(prefixes),
            pulse=pulse,
            output_stream=out_name,
            output=output,
            static=parts.get("FROM STATIC"),
            where=parts.get("WHERE", ()),
            streams=parts.get("FROM STREAM", ()),
            using_pulse=parts.get("USING PULSE"),
            sequencing=parts.get("SEQUENCE BY"),
            having=parts.get("HAVING"),
        )

    def clause_id(self) -> str:
        t = self.tok
        if self.is_kw("FROM"):
            nxt = self.peek()
            if self.is_kw("STATIC", nxt):
                return "FROM STATIC"
            if self.is_kw("STREAM", nxt):
                return "FROM STREAM"
            self.error(f"expected STATIC or STREAM after FROM, got {self.describe(nxt)}", nxt)
        if self.is_kw("WHERE"):
            return "WHERE"
        if self.is_kw("USING"):
            return "USING PULSE"
        if self.is_kw("SEQUENCE"):
            return "SEQUENCE BY"
        if self.is_kw("HAVING"):
            return "HAVING"
        if self.is_kw("CONSTRUCT") or self.is_kw("SELECT"):
            self.error("duplicate clause " + t.text.upper())
        if self.is_kw("CREATE"):
            self.error("duplicate clause CREATE " + self.peek().text.upper())
        if t.kind == "name":
            self.error(f"unknown clause keyword {t.text!r}")
        self.error(f"expected a clause keyword, got {self.describe()}")

    def clause(self, clause: str):
        if clause == "FROM STATIC":
            self.advance()
            self.advance()
            self.expect_kw("ONTOLOGY")
            onto = self.iri_or_name()
            self.expect_sym(",")
            self.expect_kw("DATA")
            data = self.iri_or_name()
            return StaticSource(onto, data)
        if clause == "WHERE":
            self.advance()
            return self.braced_triples()
        if clause == "FROM STREAM":
            self.advance()
            self.advance()
            return self.streams()
        if clause == "USING PULSE":
            self.advance()
            self.expect_kw("PULSE")
            return self.name("a pulse name")
        if clause == "SEQUENCE BY":
            self.advance()
            self.expect_kw("BY")
            strategy = self.name("a sequencing strategy")
            self.expect_kw("AS")
            alias = self.name("a sequence name")
            return Sequencing(strategy, alias)
        self.advance()
        return self.having_expr()

    def prefix(self):
        self.expect_kw("PREFIX")
        t = self.tok
        if t.kind == "pname" and t.text.endswith(":"):
            name = self.advance().text[:-1]
        elif t.kind == "name":
            name = self.advance().text
            self.expect_sym(":")
        elif self.is_sym(":"):
            self.advance()
            name = ""
        else:
            self.error(f"expected a prefix name, got {self.describe()}")
        if self.tok.kind != "iri":
            self.error(f"expected an IRI in angle brackets, got {self.describe()}")
        return (name, self.advance().text)

    def pulse(self) -> PulseDecl:
        self.expect_kw("CREATE")
        self.expect_kw("PULSE")
        name = self.name("a pulse name")
        self.expect_kw("WITH")
        self.expect_kw("START")
        self.expect_sym("=")
        if self.is_kw("NOW"):
            self.advance()
            start = "NOW"
        elif self.tok.kind == "num":
            start = int(self.advance().value)
        elif self.tok.kind == "dur":
            start = self.advance().value
        else:
            self.error(f"expected NOW or a time, got {self.describe()}")
        self.expect_sym(",")
        self.expect_kw("FREQUENCY")
        self.expect_sym("=")
        return PulseDecl(name, start, self.duration())

    def output(self):
        if self.is_kw("CONSTRUCT"):
            self.advance()
            self.expect_kw("GRAPH")
            self.expect_kw("NOW")
            return Construct(self.braced_triples())
        if self.is_kw("SELECT"):
            self.advance()
            vars_ = []
            while True:
                t = self.tok
                if t.kind == "var":
                    vars_.append(ex.ValueVar(self.advance().text[1:]))
                elif t.kind == "name" and t.text.upper() not in KEYWORDS:
                    vars_.append(ex.IndexVar(self.advance().text))
                else:
                    break
                if self.is_sym(","):
                    self.advance()
            if not vars_:
                self.error("SELECT needs at least one variable")
            return SelectOutput(tuple(vars_))
        self.error(f"expected CONSTRUCT or SELECT, got {self.describe()}")

    def iri_or_name(self):
        t = self.tok
        if t.kind in ("pname", "iri"):
            return IRI(self.advance().text)
        if t.kind == "name":
            return IRI(":" + self.advance().text)
        self.error(f"expected an IRI, got {self.describe()}")

    # -- triples
    def braced_triples(self) -> tuple:
        self.expect_sym("{")
        triples = []
        while not self.is_sym("}"):
            triples.append(self.triple())
            if self.is_sym("."):
                self.advance()
            elif not self.is_sym("}"):
                self.error(f"expected '.' or '}}', got {self.describe()}")
        self.advance()
        return tuple(triples)

    def term(self):
        t = self.tok
        if t.kind == "var":
            return ex.ValueVar(self.advance().text[1:])
        if t.kind in ("pname", "iri"):
            return IRI(self.advance().text)
        if t.kind == "num":
            return ex.Number(self.advance().value)
        if t.kind == "str":
            return StringLiteral(self.advance().text[1:-1])
        self.error(f"expected a term, got {self.describe()}")

    def triple(self) -> Triple:
        s = self.term()
        if self.is_kw("a") or (self.tok.kind == "name" and self.tok.text == "a"):
            self.advance()
            p = "a"
        elif self.tok.kind in ("pname", "iri"):
            p = IRI(self.advance().text)
        else:
            self.error(f"expected a predicate, got {self.describe()}")
        return Triple(s, p, self.term())

    # -- streams
    def streams(self) -> tuple:
        out = [self.stream_source()]
        while True:
            if self.is_sym(","):
                self.advance()
            if self.tok.kind == "name" and self.tok.text.upper() not in KEYWORDS:
                out.append(self.stream_source())
            else:
                break
        return tuple(out)

    def stream_source(self) -> StreamSource:
        name = self.name("a stream name")
        setback = None
        if self.tok.kind in ("dur", "num"):
            setback = self.duration()
            self.expect_sym("<-")
        rng = self.window()
        self.expect_sym("->")
        slide = self.duration()
        return StreamSource(name, rng, slide, setback)

    def window(self) -> int:
        self.expect_sym("[")
        self.expect_kw("NOW")
        rng = 0
        if self.is_sym("-"):
            self.advance()
            rng = self.duration()
        self.expect_sym(",")
        self.expect_kw("NOW")
        self.expect_sym("]")
        return rng

    # -- HAVING
    def having_expr(self):
        ops = [self.having_and()]
        while self.is_kw("OR"):
            self.advance()
            ops.append(self.having_and())
        return ops[0] if len(ops) == 1 else ex.BoolOp("OR", tuple(ops))

    def having_and(self):
        ops = [self.having_not()]
        while self.is_kw("AND"):
            self.advance()
            ops.append(self.having_not())
        return ops[0] if len(ops) == 1 else ex.BoolOp("AND", tuple(ops))

    def having_not(self):
        if self.is_kw("NOT"):
            self.advance()
            return ex.NotExpr(self.having_not())
        return self.having_primary()

    def having_primary(self):
        if self.is_kw("EXISTS") or self.is_kw("FORALL"):
            return self.quantified()
        if self.is_kw("GRAPH"):
            return self.graph()
        if self.is_sym("("):
            save = self.pos
            try:
                return self.comparison()
            except StarqlSyntaxError:
                self.pos = save
            self.advance()
            e = self.having_expr()
            self.expect_sym(")")
            return e
        return self.comparison()

    def quantified(self) -> Quantified:
        kind = self.advance().text.upper()
        names = [self.name("an index variable")]
        while self.is_sym(","):
            self.advance()
            names.append(self.name("an index variable"))
        self.expect_kw("IN")
        seq = self.name("a sequence name")
        self.expect_sym("(")
        body = self.having_expr()
        self.expect_sym(")")
        having = None
        if self.is_kw("HAVING"):
            self.advance()
            having = self.condition()
        return Quantified(kind, tuple(names), seq, body, having)

    def graph(self) -> GraphPattern:
        self.expect_kw("GRAPH")
        t = self.tok
        if t.kind == "var":
            var, is_value = self.advance().text[1:], True
        else:
            var, is_value = self.name("an index variable"), False
        offset = 0
        if (self.is_sym("+") or self.is_sym("-")) and self.peek().kind == "num":
            sign = 1 if self.advance().text == "+" else -1
            n = self.advance()
            if n.value != int(n.value):
                self.error("state offsets must be whole numbers", n)
            offset = sign * int(n.value)
        return GraphPattern(IndexTerm(var, offset, is_value), self.braced_triples())

    # conditions: comparisons joined by AND / OR / NOT
    def condition(self):
        ops = [self.condition_and()]
        while self.is_kw("OR"):
            self.advance()
            ops.append(self.condition_and())
        return ops[0] if len(ops) == 1 else ex.BoolOp("OR", tuple(ops))

    def condition_and(self):
        ops = [self.condition_not()]
        while self.is_kw("AND") and not (self.is_kw("EXISTS", self.peek()) or self.is_kw("FORALL", self.peek())
                                         or self.is_kw("GRAPH", self.peek())):
            self.advance()
            ops.append(self.condition_not())
        return ops[0] if len(ops) == 1 else ex.BoolOp("AND", tuple(ops))

    def condition_not(self):
        if self.is_kw("NOT"):
            self.advance()
            return ex.NotExpr(self.condition_not())
        if self.is_sym("("):
            save = self.pos
            try:
                return self.comparison()
            except StarqlSyntaxError:
                self.pos = save
            self.advance()
            e = self.condition()
            self.expect_sym(")")
            return e
        return self.comparison()

    def comparison(self) -> ex.Comparison:
        left = self.value_expr()
        t = self.tok
        if t.kind == "sym" and t.text in ("=", "!=", "<", "<=", ">", ">="):
            self.advance()
            return ex.Comparison(t.text, left, self.value_expr())
        self.error(f"expected a comparison operator, got {self.describe()}")

    def value_expr(self):
        e = self.value_term()
        while self.is_sym("+") or self.is_sym("-"):
            op = self.advance().text
            e = ex.BinOp(op, e, self.value_term())
        return e

    def value_term(self):
        e = self.value_factor()
        while self.is_sym("*") or self.is_sym("/"):
            op = self.advance().text
            e = ex.BinOp(op, e, self.value_factor())
        return e

    def value_factor(self):
        t = self.tok
        if self.is_sym("-"):
            self.advance()
            return ex.Neg(self.value_factor())
        if self.is_sym("("):
            self.advance()
            e = self.value_expr()
            self.expect_sym(")")
            return e
        if t.kind == "num":
            return ex.Number(self.advance().value)
        if t.kind == "var":
            return ex.ValueVar(self.advance().text[1:])
        if t.kind in ("pname", "iri"):
            return ex.Constant(self.advance().text)
        if t.kind == "str":
            return ex.Constant(self.advance().text)
        if t.kind == "name" and t.text.upper() not in KEYWORDS:
            self.advance()
            if self.is_sym("("):
                self.advance()
                args = []
                if not self.is_sym(")"):
                    args.append(self.value_expr())
                    while self.is_sym(","):
                        self.advance()
                        args.append(self.value_expr())
                self.expect_sym(")")
                return ex.Call(ex.canonical_function(t.text) or t.text, tuple(args))
            return ex.IndexVar(t.text)
        self.error(f"expected a value, got {self.describe()}")


def parse(text: str) -> StarqlQuery:
    """Parse STARQL text; raises :class:`StarqlSyntaxError` with line and column."""
    p = _Parser(text)
    q = p.query()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.describe()}")
    return q


def parse_file(path) -> StarqlQuery:
    from pathlib import Path

    return parse(Path(path).read_text(encoding="utf-8"))
