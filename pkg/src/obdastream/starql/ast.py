"""Typed syntax tree of STARQL queries.

Value variables (``?y``) and index variables (bare ``i``) reuse the expression
nodes of :mod:`obdastream.expressions`; so do comparisons and boolean
connectives inside HAVING clauses. Durations are integer milliseconds.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..expressions import BoolOp, Comparison, NotExpr, Number, ValueVar  # noqa: F401  (re-exported)

MS = {"ms": 1, "sec": 1000, "min": 60_000, "hour": 3_600_000, "day": 86_400_000, "year": 365 * 86_400_000}


@dataclass(frozen=True)
class IRI:
    """A prefixed name (``ex:Reliable``, ``:C``) or a full ``<...>`` IRI."""

    text: str

    @property
    def prefix(self) -> str | None:
        if self.text.startswith("<"):
            return None
        return self.text.split(":", 1)[0]

    @property
    def local(self) -> str:
        if self.text.startswith("<"):
            body = self.text[1:-1]
            for sep in ("#", "/"):
                if sep in body:
                    body = body.rsplit(sep, 1)[1]
            return body
        return self.text.split(":", 1)[1]

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class StringLiteral:
    value: str

    def __str__(self) -> str:
        return '"' + self.value + '"'


@dataclass(frozen=True)
class Triple:
    subject: object  # ValueVar | IRI | literal
    predicate: object  # IRI, or the string "a"
    object: object

    @property
    def is_type(self) -> bool:
        return self.predicate == "a"

    def variables(self) -> list[str]:
        return [t.name for t in (self.subject, self.object) if isinstance(t, ValueVar)]

    def __str__(self) -> str:
        return f"{self.subject} {self.predicate} {self.object}"


@dataclass(frozen=True)
class IndexTerm:
    """``i`` or ``i+1`` in ``GRAPH i+1 {...}``; ``is_value`` marks a misuse like ``GRAPH ?x``."""

    var: str
    offset: int = 0
    is_value: bool = False

    def __str__(self) -> str:
        name = f"?{self.var}" if self.is_value else self.var
        if self.offset > 0:
            return f"{name}+{self.offset}"
        if self.offset < 0:
            return f"{name}-{-self.offset}"
        return name


@dataclass(frozen=True)
class GraphPattern:
    index: IndexTerm
    triples: tuple

    def variables(self) -> set[str]:
        return {v for t in self.triples for v in t.variables()}


@dataclass(frozen=True)
class Quantified:
    kind: str  # EXISTS | FORALL
    variables: tuple  # index variable names
    sequence: str
    body: object
    having: object = None


@dataclass(frozen=True)
class PulseDecl:
    name: str
    start: object  # "NOW" or int ms
    frequency_ms: int


@dataclass(frozen=True)
class StreamSource:
    name: str
    range_ms: int
    slide_ms: int
    setback_ms: int | None = None


@dataclass(frozen=True)
class Construct:
    triples: tuple


@dataclass(frozen=True)
class SelectOutput:
    variables: tuple  # ValueVar / IndexVar


@dataclass(frozen=True)
class StaticSource:
    ontology: object
    data: object


@dataclass(frozen=True)
class Sequencing:
    strategy: str
    alias: str


@dataclass(frozen=True)
class StarqlQuery:
    prefixes: tuple  # ((prefix, iri), ...)
    pulse: PulseDecl | None
    output_stream: str
    output: object  # Construct | SelectOutput
    static: StaticSource | None = None
    where: tuple = ()
    streams: tuple = ()
    using_pulse: str | None = None
    sequencing: Sequencing | None = None
    having: object = None

    @property
    def prefix_map(self) -> dict:
        return dict(self.prefixes)


def walk_having(e):
    """Yield every node of a HAVING tree, including comparison internals."""
    from ..expressions import walk as walk_expr

    yield e
    if isinstance(e, BoolOp):
        for o in e.operands:
            yield from walk_having(o)
    elif isinstance(e, NotExpr):
        yield from walk_having(e.operand)
    elif isinstance(e, Quantified):
        yield from walk_having(e.body)
        if e.having is not None:
            yield from walk_having(e.having)
    elif isinstance(e, Comparison):
        for x in walk_expr(e):
            if x is not e:
                yield x
