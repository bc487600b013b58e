"""Relational and stream query IR shared by mappings and compiled plans.

Every node exposes ``columns`` (its output schema). Relations are sets of
tuples in column order. Static nodes are evaluated by :func:`evaluate` against
a dict of tables; stream nodes (``Slice``, ``StreamAggregate`` and friends)
need an evaluation context supplied by the engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from . import expressions as ex
from .ontology.syntax import AGGREGATES, COMPARATORS, compare, format_rational


class PlanError(ValueError):
    pass


# ---------------------------------------------------------------------------
# nodes


@dataclass(frozen=True)
class Scan:
    """Read ``table``; ``columns`` maps output name -> source column."""

    table: str
    mapping: tuple  # ((out, src), ...)

    @property
    def columns(self) -> tuple:
        return tuple(o for o, _ in self.mapping)

    @property
    def children(self) -> tuple:
        return ()


@dataclass(frozen=True)
class Select:
    """Keep rows where ``column`` equals a constant or another column."""

    child: object
    column: str
    value: object
    is_column: bool = False

    @property
    def columns(self) -> tuple:
        return self.child.columns

    @property
    def children(self) -> tuple:
        return (self.child,)


@dataclass(frozen=True)
class Project:
    """Output ``(out, src)`` pairs; duplicates are removed (set semantics)."""

    child: object
    mapping: tuple

    @property
    def columns(self) -> tuple:
        return tuple(o for o, _ in self.mapping)

    @property
    def children(self) -> tuple:
        return (self.child,)


@dataclass(frozen=True)
class Join:
    """Equi-join on ``keys`` (pairs of left/right column names).

    The output holds the left columns followed by the right columns that are
    not join keys. With no keys this is a cross product.
    """

    left: object
    right: object
    keys: tuple = ()

    @property
    def columns(self) -> tuple:
        rk = {r for _, r in self.keys}
        return self.left.columns + tuple(c for c in self.right.columns if c not in rk)

    @property
    def children(self) -> tuple:
        return (self.left, self.right)


@dataclass(frozen=True)
class Union:
    inputs: tuple

    @property
    def columns(self) -> tuple:
        return self.inputs[0].columns

    @property
    def children(self) -> tuple:
        return self.inputs


@dataclass(frozen=True)
class GroupHaving:
    """``SELECT group FROM child GROUP BY group HAVING agg(value) cmp threshold``."""

    child: object
    group: tuple
    value: str
    agg: str
    cmp: str
    threshold: Fraction

    @property
    def columns(self) -> tuple:
        return self.group

    @property
    def children(self) -> tuple:
        return (self.child,)


@dataclass(frozen=True)
class StreamWindow:
    """Window parameters of one source stream as seen by a ``Slice``."""

    stream: str
    range_ms: int
    slide_ms: int
    setback_ms: int = 0

    def __str__(self) -> str:
        sb = f" setback={self.setback_ms}" if self.setback_ms else ""
        return f"{self.stream}[range={self.range_ms} slide={self.slide_ms}{sb}]"


@dataclass(frozen=True)
class Slice:
    """Tuples of state ``index + offset`` of the sequenced stream ``source``.

    ``mapping`` pairs output columns with record fields (``sensor_id``,
    ``value``, ``time``, ``wid`` or a mapping-file alias of those). The index
    column carries the state number minus ``offset``. Window parameters stay
    symbolic (``windows`` empty) until the query instantiates them.
    """

    source: str
    index: str
    offset: int
    mapping: tuple
    strategy: str = "StandardSequencing"
    windows: tuple = ()

    @property
    def columns(self) -> tuple:
        return (self.index,) + tuple(o for o, _ in self.mapping)

    @property
    def children(self) -> tuple:
        return ()


@dataclass(frozen=True)
class Values:
    """A constant relation (used for constants in query heads)."""

    columns: tuple
    rows: tuple

    @property
    def children(self) -> tuple:
        return ()


@dataclass(frozen=True)
class StaticAnswers:
    """The materialised answer set of the static subplan."""

    columns: tuple

    @property
    def children(self) -> tuple:
        return ()


@dataclass(frozen=True)
class SemiJoin:
    """Rows of ``left`` with a partner in ``right`` (or none, if ``anti``)."""

    left: object
    right: object
    keys: tuple
    anti: bool = False

    @property
    def columns(self) -> tuple:
        return self.left.columns

    @property
    def children(self) -> tuple:
        return (self.left, self.right)


@dataclass(frozen=True)
class Filter:
    """Row-level condition over value/index columns."""

    child: object
    condition: object

    @property
    def columns(self) -> tuple:
        return self.child.columns

    @property
    def children(self) -> tuple:
        return (self.child,)


@dataclass(frozen=True)
class StreamAggregate:
    """Group ``child`` by ``group`` and keep groups whose ``condition`` holds.

    Aggregate calls inside the condition (Pearson, cosine, avg, ...) run over
    the group's rows ordered by ``order``. ``access`` is the planner's choice
    for the archived side (``signature-only`` or ``hybrid``).
    """

    child: object
    group: tuple
    order: tuple
    condition: object
    access: str = "raw"

    @property
    def columns(self) -> tuple:
        return self.group

    @property
    def children(self) -> tuple:
        return (self.child,)


@dataclass(frozen=True)
class ForallStates:
    """Keep groups that hold in every state (division by the state domain)."""

    child: object
    index: tuple
    group: tuple

    @property
    def columns(self) -> tuple:
        return self.group

    @property
    def children(self) -> tuple:
        return (self.child,)


@dataclass(frozen=True)
class Output:
    """Root of a compiled streaming plan: CONSTRUCT concept or SELECT list."""

    child: object
    variables: tuple
    concept: str | None = None

    @property
    def columns(self) -> tuple:
        return self.variables

    @property
    def children(self) -> tuple:
        return (self.child,)


STREAM_NODES = (Slice, StreamAggregate, ForallStates, Filter, Output)


# ---------------------------------------------------------------------------
# helpers


def make_project(child, mapping) -> object:
    """``Project`` that skips identities and folds into a child projection."""
    mapping = tuple(mapping)
    if tuple(o for o, _ in mapping) == child.columns and all(o == s for o, s in mapping):
        return child
    if isinstance(child, Project):
        inner = dict(child.mapping)
        return make_project(child.child, tuple((o, inner[s]) for o, s in mapping))
    return Project(child, mapping)


def project(child, columns: Iterable[str]) -> object:
    return make_project(child, tuple((c, c) for c in columns))


def natural_join(left, right):
    shared = [c for c in left.columns if c in right.columns]
    return Join(left, right, tuple((c, c) for c in shared))


def union(inputs) -> object:
    inputs = tuple(inputs)
    if len(inputs) == 1:
        return inputs[0]
    return Union(inputs)


def walk(node):
    yield node
    for c in node.children:
        yield from walk(c)


def scanned_tables(node) -> set[str]:
    return {n.table for n in walk(node) if isinstance(n, Scan)}


# ---------------------------------------------------------------------------
# validation


def validate_plan(node, streaming: bool = False) -> list[str]:
    """Return well-typedness problems; empty means the plan is well formed."""
    problems: list[str] = []

    def check(n, path):
        where = f"{path}{type(n).__name__}"
        cols = n.columns
        if len(set(cols)) != len(cols):
            problems.append(f"{where}: duplicate output columns {list(cols)}")
        if isinstance(n, Select):
            if n.column not in n.child.columns:
                problems.append(f"{where}: unknown column {n.column!r}")
            if n.is_column and n.value not in n.child.columns:
                problems.append(f"{where}: unknown column {n.value!r}")
        elif isinstance(n, Project):
            for _, src in n.mapping:
                if src not in n.child.columns:
                    problems.append(f"{where}: unknown column {src!r}")
        elif isinstance(n, (Join, SemiJoin)):
            for lk, rk in n.keys:
                if lk not in n.left.columns:
                    problems.append(f"{where}: unknown left key {lk!r}")
                if rk not in n.right.columns:
                    problems.append(f"{where}: unknown right key {rk!r}")
        elif isinstance(n, Union):
            first = n.inputs[0].columns
            for other in n.inputs[1:]:
                if other.columns != first:
                    problems.append(f"{where}: union inputs disagree {list(first)} vs {list(other.columns)}")
        elif isinstance(n, GroupHaving):
            if n.agg not in AGGREGATES:
                problems.append(f"{where}: unknown aggregate {n.agg!r}")
            if n.cmp not in COMPARATORS:
                problems.append(f"{where}: unknown comparator {n.cmp!r}")
            for c in n.group + (n.value,):
                if c not in n.child.columns:
                    problems.append(f"{where}: unknown column {c!r}")
        elif isinstance(n, Slice):
            if not streaming:
                problems.append(f"{where}: Slice outside a streaming subplan")
        elif isinstance(n, (StreamAggregate, Filter)):
            cond = n.condition
            for v in ex.value_vars(cond) | ex.index_vars(cond):
                if v not in n.child.columns:
                    problems.append(f"{where}: condition uses unknown column {v!r}")
            if isinstance(n, StreamAggregate):
                for c in n.group + n.order:
                    if c not in n.child.columns:
                        problems.append(f"{where}: unknown column {c!r}")
        elif isinstance(n, ForallStates):
            for c in n.group + n.index:
                if c not in n.child.columns:
                    problems.append(f"{where}: unknown column {c!r}")
        elif isinstance(n, Output):
            for c in n.variables:
                if c not in n.child.columns:
                    problems.append(f"{where}: unknown column {c!r}")
        if not streaming and isinstance(n, STREAM_NODES):
            problems.append(f"{where}: stream operator in a static plan")
        for i, c in enumerate(n.children):
            check(c, f"{where}/{i}:")

    check(node, "")
    return problems


# ---------------------------------------------------------------------------
# explain


def _pairs(mapping) -> str:
    return ", ".join(o if o == s else f"{o}={s}" for o, s in mapping)


def _value_text(v) -> str:
    if isinstance(v, Fraction):
        return format_rational(v)
    if isinstance(v, float):
        return repr(v)
    return f"'{v}'"


def describe(n) -> str:
    if isinstance(n, Scan):
        return f"Scan {n.table} [{_pairs(n.mapping)}]"
    if isinstance(n, Select):
        rhs = n.value if n.is_column else _value_text(n.value)
        return f"Select {n.column} = {rhs}"
    if isinstance(n, Project):
        return f"Project [{_pairs(n.mapping)}]"
    if isinstance(n, Join):
        keys = ", ".join(a if a == b else f"{a}={b}" for a, b in n.keys)
        return f"Join [{keys}]" if keys else "Join [cross]"
    if isinstance(n, Union):
        return "Union"
    if isinstance(n, GroupHaving):
        return (f"GroupHaving [{', '.join(n.group)}] {n.agg}({n.value}) {n.cmp} "
                f"{format_rational(n.threshold)}")
    if isinstance(n, Slice):
        off = f"+{n.offset}" if n.offset else ""
        params = " ".join(str(w) for w in n.windows) if n.windows else "r sl"
        return f"Slice {n.source} {n.index}{off} {params} {n.strategy} [{_pairs(n.mapping)}]"
    if isinstance(n, Values):
        return f"Values [{', '.join(n.columns)}] " + "; ".join(", ".join(_value_text(v) for v in r) for r in n.rows)
    if isinstance(n, StaticAnswers):
        return f"StaticAnswers [{', '.join(n.columns)}]"
    if isinstance(n, SemiJoin):
        keys = ", ".join(a if a == b else f"{a}={b}" for a, b in n.keys)
        return f"{'AntiJoin' if n.anti else 'SemiJoin'} [{keys}]"
    if isinstance(n, Filter):
        return f"Filter {n.condition}"
    if isinstance(n, StreamAggregate):
        return (f"StreamAggregate [{', '.join(n.group)}] order=[{', '.join(n.order)}] "
                f"{n.condition} access={n.access}")
    if isinstance(n, ForallStates):
        return f"ForallStates [{', '.join(n.group)}] over [{', '.join(n.index)}]"
    if isinstance(n, Output):
        if n.concept is not None:
            return f"Construct ?{n.variables[0]} a {n.concept}"
        return f"Select [{', '.join(n.variables)}]"
    return type(n).__name__


def explain(node, indent: int = 0) -> str:
    lines = []

    def rec(n, depth):
        lines.append("  " * depth + describe(n))
        for c in n.children:
            rec(c, depth + 1)

    rec(node, indent)
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class Table:
    columns: tuple
    rows: list = field(default_factory=list)


@dataclass(frozen=True)
class Relation:
    columns: tuple
    rows: frozenset

    def as_dicts(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in sorted(self.rows, key=_row_key)]


def _row_key(row):
    return tuple((type(v).__name__, str(v)) for v in row)


def _agg(values: list, agg: str):
    if agg == "count":
        return len(values)
    if agg == "countd":
        return len(set(values))
    if agg == "sum":
        return sum(values, Fraction(0))
    if agg == "avg":
        return sum(values, Fraction(0)) / len(values)
    if agg == "min":
        return min(values)
    if agg == "max":
        return max(values)
    raise PlanError(f"unknown aggregate {agg!r}")


class Context:
    """Evaluation context; the engine subclasses it for stream nodes."""

    def __init__(self, tables: dict | None = None, static_answers: Relation | None = None):
        self.tables = tables or {}
        self.static_answers = static_answers

    def slice_rows(self, node: Slice) -> set:
        raise PlanError("Slice needs a streaming context")

    def stream_aggregate(self, node: StreamAggregate, child: Relation) -> set:
        raise PlanError("StreamAggregate needs a streaming context")

    def state_count(self) -> int:
        raise PlanError("ForallStates needs a streaming context")


def evaluate(node, ctx) -> Relation:
    if isinstance(ctx, dict):
        ctx = Context(ctx)
    return Relation(node.columns, frozenset(_eval(node, ctx)))


def _eval(n, ctx: Context) -> set:
    if isinstance(n, Scan):
        table = ctx.tables.get(n.table)
        if table is None:
            raise PlanError(f"unknown table {n.table!r}")
        idx = []
        for _, src in n.mapping:
            if src not in table.columns:
                raise PlanError(f"table {n.table!r} has no column {src!r}")
            idx.append(table.columns.index(src))
        return {tuple(r[i] for i in idx) for r in table.rows}
    if isinstance(n, Select):
        rows = _eval(n.child, ctx)
        i = n.child.columns.index(n.column)
        if n.is_column:
            j = n.child.columns.index(n.value)
            return {r for r in rows if r[i] == r[j]}
        return {r for r in rows if r[i] == n.value}
    if isinstance(n, Project):
        rows = _eval(n.child, ctx)
        idx = [n.child.columns.index(s) for _, s in n.mapping]
        return {tuple(r[i] for i in idx) for r in rows}
    if isinstance(n, Join):
        left, right = _eval(n.left, ctx), _eval(n.right, ctx)
        li = [n.left.columns.index(a) for a, _ in n.keys]
        ri = [n.right.columns.index(b) for _, b in n.keys]
        keep = [i for i, c in enumerate(n.right.columns) if c not in {b for _, b in n.keys}]
        buckets: dict = {}
        for r in right:
            buckets.setdefault(tuple(r[i] for i in ri), []).append(r)
        out = set()
        for l in left:
            for r in buckets.get(tuple(l[i] for i in li), ()):
                out.add(l + tuple(r[i] for i in keep))
        return out
    if isinstance(n, Union):
        out = set()
        for c in n.inputs:
            out |= _eval(c, ctx)
        return out
    if isinstance(n, GroupHaving):
        rows = _eval(n.child, ctx)
        gi = [n.child.columns.index(c) for c in n.group]
        vi = n.child.columns.index(n.value)
        groups: dict = {}
        for r in rows:
            groups.setdefault(tuple(r[i] for i in gi), []).append(r[vi])
        return {g for g, vals in groups.items() if vals and compare(_agg(vals, n.agg), n.cmp, n.threshold)}
    if isinstance(n, Values):
        return set(n.rows)
    if isinstance(n, Slice):
        return ctx.slice_rows(n)
    if isinstance(n, StaticAnswers):
        if ctx.static_answers is None:
            raise PlanError("no static answers in context")
        src = ctx.static_answers
        idx = [src.columns.index(c) for c in n.columns]
        return {tuple(r[i] for i in idx) for r in src.rows}
    if isinstance(n, SemiJoin):
        left, right = _eval(n.left, ctx), _eval(n.right, ctx)
        li = [n.left.columns.index(a) for a, _ in n.keys]
        ri = [n.right.columns.index(b) for _, b in n.keys]
        keys = {tuple(r[i] for i in ri) for r in right}
        return {l for l in left if (tuple(l[i] for i in li) in keys) != n.anti}
    if isinstance(n, Filter):
        rows = _eval(n.child, ctx)
        cols = n.child.columns
        out = set()
        for r in rows:
            try:
                if ex.evaluate(n.condition, dict(zip(cols, r))):
                    out.add(r)
            except (ex.ExpressionError, TypeError):
                continue
        return out
    if isinstance(n, StreamAggregate):
        child = Relation(n.child.columns, frozenset(_eval(n.child, ctx)))
        return ctx.stream_aggregate(n, child)
    if isinstance(n, ForallStates):
        rows = _eval(n.child, ctx)
        gi = [n.child.columns.index(c) for c in n.group]
        ii = [n.child.columns.index(c) for c in n.index]
        total = ctx.state_count() ** len(ii)
        seen: dict = {}
        for r in rows:
            seen.setdefault(tuple(r[i] for i in gi), set()).add(tuple(r[i] for i in ii))
        return {g for g, states in seen.items() if total and len(states) == total}
    if isinstance(n, Output):
        rows = _eval(n.child, ctx)
        idx = [n.child.columns.index(c) for c in n.variables]
        return {tuple(r[i] for i in idx) for r in rows}
    raise PlanError(f"cannot evaluate {type(n).__name__}")
