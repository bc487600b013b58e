"""Classical and streaming mappings, their file format, and identity mappings.

Mapping file, one mapping per line (``#`` starts a comment)::

    map concept Reliable(x) <- scan(reliable_sensors; x=sid)
    map attr testScore(x, y) <- scan(scores; x=sid, y=score) where kind = 'test'
    map role hasPart(x, y) <- scan(parts; x=whole, y=part)
    map stream hasValue(?s, ?v) <- slice(Msmt; s=sid, v=sval)

A ``where`` clause is a conjunction of ``column = literal`` tests on the
scanned table. Stream bodies read the sequenced measurement relation, whose
fields are ``sensor_id`` (alias ``sid``), ``value`` (alias ``sval``) and
``time`` (alias ``time_ms``). Aggregate mappings are never written here; they
are generated per query from the attribute mappings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from . import ir
from .ontology import Dataset, Ontology, to_rational

STREAM_FIELDS = {"sensor_id": "sensor_id", "sid": "sensor_id", "value": "value", "sval": "value",
                 "time": "time", "time_ms": "time"}
KIND_ARITY = {"concept": 1, "role": 2, "attr": 2}


class MappingParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.message = message
        self.line = line
        self.path = path
        where = f"{path or '<mappings>'}:{line}: " if line is not None else ""
        super().__init__(where + message)


class MappingError(ValueError):
    """Unfolding failed because a predicate has no usable mapping."""


@dataclass(frozen=True)
class ClassicalMapping:
    kind: str  # concept | role | attr
    name: str
    head: tuple  # variable names
    body: object  # IR whose columns equal ``head``

    def __post_init__(self):
        if self.kind not in KIND_ARITY:
            raise ValueError(f"unknown mapping kind {self.kind!r}")
        if len(self.head) != KIND_ARITY[self.kind]:
            raise ValueError(f"{self.kind} mapping {self.name} needs {KIND_ARITY[self.kind]} head variable(s)")
        if tuple(self.body.columns) != tuple(self.head):
            raise ValueError(f"mapping {self.name}: body columns {self.body.columns} differ from head {self.head}")

    @property
    def predicate(self) -> tuple:
        return (self.kind, self.name)

    def __str__(self) -> str:
        return f"map {self.kind} {self.name}({', '.join(self.head)}) <- {_body_text(self.body)}"


@dataclass(frozen=True)
class StreamMapping:
    """``GRAPH i { ?s name ?v }`` read from a ``Slice`` with symbolic parameters."""

    name: str
    head: tuple  # (subject var, object var)
    body: ir.Slice

    def __post_init__(self):
        if len(self.head) != 2:
            raise ValueError(f"stream mapping {self.name} needs two head variables")
        missing = [v for v in self.head if v not in self.body.columns]
        if missing:
            raise ValueError(f"stream mapping {self.name}: head variables {missing} not bound by the body")

    def __str__(self) -> str:
        pairs = ", ".join(f"{o}={s}" for o, s in self.body.mapping)
        return f"map stream {self.name}(?{self.head[0]}, ?{self.head[1]}) <- slice({self.body.source}; {pairs})"


@dataclass(frozen=True)
class MappingSet:
    classical: tuple = ()
    streaming: tuple = ()

    def for_predicate(self, kind: str, name: str) -> list[ClassicalMapping]:
        return [m for m in self.classical if m.kind == kind and m.name == name]

    def for_stream(self, name: str) -> list[StreamMapping]:
        return [m for m in self.streaming if m.name == name]

    @property
    def vocabulary(self) -> set[tuple[str, str]]:
        return {m.predicate for m in self.classical} | {("attr", m.name) for m in self.streaming}

    def replace(self, kind: str, name: str, mappings) -> MappingSet:
        """A copy where the mappings of one predicate are swapped out."""
        kept = tuple(m for m in self.classical if not (m.kind == kind and m.name == name))
        return MappingSet(kept + tuple(mappings), self.streaming)

    def __str__(self) -> str:
        return "\n".join(str(m) for m in self.classical + self.streaming)


def _body_text(body) -> str:
    selects = []
    node = body
    if isinstance(node, ir.Project):
        node = node.child
    while isinstance(node, ir.Select):
        selects.append(f"{node.column.lstrip('@')} = {ir._value_text(node.value)}")
        node = node.child
    if isinstance(node, ir.Scan):
        cols = [f"{o}={s}" for o, s in node.mapping if not o.startswith("@")]
        text = f"scan({node.table}; {', '.join(cols)})"
        if selects:
            text += " where " + " and ".join(reversed(selects))
        return text
    return ir.describe(body)


# ---------------------------------------------------------------------------
# parsing

_LINE = re.compile(r"^map\s+(concept|role|attr|stream)\s+([A-Za-z_][\w\-]*)\s*\(([^)]*)\)\s*<-\s*(.+)$")
_BODY = re.compile(r"^(scan|slice)\s*\(\s*([A-Za-z_][\w\-]*)\s*(?:;\s*([^)]*))?\)\s*(?:where\s+(.+))?$", re.I)
_COND = re.compile(r"^\s*([A-Za-z_]\w*)\s*=\s*('(?:[^']*)'|\"(?:[^\"]*)\"|-?\d+(?:\.\d+)?(?:/\d+)?)\s*$")


def _literal(text: str):
    if text[0] in "'\"":
        return text[1:-1]
    return to_rational(text)


def parse_mappings(text: str, path: str | None = None) -> MappingSet:
    classical, streaming = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue

        def fail(msg):
            raise MappingParseError(msg, lineno, path)

        m = _LINE.match(line)
        if not m:
            fail(f"cannot parse mapping {line!r}")
        kind, name, head_text, body_text = m.groups()
        head = tuple(h.strip().lstrip("?") for h in head_text.split(",") if h.strip())
        if not all(re.fullmatch(r"[A-Za-z_]\w*", h) for h in head):
            fail(f"bad head variables {head_text!r}")
        if len(set(head)) != len(head):
            fail("repeated head variable")
        b = _BODY.match(body_text.strip())
        if not b:
            fail(f"cannot parse mapping body {body_text!r}")
        op, source, cols_text, where_text = b.groups()
        pairs = []
        for part in (cols_text or "").split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                fail(f"expected var=column, got {part!r}")
            var, col = (s.strip() for s in part.split("=", 1))
            pairs.append((var.lstrip("?"), col))
        bound = {v for v, _ in pairs}
        for h in head:
            if h not in bound:
                fail(f"head variable {h} is not bound by the body")
        extra = bound - set(head)
        if extra:
            fail(f"body binds variables {sorted(extra)} missing from the head")
        pairs.sort(key=lambda p: head.index(p[0]))
        if kind == "stream":
            if op.lower() != "slice":
                fail("stream mappings need a slice(...) body")
            if where_text:
                fail("stream mappings do not take a where clause")
            fields = []
            for v, col in pairs:
                if col not in STREAM_FIELDS:
                    fail(f"unknown stream field {col!r} (expected one of {sorted(STREAM_FIELDS)})")
                fields.append((v, STREAM_FIELDS[col]))
            if len(head) != 2:
                fail("stream mappings take two head variables")
            streaming.append(StreamMapping(name, head, ir.Slice(source, "i", 0, tuple(fields))))
            continue
        if op.lower() != "scan":
            fail(f"{kind} mappings need a scan(...) body")
        if len(head) != KIND_ARITY[kind]:
            fail(f"{kind} {name} takes {KIND_ARITY[kind]} argument(s), got {len(head)}")
        conds = []
        if where_text:
            for part in re.split(r"\s+and\s+", where_text.strip(), flags=re.I):
                c = _COND.match(part)
                if not c:
                    fail(f"cannot parse condition {part!r}")
                conds.append((c.group(1), _literal(c.group(2))))
        scan_pairs = list(pairs)
        for col, _ in conds:
            if col not in [o for o, _ in scan_pairs]:
                scan_pairs.append((f"@{col}", col))
        node = ir.Scan(source, tuple(scan_pairs))
        for col, value in conds:
            out = next(o for o, s in scan_pairs if s == col)
            node = ir.Select(node, out, value)
        if conds:
            node = ir.project(node, head)
        classical.append(ClassicalMapping(kind, name, head, node))
    return MappingSet(tuple(classical), tuple(streaming))


def load_mappings(path) -> MappingSet:
    p = Path(path)
    return parse_mappings(p.read_text(encoding="utf-8"), str(p))


# ---------------------------------------------------------------------------
# identity mappings over dataset-encoding tables


def table_name(kind: str, name: str) -> str:
    return f"{kind}_{name}"


def dataset_tables(d: Dataset, o: Ontology | None = None) -> dict:
    """One table per predicate: ``concept_A(ind)``, ``role_R(s, o)``, ``attr_F(s, o)``."""
    tables: dict = {}

    def table(kind, name, cols):
        return tables.setdefault(table_name(kind, name), ir.Table(cols, []))

    if o is not None:
        for n in o.concept_names:
            table("concept", n, ("ind",))
        for n in o.role_names:
            table("role", n, ("s", "o"))
        for n in o.attribute_names:
            table("attr", n, ("s", "o"))
    for name, a in sorted(d.concepts):
        table("concept", name, ("ind",)).rows.append((a,))
    for name, a, b in sorted(d.roles):
        table("role", name, ("s", "o")).rows.append((a, b))
    for name, a, v in sorted(d.attributes):
        table("attr", name, ("s", "o")).rows.append((a, v))
    return tables


def identity_mappings(o: Ontology, d: Dataset | None = None) -> MappingSet:
    """Map every predicate of ``o`` (and ``d``) onto its dataset table."""
    concepts = set(o.concept_names)
    roles = set(o.role_names)
    attrs = set(o.attribute_names)
    if d is not None:
        concepts |= {n for n, _ in d.concepts}
        roles |= {n for n, _, _ in d.roles}
        attrs |= {n for n, _, _ in d.attributes}
    out = []
    for n in sorted(concepts):
        out.append(ClassicalMapping("concept", n, ("x",), ir.Scan(table_name("concept", n), (("x", "ind"),))))
    for n in sorted(roles):
        out.append(ClassicalMapping("role", n, ("x", "y"), ir.Scan(table_name("role", n), (("x", "s"), ("y", "o")))))
    for n in sorted(attrs):
        out.append(ClassicalMapping("attr", n, ("x", "y"), ir.Scan(table_name("attr", n), (("x", "s"), ("y", "o")))))
    return MappingSet(tuple(out), ())


def load_tables(directory) -> dict:
    """Read every ``*.csv`` in ``directory`` as a table (header row = columns).

    Cells that parse as numbers become rationals so they compare exactly with
    ontology thresholds.
    """
    import csv

    tables = {}
    for p in sorted(Path(directory).glob("*.csv")):
        with p.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                continue
            rows = []
            for row in reader:
                if not row:
                    continue
                rows.append(tuple(_cell(c) for c in row))
            tables[p.stem] = ir.Table(tuple(h.strip() for h in header), rows)
    return tables


def _cell(text: str):
    text = text.strip()
    try:
        return to_rational(text)
    except (ValueError, ZeroDivisionError):
        return text
