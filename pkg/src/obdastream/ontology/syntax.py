"""Vocabulary, axioms and assertions of DL-Lite_A ontologies with aggregate concepts.

Also holds the line-oriented ontology format and the CSV dataset format::

    # comment
    precisionScore subattr testScore
    agg:min testScore >= 0.9 sub Reliable
    exists inv(partOf) sub Component
    funct attr serialNumber
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Union

AGGREGATES = ("min", "max", "count", "countd", "sum", "avg")
COMPARATORS = (">=", "<=", "<", ">", "=", "!=")

# unicode spellings accepted on input, normalised to ASCII
_CMP_ALIASES = {"≥": ">=", "≤": "<=", "≠": "!=", "==": "="}


class OntologyParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")


def to_rational(text: str | int | float | Fraction) -> Fraction:
    """Parse a decimal or fraction literal exactly (``0.9`` is 9/10, not a float)."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, float):
        # floats only reach here from programmatic callers; go through repr
        return Fraction(repr(text))
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational number: {text!r}") from exc


def format_rational(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    # finite decimal expansions print as decimals, everything else as p/q
    d = value.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d != 1:
        return f"{value.numerator}/{value.denominator}"
    digits = 0
    scaled = value
    while scaled.denominator != 1:
        scaled *= 10
        digits += 1
    sign = "-" if scaled < 0 else ""
    raw = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    return f"{sign}{raw[:-digits]}.{raw[-digits:]}"


# ---------------------------------------------------------------------------
# concepts and roles


@dataclass(frozen=True, order=True)
class Role:
    base: str
    inverted: bool = False

    def inverse(self) -> Role:
        return Role(self.base, not self.inverted)

    def __str__(self) -> str:
        return f"inv({self.base})" if self.inverted else self.base


@dataclass(frozen=True, order=True)
class AtomicConcept:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class ExistsRole:
    role: Role

    def __str__(self) -> str:
        return f"exists {self.role}"


@dataclass(frozen=True, order=True)
class ExistsAttribute:
    attribute: str

    def __str__(self) -> str:
        return f"exists attr {self.attribute}"


BasicConcept = Union[AtomicConcept, ExistsRole]
Concept = Union[AtomicConcept, ExistsRole, ExistsAttribute]


@dataclass(frozen=True, order=True)
class AggregateConcept:
    """Individuals whose multiset of ``attribute`` values satisfies ``agg(values) cmp threshold``."""

    agg: str
    cmp: str
    threshold: Fraction
    attribute: str

    def __post_init__(self):
        if self.agg not in AGGREGATES:
            raise ValueError(f"unknown aggregate {self.agg!r}")
        cmp = _CMP_ALIASES.get(self.cmp, self.cmp)
        if cmp not in COMPARATORS:
            raise ValueError(f"unknown comparison {self.cmp!r}")
        object.__setattr__(self, "cmp", cmp)
        object.__setattr__(self, "threshold", to_rational(self.threshold))

    def __str__(self) -> str:
        return f"agg:{self.agg} {self.attribute} {self.cmp} {format_rational(self.threshold)}"


def compare(left, cmp: str, right) -> bool:
    if cmp == ">=":
        return left >= right
    if cmp == "<=":
        return left <= right
    if cmp == "<":
        return left < right
    if cmp == ">":
        return left > right
    if cmp == "=":
        return left == right
    if cmp == "!=":
        return left != right
    raise ValueError(f"unknown comparison {cmp!r}")


# ---------------------------------------------------------------------------
# axioms


@dataclass(frozen=True, order=True)
class ConceptInclusion:
    lhs: Concept
    rhs: Concept  # only a basic concept is legal; checked by validate_ontology

    def __str__(self) -> str:
        return f"{_concept_text(self.lhs)} sub {_concept_text(self.rhs)}"


@dataclass(frozen=True, order=True)
class AggregateInclusion:
    lhs: AggregateConcept
    rhs: Concept

    def __str__(self) -> str:
        return f"{self.lhs} sub {_concept_text(self.rhs)}"


@dataclass(frozen=True, order=True)
class RoleInclusion:
    lhs: Role
    rhs: Role

    def __str__(self) -> str:
        return f"{self.lhs} subrole {self.rhs}"


@dataclass(frozen=True, order=True)
class AttributeInclusion:
    lhs: str
    rhs: str

    def __str__(self) -> str:
        return f"{self.lhs} subattr {self.rhs}"


@dataclass(frozen=True, order=True)
class FunctRole:
    role: Role

    def __str__(self) -> str:
        return f"funct {self.role}"


@dataclass(frozen=True, order=True)
class FunctAttribute:
    attribute: str

    def __str__(self) -> str:
        return f"funct attr {self.attribute}"


@dataclass(frozen=True, order=True)
class ConceptDisjoint:
    first: Concept
    second: Concept

    def __str__(self) -> str:
        return f"disjoint {_concept_text(self.first)} {_concept_text(self.second)}"


@dataclass(frozen=True, order=True)
class RoleDisjoint:
    first: Role
    second: Role

    def __str__(self) -> str:
        return f"disjoint role {self.first} {self.second}"


@dataclass(frozen=True, order=True)
class AttributeDisjoint:
    first: str
    second: str

    def __str__(self) -> str:
        return f"disjoint attr {self.first} {self.second}"


Axiom = Union[
    ConceptInclusion,
    AggregateInclusion,
    RoleInclusion,
    AttributeInclusion,
    FunctRole,
    FunctAttribute,
    ConceptDisjoint,
    RoleDisjoint,
    AttributeDisjoint,
]


def _concept_text(c) -> str:
    # `exists attr F` keeps attribute existentials unambiguous on re-parse
    return str(c)


@dataclass(frozen=True)
class Ontology:
    axioms: tuple = ()

    def __post_init__(self):
        # set semantics, deterministic order
        object.__setattr__(self, "axioms", tuple(sorted(set(self.axioms), key=_axiom_key)))

    def of_type(self, kind) -> list:
        return [ax for ax in self.axioms if isinstance(ax, kind)]

    @property
    def concept_names(self) -> set[str]:
        names = set()
        for ax in self.axioms:
            for c in _concepts_of(ax):
                if isinstance(c, AtomicConcept):
                    names.add(c.name)
        return names

    @property
    def role_names(self) -> set[str]:
        names = set()
        for ax in self.axioms:
            for c in _concepts_of(ax):
                if isinstance(c, ExistsRole):
                    names.add(c.role.base)
            if isinstance(ax, (RoleInclusion, RoleDisjoint)):
                names.update(r.base for r in (_first(ax), _second(ax)))
            elif isinstance(ax, FunctRole):
                names.add(ax.role.base)
        return names

    @property
    def attribute_names(self) -> set[str]:
        names = set()
        for ax in self.axioms:
            for c in _concepts_of(ax):
                if isinstance(c, ExistsAttribute):
                    names.add(c.attribute)
            if isinstance(ax, AggregateInclusion):
                names.add(ax.lhs.attribute)
            elif isinstance(ax, (AttributeInclusion, AttributeDisjoint)):
                names.update((_first(ax), _second(ax)))
            elif isinstance(ax, FunctAttribute):
                names.add(ax.attribute)
        return names

    def __len__(self) -> int:
        return len(self.axioms)

    def __str__(self) -> str:
        return "\n".join(str(ax) for ax in self.axioms)


def _first(ax):
    return ax.lhs if hasattr(ax, "lhs") else ax.first


def _second(ax):
    return ax.rhs if hasattr(ax, "rhs") else ax.second


def _concepts_of(ax) -> list:
    if isinstance(ax, (ConceptInclusion, AggregateInclusion)):
        return [c for c in (ax.lhs, ax.rhs) if not isinstance(c, AggregateConcept)]
    if isinstance(ax, ConceptDisjoint):
        return [ax.first, ax.second]
    return []


def _axiom_key(ax) -> tuple:
    return (type(ax).__name__, str(ax))


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class Dataset:
    """Ground assertions. Individuals are plain strings; attribute values are Fractions."""

    concepts: frozenset = field(default_factory=frozenset)  # (concept, individual)
    roles: frozenset = field(default_factory=frozenset)  # (role, subject, object)
    attributes: frozenset = field(default_factory=frozenset)  # (attribute, individual, value)

    def __post_init__(self):
        for name, ind in self.concepts:
            _check_name(ind)
        for name, a, b in self.roles:
            _check_name(a)
            _check_name(b)
        attrs = frozenset((f, a, to_rational(v)) for f, a, v in self.attributes)
        for _, a, _ in attrs:
            _check_name(a)
        object.__setattr__(self, "concepts", frozenset(self.concepts))
        object.__setattr__(self, "roles", frozenset(self.roles))
        object.__setattr__(self, "attributes", attrs)

    @classmethod
    def of(cls, concepts=(), roles=(), attributes=()) -> Dataset:
        return cls(frozenset(concepts), frozenset(roles), frozenset(attributes))

    @property
    def individuals(self) -> set:
        out = {a for _, a in self.concepts}
        for _, a, b in self.roles:
            out.update((a, b))
        out.update(a for _, a, _ in self.attributes)
        return out

    def union(self, other: Dataset) -> Dataset:
        return Dataset(
            self.concepts | other.concepts,
            self.roles | other.roles,
            self.attributes | other.attributes,
        )

    def __len__(self) -> int:
        return len(self.concepts) + len(self.roles) + len(self.attributes)

    def __le__(self, other: Dataset) -> bool:
        return (
            self.concepts <= other.concepts
            and self.roles <= other.roles
            and self.attributes <= other.attributes
        )


def _check_name(ind) -> None:
    if not isinstance(ind, str) or not ind:
        raise ValueError(f"individual names must be nonempty strings, got {ind!r}")


# ---------------------------------------------------------------------------
# ontology text format

_NAME = r"[A-Za-z_][\w.\-:]*"
_ROLE = rf"(?:inv\(\s*{_NAME}\s*\)|{_NAME})"
_AGG_RE = re.compile(
    rf"^agg:(\w+)\s+({_NAME})\s*(>=|<=|!=|==|=|<|>|≥|≤|≠)\s*(\S+)$"
)
_NAME_RE = re.compile(rf"^{_NAME}$")
_ROLE_RE = re.compile(rf"^{_ROLE}$")


def parse_role(text: str) -> Role:
    text = text.strip()
    if not _ROLE_RE.match(text):
        raise ValueError(f"bad role {text!r}")
    if text.startswith("inv("):
        return Role(text[4:-1].strip(), True)
    return Role(text)


def _parse_name(text: str) -> str:
    text = text.strip()
    if not _NAME_RE.match(text):
        raise ValueError(f"bad name {text!r}")
    return text


def _parse_side(text: str, attributes: set[str]):
    """Left or right side of ``sub``: concept name, ``exists X``, ``exists attr F`` or ``agg:...``."""
    text = text.strip()
    m = _AGG_RE.match(text)
    if m:
        agg, attr, cmp, thr = m.groups()
        return AggregateConcept(agg, cmp, to_rational(thr), attr)
    if text.startswith("exists "):
        rest = text[len("exists "):].strip()
        if rest.startswith("attr "):
            return ExistsAttribute(_parse_name(rest[5:]))
        role = parse_role(rest)
        if not role.inverted and role.base in attributes:
            return ExistsAttribute(role.base)
        return ExistsRole(role)
    return AtomicConcept(_parse_name(text))


def _attribute_names_hint(lines: list[str]) -> set[str]:
    # `exists X sub B` is ambiguous between roles and attributes; X is an
    # attribute if it occurs anywhere in an attribute position
    names = set()
    for line in lines:
        toks = line.split()
        if len(toks) == 3 and toks[1] == "subattr":
            names.update((toks[0], toks[2]))
        elif toks[:2] == ["funct", "attr"] and len(toks) == 3:
            names.add(toks[2])
        elif toks[:2] == ["disjoint", "attr"] and len(toks) == 4:
            names.update(toks[2:])
        elif toks and toks[0].startswith("agg:") and len(toks) >= 2:
            names.add(toks[1])
        elif "exists attr" in line:
            idx = toks.index("attr")
            if idx + 1 < len(toks):
                names.add(toks[idx + 1])
    return names


def parse_ontology(text: str, path: str | None = None) -> Ontology:
    raw_lines = text.splitlines()
    stripped = [line.split("#", 1)[0].strip() for line in raw_lines]
    attributes = _attribute_names_hint([s for s in stripped if s])
    axioms = []
    for lineno, line in enumerate(stripped, start=1):
        if not line:
            continue
        try:
            axioms.append(_parse_axiom(line, attributes))
        except ValueError as exc:
            raise OntologyParseError(f"{exc} in {raw_lines[lineno - 1].strip()!r}", lineno, path) from None
    return Ontology(tuple(axioms))


def _parse_axiom(line: str, attributes: set[str]):
    toks = line.split()
    head = toks[0]
    if head == "funct":
        if len(toks) == 3 and toks[1] == "attr":
            return FunctAttribute(_parse_name(toks[2]))
        if len(toks) == 2:
            return FunctRole(parse_role(toks[1]))
        raise ValueError("malformed funct axiom")
    if head == "disjoint":
        if len(toks) == 4 and toks[1] == "role":
            return RoleDisjoint(parse_role(toks[2]), parse_role(toks[3]))
        if len(toks) == 4 and toks[1] == "attr":
            return AttributeDisjoint(_parse_name(toks[2]), _parse_name(toks[3]))
        if len(toks) == 3:
            return ConceptDisjoint(AtomicConcept(_parse_name(toks[1])), AtomicConcept(_parse_name(toks[2])))
        raise ValueError("malformed disjointness axiom")
    if len(toks) == 3 and toks[1] == "subrole":
        return RoleInclusion(parse_role(toks[0]), parse_role(toks[2]))
    if len(toks) == 3 and toks[1] == "subattr":
        return AttributeInclusion(_parse_name(toks[0]), _parse_name(toks[2]))
    parts = re.split(r"\s+sub\s+", line)
    if len(parts) != 2:
        raise ValueError("unrecognised axiom")
    lhs = _parse_side(parts[0], attributes)
    rhs = _parse_side(parts[1], attributes)
    if isinstance(lhs, AggregateConcept):
        return AggregateInclusion(lhs, rhs)
    return ConceptInclusion(lhs, rhs)


def format_ontology(o: Ontology) -> str:
    return "".join(f"{ax}\n" for ax in o.axioms)


def load_ontology(path) -> Ontology:
    path = Path(path)
    return parse_ontology(path.read_text(encoding="utf-8"), str(path))


# ---------------------------------------------------------------------------
# dataset CSV: kind,subject,predicate,object

_DATASET_HEADER = ["kind", "subject", "predicate", "object"]


def parse_dataset(text: str, path: str | None = None) -> Dataset:
    concepts, roles, attrs = set(), set(), set()
    reader = csv.reader(io.StringIO(text))
    for lineno, row in enumerate(reader, start=1):
        row = [cell.strip() for cell in row]
        if not row or not any(row) or row[0].startswith("#"):
            continue
        if lineno == 1 and [c.lower() for c in row] == _DATASET_HEADER:
            continue
        if len(row) == 3:
            row.append("")
        if len(row) != 4:
            raise OntologyParseError(f"expected 4 columns, got {len(row)}", lineno, path)
        kind, subject, predicate, obj = row
        if not subject or not predicate:
            raise OntologyParseError("empty subject or predicate", lineno, path)
        if kind == "concept":
            concepts.add((predicate, subject))
        elif kind == "role":
            if not obj:
                raise OntologyParseError("role assertion without object", lineno, path)
            roles.add((predicate, subject, obj))
        elif kind == "attr":
            try:
                attrs.add((predicate, subject, to_rational(obj)))
            except ValueError:
                raise OntologyParseError(f"attribute value {obj!r} is not a rational", lineno, path) from None
        else:
            raise OntologyParseError(f"unknown assertion kind {kind!r}", lineno, path)
    return Dataset(frozenset(concepts), frozenset(roles), frozenset(attrs))


def load_dataset(path) -> Dataset:
    path = Path(path)
    return parse_dataset(path.read_text(encoding="utf-8"), str(path))


def format_dataset(d: Dataset) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(_DATASET_HEADER)
    for name, ind in sorted(d.concepts):
        writer.writerow(["concept", ind, name, ""])
    for name, a, b in sorted(d.roles):
        writer.writerow(["role", a, name, b])
    for name, a, v in sorted(d.attributes):
        writer.writerow(["attr", a, name, format_rational(v)])
    return out.getvalue()


def iter_assertions(d: Dataset) -> Iterable[tuple]:
    for name, ind in sorted(d.concepts):
        yield ("concept", name, ind)
    for name, a, b in sorted(d.roles):
        yield ("role", name, a, b)
    for name, a, v in sorted(d.attributes):
        yield ("attr", name, a, v)
