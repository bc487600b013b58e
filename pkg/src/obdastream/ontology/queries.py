"""Conjunctive queries and unions of them over the ontology vocabulary.

Text syntax (also used by the ``rewrite`` command output)::

    q(x, y) :- Sensor(x), hasPart(x, y), testScore(y, v), [agg:min testScore >= 0.9](x)

Bare identifiers are variables (a leading ``?`` is allowed and dropped);
quoted strings are individuals and numbers are rationals. ``_`` is an
anonymous variable.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .syntax import AggregateConcept, format_rational, to_rational


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


Term = Union[Var, str, Fraction]


def term_text(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Fraction):
        return format_rational(t)
    return f'"{t}"'


def _term_key(t: Term) -> tuple:
    if isinstance(t, Var):
        return (0, t.name)
    if isinstance(t, Fraction):
        return (1, format_rational(t))
    return (2, t)


@dataclass(frozen=True)
class ConceptAtom:
    name: str
    term: Term

    kind = "concept"

    @property
    def terms(self) -> tuple:
        return (self.term,)

    @property
    def predicate(self) -> tuple:
        return ("concept", self.name)

    def with_terms(self, terms) -> ConceptAtom:
        return ConceptAtom(self.name, terms[0])

    def __str__(self) -> str:
        return f"{self.name}({term_text(self.term)})"


@dataclass(frozen=True)
class RoleAtom:
    name: str
    subject: Term
    object: Term

    kind = "role"

    @property
    def terms(self) -> tuple:
        return (self.subject, self.object)

    @property
    def predicate(self) -> tuple:
        return ("role", self.name)

    def with_terms(self, terms) -> RoleAtom:
        return RoleAtom(self.name, terms[0], terms[1])

    def __str__(self) -> str:
        return f"{self.name}({term_text(self.subject)}, {term_text(self.object)})"


@dataclass(frozen=True)
class AttributeAtom:
    name: str
    subject: Term
    value: Term

    kind = "attr"

    @property
    def terms(self) -> tuple:
        return (self.subject, self.value)

    @property
    def predicate(self) -> tuple:
        return ("attr", self.name)

    def with_terms(self, terms) -> AttributeAtom:
        return AttributeAtom(self.name, terms[0], terms[1])

    def __str__(self) -> str:
        return f"{self.name}({term_text(self.subject)}, {term_text(self.value)})"


@dataclass(frozen=True)
class AggregateAtom:
    concept: AggregateConcept
    term: Term

    kind = "aggregate"

    @property
    def terms(self) -> tuple:
        return (self.term,)

    @property
    def predicate(self) -> tuple:
        return ("aggregate", self.concept)

    def with_terms(self, terms) -> AggregateAtom:
        return AggregateAtom(self.concept, terms[0])

    def __str__(self) -> str:
        return f"[{self.concept}]({term_text(self.term)})"


Atom = Union[ConceptAtom, RoleAtom, AttributeAtom, AggregateAtom]


def atom_sort_key(atom: Atom, rename=None) -> tuple:
    rename = rename or {}
    terms = tuple(_term_key(rename.get(t, t) if isinstance(t, Var) else t) for t in atom.terms)
    return (atom.kind, str(atom.predicate[1]), terms)


@dataclass(frozen=True)
class ConjunctiveQuery:
    head: tuple
    atoms: tuple

    def __post_init__(self):
        object.__setattr__(self, "head", tuple(self.head))
        object.__setattr__(self, "atoms", tuple(self.atoms))
        body_vars = self.body_variables
        for t in self.head:
            if isinstance(t, Var) and t not in body_vars:
                raise ValueError(f"unsafe query: head variable {t} does not occur in the body")

    @property
    def body_variables(self) -> set:
        return {t for a in self.atoms for t in a.terms if isinstance(t, Var)}

    @property
    def head_variables(self) -> set:
        return {t for t in self.head if isinstance(t, Var)}

    @property
    def arity(self) -> int:
        return len(self.head)

    def substitute(self, subst: dict) -> ConjunctiveQuery:
        head = tuple(subst.get(t, t) for t in self.head)
        atoms = tuple(a.with_terms([subst.get(t, t) for t in a.terms]) for a in self.atoms)
        return ConjunctiveQuery(head, atoms)

    def __str__(self) -> str:
        head = ", ".join(term_text(t) for t in self.head)
        body = ", ".join(str(a) for a in self.atoms)
        return f"q({head}) :- {body}"


@dataclass(frozen=True)
class UnionOfCQs:
    disjuncts: tuple

    def __post_init__(self):
        disjuncts = tuple(self.disjuncts)
        if not disjuncts:
            raise ValueError("a union of conjunctive queries needs at least one disjunct")
        arities = {q.arity for q in disjuncts}
        if len(arities) != 1:
            raise ValueError(f"disjuncts disagree on head arity: {sorted(arities)}")
        seen, unique = set(), []
        for q in disjuncts:
            c = canonicalize(q)
            if c not in seen:
                seen.add(c)
                unique.append(c)
        object.__setattr__(self, "disjuncts", tuple(unique))

    @property
    def arity(self) -> int:
        return self.disjuncts[0].arity

    def __iter__(self):
        return iter(self.disjuncts)

    def __len__(self) -> int:
        return len(self.disjuncts)

    def __str__(self) -> str:
        return "\n".join(str(q) for q in self.disjuncts)


def canonicalize(q: ConjunctiveQuery) -> ConjunctiveQuery:
    """Rename non-answer variables to ``_v0, _v1, ...`` and sort the atoms.

    Head variables keep their names. Duplicate atoms collapse. Equal outputs
    mean syntactically identical queries up to renaming of existential variables;
    renamings that a plain sort cannot see through are tried exhaustively for
    small bodies.
    """
    head_vars = q.head_variables
    atoms = list(dict.fromkeys(q.atoms))
    exist = sorted({t for a in atoms for t in a.terms if isinstance(t, Var) and t not in head_vars})
    best = None
    if len(exist) <= 6:
        for perm in itertools.permutations(range(len(exist))):
            rename = {v: Var(f"_v{perm[i]}") for i, v in enumerate(exist)}
            key = tuple(sorted(atom_sort_key(a, rename) for a in atoms))
            if best is None or key < best[0]:
                best = (key, rename)
        rename = best[1]
    else:
        rename = _greedy_rename(atoms, exist)
    renamed = [a.with_terms([rename.get(t, t) for t in a.terms]) for a in atoms]
    renamed = sorted(set(renamed), key=atom_sort_key)
    return ConjunctiveQuery(q.head, tuple(renamed))


def _greedy_rename(atoms, exist) -> dict:
    placeholder = {v: Var("_") for v in exist}
    order = sorted(atoms, key=lambda a: atom_sort_key(a, placeholder))
    rename: dict = {}
    for a in order:
        for t in a.terms:
            if isinstance(t, Var) and t in placeholder and t not in rename:
                rename[t] = Var(f"_v{len(rename)}")
    return rename


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<str>"[^"]*"|'[^']*')
      | (?P<num>-?\d+(?:\.\d+)?(?:/\d+)?)
      | (?P<agg>\[[^\]]*\])
      | (?P<name>\??[A-Za-z_][\w.\-]*)
      | (?P<sym>:-|[(),])
    )""",
    re.VERBOSE,
)


class QueryParseError(ValueError):
    pass


def _tokenize(text: str) -> list[tuple[str, str]]:
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise QueryParseError(f"unexpected character {text[pos]!r} at offset {pos}")
        pos = m.end()
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
    return out


def parse_cq(text: str, ontology=None) -> ConjunctiveQuery:
    """Parse ``q(x) :- A(x), R(x, y)``.

    Binary predicates are classified as attributes when ``ontology`` declares
    them as such, roles otherwise; a ``role:``/``attr:`` prefix forces the kind.
    """
    attributes = ontology.attribute_names if ontology is not None else set()
    toks = _tokenize(text)
    pos = 0
    anon = itertools.count()

    def expect(value):
        nonlocal pos
        if pos >= len(toks) or toks[pos][1] != value:
            got = toks[pos][1] if pos < len(toks) else "end of input"
            raise QueryParseError(f"expected {value!r}, got {got!r}")
        pos += 1

    def term():
        nonlocal pos
        if pos >= len(toks):
            raise QueryParseError("unexpected end of query")
        kind, value = toks[pos]
        pos += 1
        if kind == "str":
            return value[1:-1]
        if kind == "num":
            return to_rational(value)
        if kind == "name":
            name = value.lstrip("?")
            if name == "_":
                return Var(f"_anon{next(anon)}")
            return Var(name)
        raise QueryParseError(f"expected a term, got {value!r}")

    def term_list():
        expect("(")
        terms = [term()]
        while pos < len(toks) and toks[pos][1] == ",":
            expect(",")
            terms.append(term())
        expect(")")
        return terms

    if not toks or toks[0][0] != "name":
        raise QueryParseError("query must start with a head such as q(x)")
    pos = 1
    head = term_list() if pos < len(toks) and toks[pos][1] == "(" else []
    expect(":-")
    atoms = []
    while True:
        if pos >= len(toks):
            raise QueryParseError("expected an atom")
        kind, value = toks[pos]
        pos += 1
        if kind == "agg":
            concept = parse_aggregate_concept(value[1:-1])
            (t,) = _arity(term_list(), 1, value)
            atoms.append(AggregateAtom(concept, t))
        elif kind == "name":
            forced = None
            if value in ("role", "attr", "concept") and pos < len(toks) and toks[pos][0] == "name":
                forced = value
                value = toks[pos][1]
                pos += 1
            terms = term_list()
            if len(terms) == 1 and forced in (None, "concept"):
                atoms.append(ConceptAtom(value, terms[0]))
            elif len(terms) == 2:
                is_attr = forced == "attr" or (forced is None and value in attributes)
                cls = AttributeAtom if is_attr else RoleAtom
                atoms.append(cls(value, terms[0], terms[1]))
            else:
                raise QueryParseError(f"predicate {value} used with {len(terms)} arguments")
        else:
            raise QueryParseError(f"expected an atom, got {value!r}")
        if pos < len(toks) and toks[pos][1] == ",":
            pos += 1
            continue
        break
    if pos != len(toks):
        raise QueryParseError(f"trailing input at {toks[pos][1]!r}")
    return ConjunctiveQuery(tuple(head), tuple(atoms))


def _arity(terms, n, name):
    if len(terms) != n:
        raise QueryParseError(f"{name} expects {n} argument(s)")
    return terms


_AGG_TEXT = re.compile(r"^\s*agg:(\w+)\s+(\S+)\s*(>=|<=|!=|==|=|<|>|≥|≤|≠)\s*(\S+)\s*$")


def parse_aggregate_concept(text: str) -> AggregateConcept:
    m = _AGG_TEXT.match(text)
    if not m:
        raise QueryParseError(f"bad aggregate concept {text!r}")
    agg, attr, cmp, thr = m.groups()
    try:
        return AggregateConcept(agg, cmp, to_rational(thr), attr)
    except ValueError as exc:
        raise QueryParseError(str(exc)) from None


def parse_ucq(text: str, ontology=None) -> UnionOfCQs:
    lines = [line.strip() for line in text.splitlines() if line.strip() and not line.strip().startswith("#")]
    return UnionOfCQs(tuple(parse_cq(line, ontology) for line in lines))
