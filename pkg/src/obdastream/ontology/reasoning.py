"""Reasoning services: validation, deductive closure, aggregate concepts,
satisfiability and a brute-force certain-answer oracle based on a bounded chase."""

from __future__ import annotations

import itertools
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

from .queries import (
    AggregateAtom,
    AttributeAtom,
    ConceptAtom,
    ConjunctiveQuery,
    RoleAtom,
    Var,
)
from .syntax import (
    AggregateConcept,
    AggregateInclusion,
    AtomicConcept,
    AttributeDisjoint,
    AttributeInclusion,
    ConceptDisjoint,
    ConceptInclusion,
    Dataset,
    ExistsAttribute,
    ExistsRole,
    FunctAttribute,
    FunctRole,
    Ontology,
    Role,
    RoleDisjoint,
    RoleInclusion,
    compare,
)

log = logging.getLogger(__name__)

DEFAULT_CHASE_DEPTH = 3


class OntologyValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class UnsatisfiableError(ValueError):
    def __init__(self, report):
        self.report = report
        super().__init__("ontology and dataset are unsatisfiable: " + "; ".join(str(v) for v in report.violations))


@dataclass(frozen=True)
class Violation:
    rule: str
    axioms: tuple
    detail: str = ""

    def __str__(self) -> str:
        axioms = ", ".join(f"[{ax}]" for ax in self.axioms)
        return f"{self.rule}: {axioms}" + (f" ({self.detail})" if self.detail else "")


# ---------------------------------------------------------------------------
# syntactic restrictions


def validate_ontology(o: Ontology) -> list[Violation]:
    """Report violations of the syntactic restrictions; an empty list means valid."""
    report = []
    role_incl = o.of_type(RoleInclusion)
    attr_incl = o.of_type(AttributeInclusion)
    for f in o.of_type(FunctRole):
        for ri in role_incl:
            if ri.rhs.base == f.role.base:
                report.append(Violation("functional-role-specialised", (f, ri), f"{f.role.base} is functional"))
    for f in o.of_type(FunctAttribute):
        for ai in attr_incl:
            if ai.rhs == f.attribute:
                report.append(Violation("functional-attribute-specialised", (f, ai), f"{f.attribute} is functional"))
    for ax in o.axioms:
        if isinstance(ax, (ConceptInclusion, AggregateInclusion)):
            if isinstance(ax.rhs, ExistsAttribute):
                report.append(Violation("attribute-existential-on-right", (ax,)))
            elif isinstance(ax.rhs, AggregateConcept):
                report.append(Violation("aggregate-concept-on-right", (ax,)))
            if isinstance(ax, ConceptInclusion) and isinstance(ax.lhs, AggregateConcept):
                report.append(Violation("aggregate-concept-in-regular-inclusion", (ax,)))
        elif isinstance(ax, ConceptDisjoint):
            if any(isinstance(c, (AggregateConcept, ExistsAttribute)) for c in (ax.first, ax.second)):
                report.append(Violation("non-basic-concept-in-disjointness", (ax,)))
    return report


def require_valid(o: Ontology) -> Ontology:
    violations = validate_ontology(o)
    if violations:
        raise OntologyValidationError(violations)
    return o


# ---------------------------------------------------------------------------
# role and attribute hierarchies


def super_roles(o: Ontology) -> dict:
    """Map each basic role R to every S with R ⊑* S (reflexive, inverse-aware)."""
    edges = defaultdict(set)
    roles = set()
    for ri in o.of_type(RoleInclusion):
        edges[ri.lhs].add(ri.rhs)
        edges[ri.lhs.inverse()].add(ri.rhs.inverse())
        roles.update((ri.lhs, ri.rhs, ri.lhs.inverse(), ri.rhs.inverse()))
    return _reflexive_transitive(edges, roles)


def super_attributes(o: Ontology) -> dict:
    edges = defaultdict(set)
    names = set()
    for ai in o.of_type(AttributeInclusion):
        edges[ai.lhs].add(ai.rhs)
        names.update((ai.lhs, ai.rhs))
    return _reflexive_transitive(edges, names)


def sub_attributes(o: Ontology, attribute: str) -> set[str]:
    sup = super_attributes(o)
    out = {attribute}
    out.update(f for f, ups in sup.items() if attribute in ups)
    return out


def _reflexive_transitive(edges, nodes) -> dict:
    closure = {}
    for start in nodes:
        seen = {start}
        stack = [start]
        while stack:
            for nxt in edges.get(stack.pop(), ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        closure[start] = seen
    return _Reflexive(closure)


class _Reflexive(dict):
    def __missing__(self, key):
        return {key}


# ---------------------------------------------------------------------------
# instances


@dataclass(frozen=True, order=True)
class Null:
    """Labelled null introduced by the chase for an existential witness."""

    ident: int

    def __str__(self) -> str:
        return f"_:n{self.ident}"


@dataclass
class Instance:
    """Set-based structure queries are evaluated over."""

    concepts: dict = field(default_factory=lambda: defaultdict(set))
    roles: dict = field(default_factory=lambda: defaultdict(set))
    attributes: dict = field(default_factory=lambda: defaultdict(set))
    aggregates: dict = field(default_factory=dict)
    exhausted: bool = False

    def aggregate_members(self, concept: AggregateConcept) -> set:
        return self.aggregates.get(concept, set())

    def role_pairs(self, role: Role) -> set:
        pairs = self.roles.get(role.base, set())
        if role.inverted:
            return {(b, a) for a, b in pairs}
        return pairs

    @property
    def domain(self) -> set:
        out = set()
        for members in self.concepts.values():
            out |= members
        for pairs in self.roles.values():
            for a, b in pairs:
                out.update((a, b))
        for pairs in self.attributes.values():
            for a, v in pairs:
                out.update((a, v))
        for members in self.aggregates.values():
            out |= members
        return out


def attribute_closure(d: Dataset, o: Ontology) -> set:
    """All F(a, v) derivable through attribute inclusion chains."""
    sup = super_attributes(o)
    out = set()
    for f, a, v in d.attributes:
        for g in sup[f]:
            out.add((g, a, v))
    return out


def _aggregate(agg: str, values: list):
    if agg == "min":
        return min(values)
    if agg == "max":
        return max(values)
    if agg == "count":
        return Fraction(len(values))
    if agg == "countd":
        return Fraction(len(set(values)))
    if agg == "sum":
        return sum(values, Fraction(0))
    if agg == "avg":
        return sum(values, Fraction(0)) / len(values)
    raise ValueError(f"unknown aggregate {agg!r}")


def aggregate_members(e: AggregateConcept, attribute_facts) -> set:
    groups = defaultdict(list)
    for f, a, v in attribute_facts:
        if f == e.attribute:
            groups[a].append(v)
    # individuals without values form no group and never qualify
    return {a for a, values in groups.items() if compare(_aggregate(e.agg, values), e.cmp, e.threshold)}


def eval_aggregate_concept(e: AggregateConcept, d: Dataset, o: Ontology) -> set:
    """Members of ``e`` under the closed-world reading of the attribute closure."""
    return aggregate_members(e, attribute_closure(d, o))


class _Saturation:
    """Shared machinery of the deductive closure and the chase."""

    def __init__(self, d: Dataset, o: Ontology, use_flags: bool):
        self.o = o
        self.sup_roles = super_roles(o)
        self.use_flags = use_flags
        self.attrs = attribute_closure(d, o)
        self.attr_subjects = defaultdict(set)
        for f, a, _ in self.attrs:
            self.attr_subjects[a].add(f)
        self.atomic = defaultdict(set)
        for name, ind in d.concepts:
            self.atomic[ind].add(name)
        self.edges = set()
        self.out_roles = defaultdict(set)
        for p, a, b in d.roles:
            self.add_edge(Role(p), a, b)
        self.flags = defaultdict(set)
        self.elements = set(d.individuals)
        self.depth = {x: 0 for x in self.elements}
        self.rules = defaultdict(list)
        self.existential_rules = []
        self.aggregates = {}
        for ax in o.axioms:
            if isinstance(ax, ConceptInclusion):
                self.rules[ax.lhs].append(ax.rhs)
                if isinstance(ax.rhs, ExistsRole):
                    self.existential_rules.append((ax.lhs, ax.rhs.role))
            elif isinstance(ax, AggregateInclusion):
                if ax.lhs not in self.aggregates:
                    self.aggregates[ax.lhs] = aggregate_members(ax.lhs, self.attrs)
                self.rules[ax.lhs].append(ax.rhs)
                if isinstance(ax.rhs, ExistsRole):
                    self.existential_rules.append((ax.lhs, ax.rhs.role))

    def add_edge(self, role: Role, a, b) -> None:
        for s in self.sup_roles[role]:
            x, y = (b, a) if s.inverted else (a, b)
            if (s.base, x, y) not in self.edges:
                self.edges.add((s.base, x, y))
                self.out_roles[x].add(Role(s.base))
                self.out_roles[y].add(Role(s.base, True))

    def held(self, x) -> set:
        out = {AtomicConcept(n) for n in self.atomic[x]}
        out.update(ExistsRole(r) for r in self.out_roles[x])
        out.update(ExistsAttribute(f) for f in self.attr_subjects[x])
        if self.use_flags:
            out.update(ExistsRole(r) for r in self.flags[x])
        for e, members in self.aggregates.items():
            if x in members:
                out.add(e)
        return out

    def saturate(self) -> None:
        changed = True
        while changed:
            changed = False
            for x in sorted(self.elements, key=_element_key):
                for lhs in list(self.held(x)):
                    for rhs in self.rules.get(lhs, ()):
                        if isinstance(rhs, AtomicConcept):
                            if rhs.name not in self.atomic[x]:
                                self.atomic[x].add(rhs.name)
                                changed = True
                        elif isinstance(rhs, ExistsRole) and self.use_flags:
                            for s in self.sup_roles[rhs.role]:
                                if s not in self.flags[x]:
                                    self.flags[x].add(s)
                                    changed = True

    def instance(self, exhausted: bool = False) -> Instance:
        inst = Instance(exhausted=exhausted)
        for x, names in self.atomic.items():
            for n in names:
                inst.concepts[n].add(x)
        for p, a, b in self.edges:
            inst.roles[p].add((a, b))
        for f, a, v in self.attrs:
            inst.attributes[f].add((a, v))
        inst.aggregates = dict(self.aggregates)
        return inst


def _element_key(x):
    if isinstance(x, Null):
        return (1, "", x.ident)
    return (0, x, 0)


def deductive_closure(d: Dataset, o: Ontology) -> Dataset:
    """Saturate ``d`` under the positive axioms, over named individuals only."""
    sat = _Saturation(d, o, use_flags=True)
    sat.saturate()
    concepts = {(n, x) for x, names in sat.atomic.items() for n in names}
    return Dataset(frozenset(concepts), frozenset(sat.edges), frozenset(sat.attrs))


def chase(d: Dataset, o: Ontology, max_depth: int = DEFAULT_CHASE_DEPTH) -> Instance:
    """Restricted chase bounded at ``max_depth`` levels of labelled nulls.

    The returned instance has ``exhausted`` set when some existential witness
    was not created because of the bound.
    """
    closed = deductive_closure(d, o)
    sat = _Saturation(closed, o, use_flags=False)
    sat.saturate()
    counter = itertools.count()
    exhausted = False
    while True:
        created = False
        for x in sorted(sat.elements, key=_element_key):
            held = sat.held(x)
            for lhs, role in sat.existential_rules:
                if lhs not in held or role in sat.out_roles[x]:
                    continue
                if sat.depth[x] >= max_depth:
                    exhausted = True
                    continue
                n = Null(next(counter))
                sat.elements.add(n)
                sat.depth[n] = sat.depth[x] + 1
                sat.add_edge(role, x, n)
                created = True
        if not created:
            break
        sat.saturate()
    return sat.instance(exhausted)


def dataset_instance(d: Dataset, o: Ontology) -> Instance:
    """The raw dataset as an instance; aggregate atoms use the closed attribute relation."""
    inst = Instance()
    for n, x in d.concepts:
        inst.concepts[n].add(x)
    for p, a, b in d.roles:
        inst.roles[p].add((a, b))
    for f, a, v in d.attributes:
        inst.attributes[f].add((a, v))
    inst.aggregates = _LazyAggregates(attribute_closure(d, o))
    return inst


class _LazyAggregates(dict):
    def __init__(self, attrs):
        super().__init__()
        self._attrs = attrs

    def get(self, concept, default=None):
        if concept not in self:
            self[concept] = aggregate_members(concept, self._attrs)
        return self[concept]


# ---------------------------------------------------------------------------
# satisfiability


@dataclass
class SatisfiabilityReport:
    satisfiable: bool
    violations: list

    def __bool__(self) -> bool:
        return self.satisfiable


def check_satisfiability(o: Ontology, d: Dataset) -> SatisfiabilityReport:
    sat = _Saturation(deductive_closure(d, o), o, use_flags=True)
    sat.saturate()
    violations = []

    for ax in o.of_type(FunctAttribute):
        values = defaultdict(set)
        for f, a, v in sat.attrs:
            if f == ax.attribute:
                values[a].add(v)
        for a in sorted(values):
            if len(values[a]) > 1:
                vs = sorted(values[a])
                violations.append(Violation("functionality", (ax,), f"{a} has values {', '.join(str(v) for v in vs)}"))
    for ax in o.of_type(FunctRole):
        succ = defaultdict(set)
        for p, a, b in sat.edges:
            if p == ax.role.base:
                x, y = (b, a) if ax.role.inverted else (a, b)
                succ[x].add(y)
        for a in sorted(succ):
            if len(succ[a]) > 1:
                violations.append(
                    Violation("functionality", (ax,), f"{a} has successors {', '.join(sorted(succ[a]))}")
                )
    for ax in o.of_type(AttributeDisjoint):
        first = {(a, v) for f, a, v in sat.attrs if f == ax.first}
        second = {(a, v) for f, a, v in sat.attrs if f == ax.second}
        for a, v in sorted(first & second):
            violations.append(Violation("disjointness", (ax,), f"{a} has value {v} for both"))
    for ax in o.of_type(RoleDisjoint):
        first = _oriented_pairs(sat.edges, ax.first)
        second = _oriented_pairs(sat.edges, ax.second)
        for a, b in sorted(first & second):
            violations.append(Violation("disjointness", (ax,), f"({a}, {b}) is in both"))
    for ax in o.of_type(ConceptDisjoint):
        for x in sorted(sat.elements, key=_element_key):
            held = sat.held(x)
            if ax.first in held and ax.second in held:
                violations.append(Violation("disjointness", (ax,), f"{x} is in both"))

    violations.extend(_anonymous_violations(sat))
    return SatisfiabilityReport(not violations, violations)


def _oriented_pairs(edges, role: Role) -> set:
    pairs = {(a, b) for p, a, b in edges if p == role.base}
    if role.inverted:
        return {(b, a) for a, b in pairs}
    return pairs


def _anonymous_violations(sat: _Saturation) -> list:
    """Disjointness clashes forced on existential witnesses.

    A witness created for ``∃R`` carries exactly the concepts entailed by
    ``∃R⁻`` (plus what its own existentials imply), so each generating role
    yields one witness type; every reachable type is checked once.
    """
    o = sat.o
    rules = sat.rules
    sup = sat.sup_roles
    pending = set()
    for x in sat.elements:
        held = sat.held(x)
        for lhs, role in sat.existential_rules:
            if lhs in held and role not in sat.out_roles[x]:
                pending.add(role)
    pending = sorted(pending)
    seen = set()
    violations = []
    disjoint_concepts = o.of_type(ConceptDisjoint)
    disjoint_roles = o.of_type(RoleDisjoint)
    while pending:
        role = pending.pop()
        if role in seen:
            continue
        seen.add(role)
        to_parent = sup[role.inverse()]
        held = {ExistsRole(s) for s in to_parent}
        children = set()
        changed = True
        while changed:
            changed = False
            for lhs in list(held):
                for rhs in rules.get(lhs, ()):
                    if isinstance(rhs, AtomicConcept):
                        new = [rhs]
                    else:
                        if rhs.role not in to_parent:
                            children.add(rhs.role)
                        new = [ExistsRole(s) for s in sup[rhs.role]]
                    for c in new:
                        if c not in held:
                            held.add(c)
                            changed = True
        pending.extend(sorted(children - seen))
        for ax in disjoint_concepts:
            if ax.first in held and ax.second in held:
                violations.append(Violation("disjointness", (ax,), f"forced on an anonymous {role}-successor"))
        edge_roles = sup[role]
        for ax in disjoint_roles:
            if {ax.first, ax.second} <= edge_roles:
                violations.append(Violation("disjointness", (ax,), f"forced on an anonymous {role}-edge"))
    return violations


# ---------------------------------------------------------------------------
# query evaluation and the oracle


def evaluate_cq(q: ConjunctiveQuery, inst: Instance) -> set:
    """All head tuples of homomorphisms of ``q`` into ``inst``."""
    answers = set()
    atoms = _order_atoms(q.atoms)
    for binding in _match(atoms, 0, {}, inst):
        answers.add(tuple(binding.get(t, t) if isinstance(t, Var) else t for t in q.head))
    return answers


def _order_atoms(atoms) -> list:
    # constants and previously bound variables first keeps the search narrow
    remaining = list(atoms)
    ordered, bound = [], set()
    while remaining:
        remaining.sort(key=lambda a: -sum(1 for t in a.terms if not isinstance(t, Var) or t in bound))
        a = remaining.pop(0)
        ordered.append(a)
        bound.update(t for t in a.terms if isinstance(t, Var))
    return ordered


def _candidates(atom, inst: Instance):
    if isinstance(atom, ConceptAtom):
        return [(x,) for x in inst.concepts.get(atom.name, ())]
    if isinstance(atom, AggregateAtom):
        return [(x,) for x in inst.aggregate_members(atom.concept)]
    if isinstance(atom, RoleAtom):
        return inst.roles.get(atom.name, ())
    if isinstance(atom, AttributeAtom):
        return inst.attributes.get(atom.name, ())
    raise TypeError(f"unknown atom {atom!r}")


def _match(atoms, i, binding, inst):
    if i == len(atoms):
        yield binding
        return
    atom = atoms[i]
    for fact in _candidates(atom, inst):
        new = binding
        ok = True
        for t, value in zip(atom.terms, fact):
            if isinstance(t, Var):
                bound = new.get(t, _UNBOUND)
                if bound is _UNBOUND:
                    if new is binding:
                        new = dict(binding)
                    new[t] = value
                elif bound != value or type(bound) is not type(value):
                    ok = False
                    break
            elif t != value or type(t) is not type(value):
                ok = False
                break
        if ok:
            yield from _match(atoms, i + 1, new, inst)


_UNBOUND = object()


@dataclass
class OracleResult:
    answers: set
    exhausted: bool

    def __iter__(self):
        return iter(self.answers)


def certain_answers_oracle(
    q: ConjunctiveQuery, o: Ontology, d: Dataset, max_depth: int = DEFAULT_CHASE_DEPTH
) -> OracleResult:
    """Certain answers by evaluating ``q`` over the bounded chase.

    Aggregate atoms are closed predicates fixed by the attribute closure.
    Tuples mentioning labelled nulls are dropped. ``exhausted`` means the
    bound cut the chase short; the answers are then sound but may be
    incomplete.
    """
    report = check_satisfiability(o, d)
    if not report.satisfiable:
        raise UnsatisfiableError(report)
    inst = chase(d, o, max_depth)
    inst.aggregates = _LazyAggregates(attribute_closure(d, o))
    answers = {t for t in evaluate_cq(q, inst) if not any(isinstance(v, Null) for v in t)}
    if inst.exhausted:
        log.info("chase depth %d exhausted; answers may be incomplete", max_depth)
    return OracleResult(answers, inst.exhausted)
