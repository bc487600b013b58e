"""Random small ontologies, datasets and queries for oracle comparisons."""

from __future__ import annotations

import random
from fractions import Fraction

from obdastream.ontology import (
    AggregateAtom,
    AggregateConcept,
    AggregateInclusion,
    AtomicConcept,
    AttributeAtom,
    AttributeInclusion,
    ConceptAtom,
    ConceptDisjoint,
    ConceptInclusion,
    ConjunctiveQuery,
    Dataset,
    ExistsAttribute,
    ExistsRole,
    FunctAttribute,
    Ontology,
    Role,
    RoleAtom,
    RoleInclusion,
    Var,
    check_satisfiability,
    validate_ontology,
)

CONCEPTS = ["A", "B", "C", "D"]
ROLES = ["P", "R"]
ATTRIBUTES = ["F", "G", "H"]
INDIVIDUALS = ["a", "b", "c", "d", "e", "f"]
VALUES = [Fraction(0), Fraction(1, 2), Fraction(1), Fraction(2), Fraction(3)]
AGGS = ["min", "max", "count", "countd", "sum", "avg"]
CMPS = [">=", "<=", "<", ">", "=", "!="]


def _role(rng) -> Role:
    return Role(rng.choice(ROLES), rng.random() < 0.3)


def _aggregate(rng, attributes) -> AggregateConcept:
    return AggregateConcept(rng.choice(AGGS), rng.choice(CMPS), rng.choice(VALUES), rng.choice(attributes))


def random_ontology(rng: random.Random, max_axioms: int = 8, max_aggregates: int = 2) -> Ontology:
    attributes = ATTRIBUTES[: rng.randint(1, 3)]
    n_agg = rng.randint(0, max_aggregates)
    axioms = [AggregateInclusion(_aggregate(rng, attributes), AtomicConcept(rng.choice(CONCEPTS)))
              for _ in range(n_agg)]
    while len(axioms) < rng.randint(n_agg, max_axioms):
        k = rng.random()
        if k < 0.35:
            lhs = rng.choice([AtomicConcept(rng.choice(CONCEPTS)), ExistsRole(_role(rng)),
                              ExistsAttribute(rng.choice(attributes))])
            rhs = AtomicConcept(rng.choice(CONCEPTS)) if rng.random() < 0.75 else ExistsRole(_role(rng))
            axioms.append(ConceptInclusion(lhs, rhs))
        elif k < 0.55:
            axioms.append(RoleInclusion(_role(rng), _role(rng)))
        elif k < 0.75:
            axioms.append(AttributeInclusion(rng.choice(attributes), rng.choice(attributes)))
        elif k < 0.85:
            axioms.append(ConceptDisjoint(AtomicConcept(rng.choice(CONCEPTS)), AtomicConcept(rng.choice(CONCEPTS))))
        else:
            axioms.append(FunctAttribute(rng.choice(attributes)))
    return Ontology(tuple(axioms))


def random_dataset(rng: random.Random, o: Ontology, max_individuals: int = 6) -> Dataset:
    inds = INDIVIDUALS[: rng.randint(1, max_individuals)]
    attributes = sorted(o.attribute_names) or ATTRIBUTES[:1]
    concepts = {(rng.choice(CONCEPTS), rng.choice(inds)) for _ in range(rng.randint(0, 5))}
    roles = {(rng.choice(ROLES), rng.choice(inds), rng.choice(inds)) for _ in range(rng.randint(0, 5))}
    attrs = {(rng.choice(attributes), rng.choice(inds), rng.choice(VALUES)) for _ in range(rng.randint(0, 6))}
    return Dataset.of(concepts, roles, attrs)


def random_query(rng: random.Random, o: Ontology, d: Dataset) -> ConjunctiveQuery:
    concepts = sorted(o.concept_names | {c for c, _ in d.concepts})
    roles = sorted(o.role_names | {r for r, _, _ in d.roles})
    attributes = sorted(o.attribute_names | {f for f, _, _ in d.attributes})
    vs = [Var("x"), Var("y"), Var("z")]
    kinds = [k for k, names in (("concept", concepts), ("role", roles), ("attr", attributes),
                                ("agg", attributes)) if names]
    atoms = []
    for _ in range(rng.randint(1, 3)):
        k = rng.choice(kinds)
        if k == "concept":
            atoms.append(ConceptAtom(rng.choice(concepts), rng.choice(vs[:2])))
        elif k == "role":
            atoms.append(RoleAtom(rng.choice(roles), rng.choice(vs), rng.choice(vs)))
        elif k == "attr":
            atoms.append(AttributeAtom(rng.choice(attributes), rng.choice(vs[:2]), Var("v")))
        else:
            atoms.append(AggregateAtom(_aggregate(rng, attributes), rng.choice(vs[:2])))
    used = []
    for a in atoms:
        for t in a.terms:
            if isinstance(t, Var) and t not in used:
                used.append(t)
    head = [v for v in used if rng.random() < 0.7] or used[:1]
    return ConjunctiveQuery(tuple(head), tuple(atoms))


def random_instance(rng: random.Random):
    """A valid ontology, a dataset it is satisfiable with, and a query over their vocabulary."""
    while True:
        o = random_ontology(rng)
        if validate_ontology(o):
            continue
        d = random_dataset(rng, o)
        if not (o.concept_names or o.role_names or o.attribute_names or len(d)):
            continue
        if not check_satisfiability(o, d).satisfiable:
            continue
        return o, d, random_query(rng, o, d)
