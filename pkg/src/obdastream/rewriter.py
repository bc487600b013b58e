"""Query rewriting: fold the positive inclusions of the ontology into a query.

PerfectRef-style saturation. Each atom is rewritten backwards through the
applicable inclusion; pairs of unifiable atoms are merged through their most
general unifier. Aggregate atoms are closed predicates and stay as they are.
"""

from __future__ import annotations

import itertools
from collections import Counter
from typing import Iterable

from .ontology import (
    AggregateAtom,
    AggregateInclusion,
    AtomicConcept,
    AttributeAtom,
    AttributeInclusion,
    ConceptAtom,
    ConceptInclusion,
    ConjunctiveQuery,
    Dataset,
    ExistsAttribute,
    ExistsRole,
    Ontology,
    Role,
    RoleAtom,
    RoleInclusion,
    UnionOfCQs,
    Var,
    canonicalize,
    dataset_instance,
    evaluate_cq,
    sub_attributes,
)


class UnknownPredicateError(ValueError):
    def __init__(self, kind: str, name: str):
        self.kind = kind
        self.name = name
        super().__init__(f"unknown {kind} {name!r}")


def signature(o: Ontology) -> set[tuple[str, str]]:
    sig = {("concept", n) for n in o.concept_names}
    sig |= {("role", n) for n in o.role_names}
    sig |= {("attr", n) for n in o.attribute_names}
    return sig


def check_vocabulary(q: ConjunctiveQuery, o: Ontology, vocabulary: Iterable[tuple[str, str]]) -> None:
    known = signature(o) | set(vocabulary)
    for atom in q.atoms:
        if isinstance(atom, AggregateAtom):
            if ("attr", atom.concept.attribute) not in known:
                raise UnknownPredicateError("attr", atom.concept.attribute)
        elif atom.predicate not in known:
            raise UnknownPredicateError(*atom.predicate)


class _Fresh:
    def __init__(self):
        self._ids = itertools.count()

    def __call__(self) -> Var:
        return Var(f"_f{next(self._ids)}")


def _unbound(q: ConjunctiveQuery) -> set:
    counts = Counter(t for a in q.atoms for t in a.terms if isinstance(t, Var))
    head = q.head_variables
    return {v for v, n in counts.items() if n == 1 and v not in head}


def _concept_atom(concept, term, fresh):
    """Atom asserting that ``term`` is an instance of ``concept``."""
    if isinstance(concept, AtomicConcept):
        return ConceptAtom(concept.name, term)
    if isinstance(concept, ExistsRole):
        r = concept.role
        return RoleAtom(r.base, fresh(), term) if r.inverted else RoleAtom(r.base, term, fresh())
    if isinstance(concept, ExistsAttribute):
        return AttributeAtom(concept.attribute, term, fresh())
    return AggregateAtom(concept, term)


def _role_atom(role: Role, subject, obj) -> RoleAtom:
    if role.inverted:
        return RoleAtom(role.base, obj, subject)
    return RoleAtom(role.base, subject, obj)


class _Rules:
    def __init__(self, o: Ontology):
        self.by_rhs = {}
        for ax in o.axioms:
            if isinstance(ax, (ConceptInclusion, AggregateInclusion)):
                self.by_rhs.setdefault(ax.rhs, []).append(ax.lhs)
        self.roles = o.of_type(RoleInclusion)
        self.attrs = o.of_type(AttributeInclusion)


def _rewrite_atom(atom, unbound: set, rules: _Rules, fresh) -> list:
    out = []
    if isinstance(atom, ConceptAtom):
        for lhs in rules.by_rhs.get(AtomicConcept(atom.name), ()):
            out.append(_concept_atom(lhs, atom.term, fresh))
    elif isinstance(atom, RoleAtom):
        s, o = atom.subject, atom.object
        if o in unbound:
            for lhs in rules.by_rhs.get(ExistsRole(Role(atom.name)), ()):
                out.append(_concept_atom(lhs, s, fresh))
        if s in unbound:
            for lhs in rules.by_rhs.get(ExistsRole(Role(atom.name, True)), ()):
                out.append(_concept_atom(lhs, o, fresh))
        for ri in rules.roles:
            if ri.rhs == Role(atom.name):
                out.append(_role_atom(ri.lhs, s, o))
            elif ri.rhs == Role(atom.name, True):
                out.append(_role_atom(ri.lhs.inverse(), s, o))
    elif isinstance(atom, AttributeAtom):
        for ai in rules.attrs:
            if ai.rhs == atom.name:
                out.append(AttributeAtom(ai.lhs, atom.subject, atom.value))
    # aggregate atoms are terminal
    return out


def _unify(a, b, head_vars) -> dict | None:
    if a.predicate != b.predicate:
        return None
    subst: dict = {}

    def walk(t):
        while isinstance(t, Var) and t in subst:
            t = subst[t]
        return t

    for s, t in zip(a.terms, b.terms):
        s, t = walk(s), walk(t)
        if s == t:
            continue
        if isinstance(s, Var) and isinstance(t, Var):
            # keep answer variables as representatives
            if s in head_vars and t not in head_vars:
                subst[t] = s
            else:
                subst[s] = t
        elif isinstance(s, Var):
            subst[s] = t
        elif isinstance(t, Var):
            subst[t] = s
        else:
            return None
    return {v: walk(v) for v in subst}


def _replace(q: ConjunctiveQuery, i: int, atom) -> ConjunctiveQuery:
    atoms = list(q.atoms)
    atoms[i] = atom
    return ConjunctiveQuery(q.head, tuple(atoms))


def rewrite(q: ConjunctiveQuery, o: Ontology, vocabulary=None, max_disjuncts: int = 100_000) -> UnionOfCQs:
    """Rewrite ``q`` into a union of CQs whose plain evaluation gives certain answers.

    With ``vocabulary`` (pairs such as ``("concept", "Sensor")``, typically
    taken from the mappings) every predicate of ``q`` must occur in the
    ontology or the vocabulary.
    """
    if vocabulary is not None:
        check_vocabulary(q, o, vocabulary)
    rules = _Rules(o)
    fresh = _Fresh()
    start = canonicalize(q)
    seen = {start}
    order = [start]
    queue = [start]
    while queue:
        cq = queue.pop(0)
        produced = []
        unbound = _unbound(cq)
        for i, atom in enumerate(cq.atoms):
            for new_atom in _rewrite_atom(atom, unbound, rules, fresh):
                produced.append(_replace(cq, i, new_atom))
        head_vars = cq.head_variables
        for i, j in itertools.combinations(range(len(cq.atoms)), 2):
            subst = _unify(cq.atoms[i], cq.atoms[j], head_vars)
            if subst is not None:
                produced.append(cq.substitute(subst))
        for new in produced:
            c = canonicalize(new)
            if c not in seen:
                seen.add(c)
                order.append(c)
                queue.append(c)
        if len(order) > max_disjuncts:
            raise RuntimeError(f"rewriting exceeded {max_disjuncts} disjuncts")
    return UnionOfCQs(tuple(order))


def rewrite_attribute(attribute: str, o: Ontology, vocabulary=None) -> UnionOfCQs:
    """``q(x, y) :- F'(x, y)`` for every F' with F' ⊑* F, starting with F itself."""
    known = {n for k, n in (vocabulary or ()) if k == "attr"} | o.attribute_names
    if attribute not in known:
        raise UnknownPredicateError("attr", attribute)
    x, y = Var("x"), Var("y")
    names = [attribute] + sorted(sub_attributes(o, attribute) - {attribute})
    return UnionOfCQs(tuple(ConjunctiveQuery((x, y), (AttributeAtom(n, x, y),)) for n in names))


def evaluate_ucq(u: UnionOfCQs, d: Dataset, o: Ontology) -> set:
    """Evaluate a rewriting directly over the raw assertions.

    Only aggregate atoms look at the ontology (their attribute extension is
    the closed one); everything else is matched as stored.
    """
    inst = dataset_instance(d, o)
    out = set()
    for cq in u:
        out |= evaluate_cq(cq, inst)
    return out
