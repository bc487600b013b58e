import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import random_dataset, random_instance, random_ontology
from obdastream.ontology import (
    AggregateConcept,
    AttributeDisjoint,
    AttributeInclusion,
    ConceptDisjoint,
    AtomicConcept,
    Dataset,
    FunctAttribute,
    FunctRole,
    Null,
    Ontology,
    OntologyParseError,
    Role,
    RoleInclusion,
    Var,
    certain_answers_oracle,
    chase,
    check_satisfiability,
    deductive_closure,
    eval_aggregate_concept,
    format_dataset,
    format_ontology,
    parse_cq,
    parse_dataset,
    parse_ontology,
    validate_ontology,
)
from obdastream.ontology.queries import AggregateAtom, AttributeAtom, ConceptAtom, RoleAtom

EQ1 = "precisionScore subattr testScore\nagg:min testScore >= 0.9 sub Reliable\n"
EXAMPLE = Dataset.of(attributes=[("precisionScore", "s1", Fraction("0.9")), ("testScore", "s2", Fraction("0.95")),
                                 ("testScore", "s3", Fraction("0.5"))])


def _eq1():
    return parse_ontology(EQ1)


class TestParsing:
    def test_all_axiom_forms(self):
        text = """# every form
A sub B
exists R sub B
exists inv(R) sub B
exists F sub B
agg:min F >= 0.9 sub B
R1 subrole R2
F1 subattr F2
funct R
funct attr F
disjoint A B
disjoint role R1 R2
disjoint attr F1 F2
A sub exists R
"""
        o = parse_ontology(text)
        assert len(o) == 13
        assert parse_ontology(format_ontology(o)) == o

    def test_attribute_existential_is_recognised(self):
        o = parse_ontology("exists F sub B\nF subattr G\n")
        assert "F" in o.attribute_names
        assert "F" not in o.role_names

    def test_parse_error_names_line(self):
        with pytest.raises(OntologyParseError) as e:
            parse_ontology("A sub B\n\nA subb C\n")
        assert e.value.line == 3

    def test_bad_aggregate(self):
        with pytest.raises(OntologyParseError):
            parse_ontology("agg:median F >= 1 sub B\n")

    def test_dataset_round_trip(self):
        text = "kind,subject,predicate,object\nconcept,a,A,\nrole,a,R,b\nattr,a,F,0.25\n"
        d = parse_dataset(text)
        assert ("F", "a", Fraction(1, 4)) in d.attributes
        assert parse_dataset(format_dataset(d)) == d

    def test_dataset_non_numeric_attribute(self):
        with pytest.raises(OntologyParseError):
            parse_dataset("kind,subject,predicate,object\nattr,a,F,hot\n")

    def test_double_inversion_normalises(self):
        assert Role("R").inverse().inverse() == Role("R")


class TestValidation:
    def test_functional_role_specialised(self):
        o = Ontology((FunctRole(Role("hasPart")), RoleInclusion(Role("partOf"), Role("hasPart"))))
        v = validate_ontology(o)
        assert len(v) == 1
        assert "hasPart" in str(v[0])

    def test_functional_attribute_specialised(self):
        o = Ontology((FunctAttribute("F"), AttributeInclusion("G", "F")))
        assert len(validate_ontology(o)) == 1

    def test_running_example_is_valid(self):
        assert validate_ontology(_eq1()) == []

    def test_empty_is_valid(self):
        assert validate_ontology(Ontology()) == []

    def test_exists_attribute_on_right_is_rejected(self):
        from obdastream.ontology import ConceptInclusion, ExistsAttribute

        o = Ontology((ConceptInclusion(AtomicConcept("A"), ExistsAttribute("F")),))
        assert validate_ontology(o)


class TestClosure:
    def test_example_adds_test_score(self):
        c = deductive_closure(EXAMPLE, _eq1())
        assert ("testScore", "s1", Fraction("0.9")) in c.attributes

    def test_empty(self):
        assert len(deductive_closure(Dataset.of(), _eq1())) == 0

    def test_chain(self):
        o = parse_ontology("F1 subattr F2\nF2 subattr F3\n")
        c = deductive_closure(Dataset.of(attributes=[("F1", "a", 1)]), o)
        assert c.attributes == {("F1", "a", 1), ("F2", "a", 1), ("F3", "a", 1)}

    def test_concept_and_role_steps(self):
        o = parse_ontology("A sub B\nexists R sub C\nexists inv(R) sub D\nR subrole S\n")
        c = deductive_closure(Dataset.of(concepts=[("A", "a")], roles=[("R", "a", "b")]), o)
        assert {("B", "a"), ("C", "a"), ("D", "b")} <= c.concepts
        assert ("S", "a", "b") in c.roles

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_monotone_and_idempotent(self, seed):
        rng = random.Random(seed)
        o = random_ontology(rng)
        if validate_ontology(o):
            return
        d = random_dataset(rng, o)
        c = deductive_closure(d, o)
        assert d <= c
        assert deductive_closure(c, o) == c


class TestAggregateConcepts:
    def test_min_test_score(self):
        e = AggregateConcept("min", ">=", Fraction("0.9"), "testScore")
        assert eval_aggregate_concept(e, EXAMPLE, _eq1()) == {"s1", "s2"}

    def test_min_precision_score(self):
        e = AggregateConcept("min", ">=", Fraction("0.9"), "precisionScore")
        assert eval_aggregate_concept(e, EXAMPLE, _eq1()) == {"s1"}

    def test_empty_dataset(self):
        for agg in ("min", "max", "count", "countd", "sum", "avg"):
            assert eval_aggregate_concept(AggregateConcept(agg, ">=", 0, "F"), Dataset.of(), Ontology()) == set()

    def test_exact_rationals(self):
        # 0.1 + 0.2 = 0.3 exactly, which binary floats would get wrong
        d = Dataset.of(attributes=[("F", "a", Fraction("0.1")), ("F", "a", Fraction("0.2"))])
        assert eval_aggregate_concept(AggregateConcept("sum", "=", Fraction("0.3"), "F"), d, Ontology()) == {"a"}

    def test_count_and_countd(self):
        d = Dataset.of(attributes=[("F", "a", 1), ("G", "a", 1)])
        o = parse_ontology("G subattr F\n")
        # one value reached through two attributes is still one (a, v) pair
        assert eval_aggregate_concept(AggregateConcept("count", "=", 1, "F"), d, o) == {"a"}
        assert eval_aggregate_concept(AggregateConcept("countd", "=", 1, "F"), d, o) == {"a"}

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_concept_assertions_do_not_matter(self, seed):
        rng = random.Random(seed)
        o = random_ontology(rng)
        if validate_ontology(o):
            return
        d = random_dataset(rng, o)
        e = AggregateConcept(rng.choice(["min", "max", "count", "sum", "avg"]), rng.choice([">=", "<", "="]),
                             rng.choice([0, 1, 2]), rng.choice(sorted(o.attribute_names) or ["F"]))
        extra = Dataset(d.concepts | {("A", "zz")}, d.roles, d.attributes)
        assert eval_aggregate_concept(e, d, o) == eval_aggregate_concept(e, extra, o)


class TestSatisfiability:
    def test_functional_attribute(self):
        r = check_satisfiability(Ontology((FunctAttribute("F"),)), Dataset.of(attributes=[("F", "a", 1), ("F", "a", 2)]))
        assert not r.satisfiable
        assert len(r.violations) == 1
        assert "a has values 1, 2" in str(r.violations[0])

    def test_functionality_is_per_attribute(self):
        o = Ontology((FunctAttribute("F"), AttributeInclusion("G", "H")))
        d = Dataset.of(attributes=[("F", "a", 1), ("G", "a", 2)])
        assert check_satisfiability(o, d).satisfiable

    def test_concept_disjointness(self):
        o = Ontology((ConceptDisjoint(AtomicConcept("A"), AtomicConcept("B")),))
        r = check_satisfiability(o, Dataset.of(concepts=[("A", "a"), ("B", "a")]))
        assert not r.satisfiable
        assert "a is in both" in str(r.violations[0])

    def test_derived_disjointness(self):
        o = parse_ontology("disjoint A B\nC sub B\n")
        assert not check_satisfiability(o, Dataset.of(concepts=[("A", "a"), ("C", "a")])).satisfiable

    def test_attribute_disjointness(self):
        o = Ontology((AttributeDisjoint("F", "G"),))
        assert not check_satisfiability(o, Dataset.of(attributes=[("F", "a", 1), ("G", "a", 1)])).satisfiable
        assert check_satisfiability(o, Dataset.of(attributes=[("F", "a", 1), ("G", "a", 2)])).satisfiable

    def test_running_example(self):
        assert check_satisfiability(_eq1(), EXAMPLE).satisfiable

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_invariant_under_duplication(self, seed):
        rng = random.Random(seed)
        o = random_ontology(rng)
        if validate_ontology(o):
            return
        d = random_dataset(rng, o)
        doubled = Dataset.of(list(d.concepts) * 2, list(d.roles) * 2, list(d.attributes) * 2)
        assert check_satisfiability(o, d).satisfiable == check_satisfiability(o, doubled).satisfiable


def _brute_force(q, inst):
    """Try every assignment of the query variables over the instance domain."""
    variables = sorted({t for a in q.atoms for t in a.terms if isinstance(t, Var)}, key=lambda v: v.name)
    dom = list(inst.domain)
    out = set()
    for values in itertools.product(dom, repeat=len(variables)):
        b = dict(zip(variables, values))

        def val(t):
            return b[t] if isinstance(t, Var) else t

        ok = True
        for a in q.atoms:
            if isinstance(a, ConceptAtom):
                ok = val(a.term) in inst.concepts.get(a.name, ())
            elif isinstance(a, RoleAtom):
                ok = (val(a.subject), val(a.object)) in inst.roles.get(a.name, ())
            elif isinstance(a, AttributeAtom):
                ok = (val(a.subject), val(a.value)) in inst.attributes.get(a.name, ())
            elif isinstance(a, AggregateAtom):
                ok = val(a.term) in inst.aggregate_members(a.concept)
            if not ok:
                break
        if ok:
            row = tuple(val(t) for t in q.head)
            if not any(isinstance(v, Null) for v in row):
                out.add(row)
    return out


class TestOracle:
    def test_running_example(self):
        q = parse_cq("q(x) :- Reliable(x)")
        assert certain_answers_oracle(q, _eq1(), EXAMPLE).answers == {("s1",), ("s2",)}

    def test_empty(self):
        assert certain_answers_oracle(parse_cq("q(x) :- A(x)"), Ontology(), Dataset.of()).answers == set()

    def test_existential_is_not_an_answer(self):
        o = parse_ontology("A sub exists R\nexists inv(R) sub B\n")
        d = Dataset.of(concepts=[("A", "a")])
        assert certain_answers_oracle(parse_cq("q(x) :- R(x, y)"), o, d).answers == {("a",)}
        assert certain_answers_oracle(parse_cq("q(y) :- R(x, y)"), o, d).answers == set()
        assert certain_answers_oracle(parse_cq("q(x) :- R(x, y), B(y)"), o, d).answers == {("a",)}

    def test_unsatisfiable_is_reported(self):
        from obdastream.ontology import UnsatisfiableError

        o = Ontology((ConceptDisjoint(AtomicConcept("A"), AtomicConcept("B")),))
        with pytest.raises(UnsatisfiableError):
            certain_answers_oracle(parse_cq("q(x) :- A(x)"), o, Dataset.of(concepts=[("A", "a"), ("B", "a")]))

    def test_chase_exhaustion_is_flagged(self):
        o = parse_ontology("A sub exists R\nexists inv(R) sub A\n")
        res = certain_answers_oracle(parse_cq("q(x) :- A(x)"), o, Dataset.of(concepts=[("A", "a")]), max_depth=2)
        assert res.exhausted
        assert res.answers == {("a",)}

    def test_join_matches_brute_force(self):
        rng = random.Random(5)
        q = parse_cq("q(x, y) :- R(x, y), A(y)")
        for _ in range(20):
            o, d, _ = random_instance(rng)
            if validate_ontology(o):
                continue
            inst = chase(d, o)
            inst.aggregates = {}
            expected = _brute_force(q, inst)
            assert certain_answers_oracle(q, o, d).answers == expected

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_random_queries_match_brute_force(self, seed):
        rng = random.Random(seed)
        o, d, q = random_instance(rng)
        from obdastream.ontology.reasoning import _LazyAggregates, attribute_closure

        inst = chase(d, o)
        inst.aggregates = _LazyAggregates(attribute_closure(d, o))
        assert certain_answers_oracle(q, o, d).answers == _brute_force(q, inst)
