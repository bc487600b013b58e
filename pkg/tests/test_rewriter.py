import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import random_instance, random_ontology
from obdastream.ontology import (
    AggregateAtom,
    Ontology,
    canonicalize,
    certain_answers_oracle,
    parse_cq,
    parse_ontology,
    parse_ucq,
    validate_ontology,
)
from obdastream.rewriter import UnknownPredicateError, evaluate_ucq, rewrite, rewrite_attribute

EQ1 = parse_ontology("precisionScore subattr testScore\nagg:min testScore >= 0.9 sub Reliable\n")


def _canon(u):
    return {canonicalize(q) for q in u}


class TestWorkedExamples:
    def test_reliable(self):
        u = rewrite(parse_cq("q(x) :- Reliable(x)"), EQ1)
        expected = parse_ucq("q(x) :- Reliable(x)\nq(x) :- [agg:min testScore >= 0.9](x)")
        assert _canon(u) == _canon(expected)
        assert len(u) == 2

    def test_identity_without_axioms(self):
        u = rewrite(parse_cq("q(x) :- A(x)"), Ontology(), vocabulary={("concept", "A")})
        assert [str(q) for q in u] == ["q(x) :- A(x)"]

    def test_concept_and_existential(self):
        o = parse_ontology("A sub B\nexists R sub B\n")
        u = rewrite(parse_cq("q(x) :- B(x)"), o)
        expected = parse_ucq("q(x) :- B(x)\nq(x) :- A(x)\nq(x) :- R(x, _)", o)
        assert _canon(u) == _canon(expected)

    def test_inverse_existential(self):
        o = parse_ontology("exists inv(R) sub B\n")
        u = rewrite(parse_cq("q(x) :- B(x)"), o)
        assert _canon(u) == _canon(parse_ucq("q(x) :- B(x)\nq(x) :- R(_, x)", o))

    def test_reduce_step(self):
        # R(x, y), R(x, z) unify to R(x, y), which A sub exists R then answers
        o = parse_ontology("A sub exists R\n")
        u = rewrite(parse_cq("q(x) :- R(x, y), R(x, z)"), o)
        assert canonicalize(parse_cq("q(x) :- A(x)")) in _canon(u)

    def test_aggregate_atoms_are_terminal(self):
        o = parse_ontology("agg:sum F > 1 sub A\nagg:max F < 0 sub A\nA sub B\n")
        u = rewrite(parse_cq("q(x) :- B(x)"), o)
        aggs = [a for q in u for a in q.atoms if isinstance(a, AggregateAtom)]
        assert {str(a.concept) for a in aggs} == {"agg:sum F > 1", "agg:max F < 0"}
        assert len(u) == 4

    def test_unknown_predicate(self):
        with pytest.raises(UnknownPredicateError, match="Broken"):
            rewrite(parse_cq("q(x) :- Broken(x)"), EQ1, vocabulary=set())

    def test_deterministic(self):
        q = parse_cq("q(x) :- Reliable(x)")
        assert str(rewrite(q, EQ1)) == str(rewrite(q, EQ1))


class TestRewriteAttribute:
    def test_test_score(self):
        u = rewrite_attribute("testScore", EQ1)
        assert [q.atoms[0].name for q in u] == ["testScore", "precisionScore"]

    def test_no_inclusions(self):
        u = rewrite_attribute("F", parse_ontology("exists attr F sub A\n"))
        assert [q.atoms[0].name for q in u] == ["F"]

    def test_chain(self):
        u = rewrite_attribute("F3", parse_ontology("F1 subattr F2\nF2 subattr F3\n"))
        assert {q.atoms[0].name for q in u} == {"F3", "F2", "F1"}

    def test_unknown(self):
        with pytest.raises(UnknownPredicateError):
            rewrite_attribute("nope", EQ1)


class TestProperties:
    @settings(max_examples=150, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_oracle(self, seed):
        o, d, q = random_instance(random.Random(seed))
        u = rewrite(q, o)
        assert evaluate_ucq(u, d, o) == certain_answers_oracle(q, o, d, max_depth=5).answers

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_monotone_in_ontology(self, seed):
        rng = random.Random(seed)
        o, d, q = random_instance(rng)
        extra = random_ontology(rng, max_axioms=2, max_aggregates=1)
        bigger = Ontology(o.axioms + extra.axioms)
        if validate_ontology(bigger):
            return
        assert evaluate_ucq(rewrite(q, o), d, o) <= evaluate_ucq(rewrite(q, bigger), d, bigger)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_no_duplicate_disjuncts(self, seed):
        o, _, q = random_instance(random.Random(seed))
        u = rewrite(q, o)
        assert len(_canon(u)) == len(u)
        assert len({q.arity for q in u}) == 1
