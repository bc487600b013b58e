import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import random_instance
from obdastream import ir
from obdastream.mappings import (
    ClassicalMapping,
    MappingError,
    MappingParseError,
    dataset_tables,
    identity_mappings,
    parse_mappings,
)
from obdastream.ontology import (
    AggregateConcept,
    Dataset,
    Ontology,
    certain_answers_oracle,
    eval_aggregate_concept,
    parse_cq,
    parse_ontology,
)
from obdastream.rewriter import rewrite
from obdastream.starql import parse
from obdastream.unfold import WindowParams, build_aggregate_query, unfold_static, unfold_streaming

TWO_BY_TWO = """map concept A(x) <- scan(t1; x=id)
map concept A(x) <- scan(t2; x=id) where kind = 'a'
map role R(x, y) <- scan(r1; x=s, y=o)
map role R(x, y) <- scan(r2; x=a, y=b)
map stream hasValue(?s, ?v) <- slice(Msmt; s=sid, v=sval)
"""
WINDOWS = WindowParams((ir.StreamWindow("st", 10_000, 1_000, 0),), "StandardSequencing")


def _scans(node):
    return sorted(n.table for n in ir.walk(node) if isinstance(n, ir.Scan))


def _having(text):
    q = parse(f"""CREATE STREAM S AS SELECT ?s
FROM STREAM st [NOW - 10sec, NOW]-> 1sec
SEQUENCE BY StandardSequencing AS seq
HAVING {text}""")
    return q.having


class TestMappingFiles:
    def test_parse_and_print(self, running_mappings):
        assert len(running_mappings.classical) == 4
        assert len(running_mappings.streaming) == 1
        again = parse_mappings(str(running_mappings))
        assert str(again) == str(running_mappings)

    def test_stream_field_aliases(self):
        m = parse_mappings("map stream hasVal(?s,?v) <- slice(Msmt; s=sid, v=sval)\n")
        assert dict(m.streaming[0].body.mapping) == {"s": "sensor_id", "v": "value"}

    def test_error_has_line(self):
        with pytest.raises(MappingParseError) as e:
            parse_mappings("map concept A(x) <- scan(t; x=id)\n\nmap concept B(x) <- scon(t; x=id)\n")
        assert e.value.line == 3

    def test_unknown_stream_field(self):
        with pytest.raises(MappingParseError):
            parse_mappings("map stream hasVal(?s,?v) <- slice(Msmt; s=sid, v=temperature)\n")

    def test_head_arity_must_match(self):
        with pytest.raises((MappingError, MappingParseError)):
            parse_mappings("map role R(x, y) <- scan(t; x=id)\n")

    def test_head_arity_of_kind(self):
        with pytest.raises((MappingError, MappingParseError)):
            parse_mappings("map concept A(x, y) <- scan(t; x=a, y=b)\n")

    def test_where_clause_filters(self):
        m = parse_mappings(TWO_BY_TWO)
        plan = unfold_static(rewrite(parse_cq("q(x) :- A(x)"), Ontology(), m.vocabulary), m, Ontology())
        tables = {"t1": ir.Table(("id",), [("p",)]), "t2": ir.Table(("id", "kind"), [("q", "a"), ("r", "b")])}
        assert ir.evaluate(plan, tables).rows == {("p",), ("q",)}


class TestUnfoldStatic:
    def test_running_example_structure(self, running_ontology, running_mappings):
        u = rewrite(parse_cq("q(x) :- Reliable(x)"), running_ontology, running_mappings.vocabulary)
        plan = unfold_static(u, running_mappings, running_ontology)
        assert isinstance(plan, ir.Union)
        assert len(plan.inputs) == 2
        plain = [p for p in plan.inputs if not isinstance(p, ir.GroupHaving)]
        grouped = [p for p in plan.inputs if isinstance(p, ir.GroupHaving)]
        assert _scans(plain[0]) == ["reliable_sensors"]
        (g,) = grouped
        assert (g.group, g.agg, g.cmp, g.threshold) == (("x",), "min", ">=", Fraction("0.9"))
        assert isinstance(g.child, ir.Union)
        assert _scans(g.child) == ["field_tests", "lab_tests", "precision_tests"]
        assert ir.validate_plan(plan) == []

    def test_single_atom(self):
        m = parse_mappings("map concept A(x) <- scan(T; x=id)\n")
        plan = unfold_static(rewrite(parse_cq("q(x) :- A(x)"), Ontology(), m.vocabulary), m, Ontology())
        assert isinstance(plan, ir.Scan)
        assert plan.columns == ("x",)

    def test_two_by_two_is_four_joins(self):
        m = parse_mappings(TWO_BY_TWO)
        o = Ontology()
        plan = unfold_static(rewrite(parse_cq("q(x) :- A(x), R(x, y)"), o, m.vocabulary), m, o)
        assert isinstance(plan, ir.Union)
        assert len(plan.inputs) == 4
        assert all(any(isinstance(n, ir.Join) for n in ir.walk(p)) for p in plan.inputs)
        pairs = {tuple(_scans(p)) for p in plan.inputs}
        assert pairs == {("r1", "t1"), ("r2", "t1"), ("r1", "t2"), ("r2", "t2")}

    def test_join_semantics(self):
        m = parse_mappings(TWO_BY_TWO)
        o = Ontology()
        plan = unfold_static(rewrite(parse_cq("q(x, y) :- A(x), R(x, y)"), o, m.vocabulary), m, o)
        tables = {
            "t1": ir.Table(("id",), [("a",), ("b",)]),
            "t2": ir.Table(("id", "kind"), [("c", "a")]),
            "r1": ir.Table(("s", "o"), [("a", "z"), ("d", "z")]),
            "r2": ir.Table(("a", "b"), [("c", "w")]),
        }
        assert ir.evaluate(plan, tables).rows == {("a", "z"), ("c", "w")}

    def test_unmapped_predicate(self):
        m = parse_mappings("map concept A(x) <- scan(T; x=id)\n")
        o = parse_ontology("B sub C\n")
        u = rewrite(parse_cq("q(x) :- A(x), C(x)"), o)
        with pytest.raises(MappingError) as e:
            unfold_static(u, m, o)
        assert "C" in str(e.value)
        assert "q(x)" in str(e.value)

    def test_constant_in_query(self):
        m = identity_mappings(Ontology(), Dataset.of(roles=[("R", "a", "b"), ("R", "c", "b")]))
        d = Dataset.of(roles=[("R", "a", "b"), ("R", "c", "b")])
        plan = unfold_static(rewrite(parse_cq("q(x) :- R(x, 'b')"), Ontology(), m.vocabulary), m, Ontology())
        assert ir.evaluate(plan, dataset_tables(d)).rows == {("a",), ("c",)}


class TestAggregateQuery:
    def test_running_example(self, running_ontology, running_mappings):
        e = AggregateConcept("min", ">=", Fraction("0.9"), "testScore")
        g = build_aggregate_query(e, running_mappings, running_ontology)
        assert isinstance(g, ir.GroupHaving)
        assert _scans(g) == ["field_tests", "lab_tests", "precision_tests"]

    def test_single_mapping(self):
        m = parse_mappings("map attr F(x, y) <- scan(T; x=id, y=v)\n")
        o = parse_ontology("exists attr F sub A\n")
        g = build_aggregate_query(AggregateConcept("count", ">=", 0, "F"), m, o)
        assert isinstance(g.child, ir.Scan)
        assert (g.agg, g.cmp) == ("count", ">=")

    def test_matches_ontology_layer(self):
        m = parse_mappings("map attr F(x, y) <- scan(T; x=id, y=v)\nmap attr G(x, y) <- scan(U; x=id, y=v)\n")
        o = parse_ontology("G subattr F\n")
        rows = [("a", Fraction(1)), ("a", Fraction(3)), ("b", Fraction(2)), ("c", Fraction(5))]
        tables = {"T": ir.Table(("id", "v"), rows[:3]), "U": ir.Table(("id", "v"), rows[3:])}
        d = Dataset.of(attributes=[("F", *r) for r in rows[:3]] + [("G", *r) for r in rows[3:]])
        for agg in ("min", "max", "count", "countd", "sum", "avg"):
            for thr in (1, 2, 3):
                e = AggregateConcept(agg, ">=", thr, "F")
                got = {r[0] for r in ir.evaluate(build_aggregate_query(e, m, o), tables).rows}
                assert got == eval_aggregate_concept(e, d, o), (agg, thr)

    def test_no_mapping(self):
        m = parse_mappings("map concept A(x) <- scan(T; x=id)\n")
        o = parse_ontology("G subattr F\n")
        with pytest.raises(MappingError):
            build_aggregate_query(AggregateConcept("min", ">=", 0, "F"), m, o)

    def test_fresh_after_mapping_edit(self, running_ontology, running_mappings):
        e = AggregateConcept("min", ">=", Fraction("0.9"), "testScore")
        before = build_aggregate_query(e, running_mappings, running_ontology)
        edited = running_mappings.replace("attr", "testScore", [
            ClassicalMapping("attr", "testScore", ("x", "y"), ir.Scan("all_tests", (("x", "sid"), ("y", "score")))),
        ])
        after = build_aggregate_query(e, edited, running_ontology)
        assert _scans(after) == ["all_tests", "precision_tests"]
        assert after != before
        scratch = parse_mappings(str(edited))
        assert build_aggregate_query(e, scratch, running_ontology) == after


class TestUnfoldingProperties:
    @settings(max_examples=120, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_oracle(self, seed):
        o, d, q = random_instance(random.Random(seed))
        m = identity_mappings(o, d)
        plan = unfold_static(rewrite(q, o, m.vocabulary), m, o)
        assert ir.validate_plan(plan) == []
        got = ir.evaluate(plan, dataset_tables(d, o)).rows
        assert got == certain_answers_oracle(q, o, d, max_depth=5).answers


class TestUnfoldStreaming:
    def test_single_pattern(self):
        m = parse_mappings(TWO_BY_TWO)
        plan = unfold_streaming(_having("EXISTS i IN seq (GRAPH i { ?s :hasValue ?y })"), m, WINDOWS)
        slices = [n for n in ir.walk(plan) if isinstance(n, ir.Slice)]
        assert len(slices) == 1
        assert slices[0].source == "Msmt"
        assert slices[0].windows == WINDOWS.streams

    def test_adjacent_states_self_join(self):
        m = parse_mappings(TWO_BY_TWO)
        h = _having("EXISTS i IN seq (GRAPH i { ?s :hasValue ?y } AND GRAPH i+1 { ?s :hasValue ?z } AND ?z > ?y)")
        plan = unfold_streaming(h, m, WINDOWS)
        (join,) = [n for n in ir.walk(plan) if isinstance(n, ir.Join)]
        offsets = sorted(n.offset for n in ir.walk(join) if isinstance(n, ir.Slice))
        assert offsets == [0, 1]
        assert dict(join.keys) == {"i": "i", "s": "s"}
        assert any(isinstance(n, ir.Filter) for n in ir.walk(plan))
        assert ir.validate_plan(plan, streaming=True) == []

    def test_critical_mode(self, critical_query, running_mappings):
        windows = WindowParams(tuple(ir.StreamWindow(s.name, s.range_ms, s.slide_ms, s.setback_ms or 0)
                                     for s in critical_query.streams), "StandardSequencing")
        plan = unfold_streaming(critical_query.having, running_mappings, windows)
        (agg,) = [n for n in ir.walk(plan) if isinstance(n, ir.StreamAggregate)]
        assert agg.access == "hybrid"
        assert "0.75" in str(agg.condition) or "0.75" in ir.explain(agg)
        assert isinstance(agg.child, ir.Join)
        assert len([n for n in ir.walk(agg) if isinstance(n, ir.Slice)]) == 2

    def test_missing_stream_mapping(self):
        m = parse_mappings("map concept A(x) <- scan(T; x=id)\n")
        with pytest.raises(MappingError, match="hasValue"):
            unfold_streaming(_having("EXISTS i IN seq (GRAPH i { ?s :hasValue ?y })"), m, WINDOWS)

    def test_forall_becomes_division(self):
        m = parse_mappings(TWO_BY_TWO)
        plan = unfold_streaming(_having("FORALL i IN seq (GRAPH i { ?s :hasValue ?y })"), m, WINDOWS)
        assert any(isinstance(n, ir.ForallStates) for n in ir.walk(plan))
