"""Compile a STARQL query into a static subplan and a streaming subplan."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction

from .. import expressions as ex
from .. import ir
from ..mappings import MappingSet
from ..ontology import AttributeAtom, ConceptAtom, ConjunctiveQuery, Ontology, RoleAtom, UnionOfCQs, Var
from ..rewriter import rewrite
from ..unfold import WindowParams, unfold_static, unfold_streaming
from .ast import IRI, Construct, StarqlQuery, StringLiteral
from .validate import StarqlValidationError, positive_vars, validate


@dataclass(frozen=True)
class ExecutablePlan:
    query: StarqlQuery
    static_cq: ConjunctiveQuery | None
    rewriting: UnionOfCQs | None
    static_plan: object | None
    static_columns: tuple
    stream_plan: object
    pulse_ms: int
    windows: WindowParams

    @property
    def output_concept(self) -> str | None:
        return self.stream_plan.concept

    def explain(self) -> str:
        q = self.query
        lines = [f"Stream {q.output_stream} pulse={self.pulse_ms}ms"]
        for w in self.windows.streams:
            lines.append(f"  Source {w}")
        if self.static_plan is not None:
            lines.append(f"Static [{', '.join(self.static_columns)}] <- {self.static_cq}")
            lines.append(ir.explain(self.static_plan, 1))
        else:
            lines.append("Static none")
        lines.append("Streaming")
        lines.append(ir.explain(self.stream_plan, 1))
        return "\n".join(lines) + "\n"


def _term(t):
    if isinstance(t, ex.ValueVar):
        return Var(t.name)
    if isinstance(t, IRI):
        return t.local
    if isinstance(t, StringLiteral):
        return t.value
    return Fraction(repr(t.value))


def static_query(q: StarqlQuery, o: Ontology, m: MappingSet, head: tuple) -> ConjunctiveQuery:
    attrs = o.attribute_names | {n for k, n in m.vocabulary if k == "attr"}
    atoms = []
    for t in q.where:
        if t.is_type:
            atoms.append(ConceptAtom(t.object.local, _term(t.subject)))
        else:
            name = t.predicate.local
            cls = AttributeAtom if name in attrs else RoleAtom
            atoms.append(cls(name, _term(t.subject), _term(t.object)))
    return ConjunctiveQuery(tuple(Var(v) for v in head), tuple(atoms))


def _ordered_vars(triples) -> list[str]:
    out = []
    for t in triples:
        for v in t.variables():
            if v not in out:
                out.append(v)
    return out


def _map_slices(node, fn):
    if isinstance(node, ir.Slice):
        return fn(node)
    changes = {}
    for f in dataclasses.fields(node):
        v = getattr(node, f.name)
        if hasattr(v, "columns") and hasattr(v, "children"):
            changes[f.name] = _map_slices(v, fn)
        elif isinstance(v, tuple) and v and all(hasattr(c, "children") for c in v):
            changes[f.name] = tuple(_map_slices(c, fn) for c in v)
    return dataclasses.replace(node, **changes) if changes else node


def compile_query(q: StarqlQuery, o: Ontology, m: MappingSet, check: bool = True) -> ExecutablePlan:
    if check:
        problems = validate(q)
        if problems:
            raise StarqlValidationError(problems)
    if isinstance(q.output, Construct):
        t = q.output.triples[0]
        out_vars, concept = (t.subject.name,), t.object.local
    else:
        out_vars, concept = tuple(v.name for v in q.output.variables), None

    having_vars = positive_vars(q.having) if q.having is not None else set()
    if q.having is not None:
        from .ast import walk_having

        having_vars |= {n.name for n in walk_having(q.having) if isinstance(n, ex.ValueVar)}
    where = _ordered_vars(q.where)
    static_cols = tuple(v for v in where if v in out_vars or v in having_vars)

    static_cq = rewriting = static_plan = None
    if q.where:
        static_cq = static_query(q, o, m, static_cols)
        rewriting = rewrite(static_cq, o, vocabulary=m.vocabulary)
        static_plan = unfold_static(rewriting, m, o)

    windows = WindowParams(
        tuple(ir.StreamWindow(s.name, s.range_ms, s.slide_ms, s.setback_ms or 0) for s in q.streams),
        q.sequencing.strategy if q.sequencing else "StandardSequencing",
    )
    if q.having is not None:
        stream = unfold_streaming(q.having, m, windows)
        if static_plan is not None:
            answers = ir.StaticAnswers(static_cols)

            def push(s):
                keys = tuple((c, c) for c in static_cols if c in s.columns)
                if not keys:
                    return s
                return ir.SemiJoin(s, ir.project(answers, [k for k, _ in keys]), keys)

            stream = _map_slices(stream, push)
            keys = tuple((c, c) for c in static_cols if c in stream.columns)
            if keys:
                stream = ir.SemiJoin(stream, ir.project(answers, [k for k, _ in keys]), keys)
            missing = [c for c in static_cols if c not in stream.columns]
            if missing or not keys:
                stream = ir.natural_join(stream, answers)
    elif static_plan is not None:
        stream = ir.StaticAnswers(static_cols)
    else:
        raise ir.PlanError("query has neither WHERE nor HAVING")
    root = ir.Output(stream, out_vars, concept)
    problems = ir.validate_plan(root, streaming=True)
    if static_plan is not None:
        problems += ir.validate_plan(static_plan)
    if problems:
        raise ir.PlanError("; ".join(problems))

    pulse = q.pulse.frequency_ms if q.pulse is not None else min((s.slide_ms for s in q.streams), default=1000)
    return ExecutablePlan(q, static_cq, rewriting, static_plan, static_cols, root, pulse, windows)
