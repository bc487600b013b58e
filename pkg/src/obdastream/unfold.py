"""Unfolding: replace ontology predicates by the data queries of their mappings."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from . import expressions as ex
from . import ir
from .mappings import MappingError, MappingSet
from .ontology import AggregateAtom, AggregateConcept, ConjunctiveQuery, Ontology, UnionOfCQs, Var
from .rewriter import rewrite_attribute


def _output_names(u: UnionOfCQs) -> tuple:
    head = u.disjuncts[0].head
    names = [t.name if isinstance(t, Var) else None for t in head]
    if None in names or len(set(names)) != len(names):
        return tuple(f"ans{k}" for k in range(len(head)))
    return tuple(names)


def _bind_atom(body, atom) -> object:
    """Rename a mapping body's columns to the atom's variables.

    Constants become selections and repeated variables column-equalities.
    """
    node = body
    cols = body.columns
    first: dict = {}
    for col, term in zip(cols, atom.terms):
        if isinstance(term, Var):
            if term.name in first:
                node = ir.Select(node, col, first[term.name], is_column=True)
            else:
                first[term.name] = col
        else:
            node = ir.Select(node, col, term)
    return ir.make_project(node, tuple((v, c) for v, c in first.items()))


def _choices(atom, m: MappingSet, o: Ontology, cq) -> list:
    if isinstance(atom, AggregateAtom):
        return [build_aggregate_query(atom.concept, m, o)]
    bodies = [mp.body for mp in m.for_predicate(*atom.predicate)]
    if not bodies:
        kind, name = atom.predicate
        raise MappingError(f"no mapping for {kind} {name!r} (in disjunct {cq})")
    return bodies


def unfold_cq(cq: ConjunctiveQuery, m: MappingSet, o: Ontology, names: tuple) -> list:
    """All join plans of one disjunct, one per combination of mapping choices."""
    options = [_choices(a, m, o, cq) for a in cq.atoms]
    plans = []
    for combo in itertools.product(*options):
        node = None
        for atom, body in zip(cq.atoms, combo):
            bound = _bind_atom(body, atom)
            node = bound if node is None else ir.natural_join(node, bound)
        out, consts = [], []
        for name, t in zip(names, cq.head):
            if isinstance(t, Var):
                out.append((name, t.name))
            else:
                out.append((name, f"@{name}"))
                consts.append((f"@{name}", t))
        if consts:
            values = ir.Values(tuple(c for c, _ in consts), (tuple(v for _, v in consts),))
            node = values if node is None else ir.Join(node, values)
        plans.append(ir.make_project(node, tuple(out)))
    return plans


def unfold_static(u: UnionOfCQs, m: MappingSet, o: Ontology) -> object:
    """Union over disjuncts of the joins of their mapped atom bodies.

    The output columns are the head variables of the first disjunct (the
    original query), or ``ans0, ans1, ...`` when those are not distinct
    variables.
    """
    names = _output_names(u)
    plans = []
    for cq in u:
        plans.extend(unfold_cq(cq, m, o, names))
    return ir.union(plans)


def build_aggregate_query(e: AggregateConcept, m: MappingSet, o: Ontology) -> object:
    """``SELECT x FROM sql_F GROUP BY x HAVING agg(y) cmp r``, built fresh each call.

    ``sql_F`` unfolds the attribute rewriting of F; sub-attributes without a
    mapping contribute nothing, but at least one must be mapped.
    """
    u = rewrite_attribute(e.attribute, o, vocabulary=m.vocabulary)
    mapped = [cq for cq in u if m.for_predicate("attr", cq.atoms[0].name)]
    if not mapped:
        raise MappingError(f"no mapping for attribute {e.attribute!r} or any of its sub-attributes")
    sql_f = unfold_static(UnionOfCQs(tuple(mapped)), m, o)
    return ir.GroupHaving(sql_f, ("x",), "y", e.agg, e.cmp, e.threshold)


# ---------------------------------------------------------------------------
# streaming part


@dataclass(frozen=True)
class WindowParams:
    """Window and sequencing parameters a query supplies to its Slice schemas."""

    streams: tuple  # ir.StreamWindow per FROM STREAM source
    strategy: str = "StandardSequencing"

    def for_source(self, source: str) -> tuple:
        named = tuple(w for w in self.streams if w.stream == source)
        return named or self.streams


def _hidden(col: str) -> bool:
    return col.startswith("#")


def _visible(node) -> tuple:
    return tuple(c for c in node.columns if not _hidden(c))


def _join(left, right):
    """Natural join on shared visible columns; provenance columns stay left-biased."""
    shared = [c for c in left.columns if c in right.columns and not _hidden(c)]
    dup_hidden = [c for c in right.columns if _hidden(c) and c in left.columns]
    if dup_hidden:
        right = ir.make_project(right, tuple((c, c) for c in right.columns if c not in dup_hidden))
    return ir.Join(left, right, tuple((c, c) for c in shared))


def _term_column(term, consts, k):
    """Column name for a triple position, registering constants for selection."""
    from .starql.ast import IRI, StringLiteral

    if isinstance(term, ex.ValueVar):
        return term.name
    col = f"@c{k}"
    if isinstance(term, IRI):
        consts.append((col, term.local))
    elif isinstance(term, StringLiteral):
        consts.append((col, term.value))
    else:
        consts.append((col, float(term.value)))
    return col


def _graph_plan(g, m: MappingSet, windows: WindowParams):
    from .starql.ast import IRI

    node = None
    for k, t in enumerate(g.triples):
        if not isinstance(t.predicate, IRI):
            raise MappingError(f"no streaming mapping for type triple {t}")
        name = t.predicate.local
        schemas = m.for_stream(name)
        if not schemas:
            raise MappingError(f"no streaming mapping for {name!r} (triple {t})")
        options = []
        for sm in schemas:
            consts: list = []
            subj = _term_column(t.subject, consts, f"{k}s")
            obj = _term_column(t.object, consts, f"{k}o")
            fields = dict(sm.body.mapping)
            mapping = [(subj, fields[sm.head[0]])]
            if obj == subj:
                mapping.append((f"@dup{k}", fields[sm.head[1]]))
            else:
                mapping.append((obj, fields[sm.head[1]]))
            if isinstance(t.object, ex.ValueVar):
                mapping.append((f"#wid.{t.object.name}", "wid"))
            body = ir.Slice(sm.body.source, g.index.var, g.index.offset, tuple(mapping), windows.strategy,
                            windows.for_source(sm.body.source))
            plan = body
            if obj == subj:
                plan = ir.Select(plan, f"@dup{k}", subj, is_column=True)
            for col, value in consts:
                plan = ir.Select(plan, col, value)
            keep = tuple(c for c in plan.columns if not c.startswith("@"))
            options.append(ir.make_project(plan, tuple((c, c) for c in keep)))
        part = ir.union(_align(options))
        node = part if node is None else _join(node, part)
    return node


def _align(options) -> list:
    cols = options[0].columns
    return [o if o.columns == cols else ir.make_project(o, tuple((c, c) for c in cols)) for o in options]


def unfold_streaming(h, m: MappingSet, windows: WindowParams):
    """Relational form of a validated HAVING expression.

    Graph patterns become instantiated Slices joined on their index column
    and shared variables; ``AND NOT`` becomes an anti-join, ``OR`` a union,
    EXISTS a projection (or a StreamAggregate when it has its own HAVING)
    and FORALL a division over the states.
    """
    node = _having(h, m, windows)
    return ir.make_project(node, tuple((c, c) for c in _visible(node)))


def _having(e, m, windows):
    from .engine.planner import access_mode
    from .starql.ast import GraphPattern, Quantified

    if isinstance(e, GraphPattern):
        return _graph_plan(e, m, windows)
    if isinstance(e, Quantified):
        child = _having(e.body, m, windows)
        idx = tuple(v for v in e.variables if v in child.columns)
        if e.kind == "FORALL":
            group = tuple(c for c in _visible(child) if c not in idx)
            return ir.ForallStates(child, idx, group)
        if e.having is None:
            return ir.make_project(child, tuple((c, c) for c in _visible(child) if c not in idx))
        aggregated = set()
        for call in ex.aggregate_calls(e.having):
            for a in call.args:
                aggregated |= ex.value_vars(a)
        group = tuple(c for c in _visible(child) if c not in idx and c not in aggregated)
        return ir.StreamAggregate(child, group, idx, e.having, access_mode(e.having))
    if isinstance(e, ex.BoolOp) and e.op == "AND":
        positive, conditions, negated = [], [], []
        for o in e.operands:
            if isinstance(o, ex.NotExpr):
                negated.append(o.operand)
            elif isinstance(o, (ex.Comparison, ex.BoolOp)) and not _has_pattern(o):
                conditions.append(o)
            else:
                positive.append(o)
        if not positive:
            raise MappingError(f"unsafe HAVING conjunction without a graph pattern: {e}")
        node = None
        for p in positive:
            sub = _having(p, m, windows)
            node = sub if node is None else _join(node, sub)
        for c in conditions:
            node = ir.Filter(node, c)
        for n in negated:
            right = _having(n, m, windows)
            keys = tuple((c, c) for c in _visible(right) if c in node.columns)
            node = ir.SemiJoin(node, right, keys, anti=True)
        return node
    if isinstance(e, ex.BoolOp):
        branches = [_having(o, m, windows) for o in e.operands]
        cols = [c for c in _visible(branches[0]) if all(c in b.columns for b in branches)]
        if any(set(_visible(b)) != set(cols) for b in branches):
            raise MappingError(f"OR branches bind different variables: {e}")
        return ir.Union(tuple(ir.make_project(b, tuple((c, c) for c in cols)) for b in branches))
    raise MappingError(f"unsafe HAVING expression {e}")


def _has_pattern(e) -> bool:
    from .starql.ast import GraphPattern, Quantified

    if isinstance(e, (GraphPattern, Quantified)):
        return True
    if isinstance(e, ex.BoolOp):
        return any(_has_pattern(o) for o in e.operands)
    if isinstance(e, ex.NotExpr):
        return _has_pattern(e.operand)
    return False
