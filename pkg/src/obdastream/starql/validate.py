"""Static checks on parsed STARQL queries.

Each violation names a rule, the offending variable or name, and the clause.
"""

from __future__ import annotations

from dataclasses import dataclass

from .. import expressions as ex
from .ast import IRI, Construct, GraphPattern, Quantified, SelectOutput, StarqlQuery, walk_having

SUPPORTED_STRATEGIES = {"StandardSequencing"}

RULES = (
    "time-variable-in-output",
    "unbound-output-variable",
    "unsafe-variable",
    "unsafe-negation",
    "kind-mixing",
    "unsupported-strategy",
    "unknown-sequence",
    "missing-sequencing",
    "unknown-pulse",
    "unknown-function",
    "function-arity",
    "misplaced-aggregate",
    "unbound-index-variable",
    "non-positive-frequency",
    "non-positive-slide",
    "duplicate-stream",
    "unsupported-construct-template",
    "undeclared-prefix",
)


@dataclass(frozen=True)
class Violation:
    rule: str
    name: str
    clause: str
    message: str

    def __str__(self) -> str:
        return f"{self.rule}: {self.message} [{self.clause}: {self.name}]"


class StarqlValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def positive_vars(e) -> set[str]:
    """Value variables a HAVING subformula binds for its context."""
    if isinstance(e, GraphPattern):
        return e.variables()
    if isinstance(e, ex.BoolOp):
        sets = [positive_vars(o) for o in e.operands]
        if e.op == "AND":
            return set().union(*sets)
        return set.intersection(*sets) if sets else set()
    if isinstance(e, Quantified):
        return positive_vars(e.body)
    return set()


def _is_positive(e) -> bool:
    return isinstance(e, (GraphPattern, Quantified)) or (
        isinstance(e, ex.BoolOp) and any(_is_positive(o) for o in e.operands))


def where_vars(q: StarqlQuery) -> set[str]:
    return {v for t in q.where for v in t.variables()}


def output_vars(q: StarqlQuery) -> list:
    if isinstance(q.output, Construct):
        return [x for t in q.output.triples for x in (t.subject, t.object) if isinstance(x, (ex.ValueVar,))]
    return list(q.output.variables)


def index_var_names(q: StarqlQuery) -> set[str]:
    if q.having is None:
        return set()
    return {v for n in walk_having(q.having) if isinstance(n, Quantified) for v in n.variables}


def validate(q: StarqlQuery) -> list[Violation]:
    out: list[Violation] = []

    def add(rule, name, clause, message):
        v = Violation(rule, str(name), clause, message)
        if v not in out:
            out.append(v)

    idx_names = index_var_names(q)
    value_names: set[str] = set(where_vars(q))
    if q.having is not None:
        for n in walk_having(q.having):
            if isinstance(n, GraphPattern):
                value_names |= n.variables()
            elif isinstance(n, ex.ValueVar):
                value_names.add(n.name)

    # pulse and streams
    if q.pulse is not None and q.pulse.frequency_ms <= 0:
        add("non-positive-frequency", q.pulse.name, "CREATE PULSE", "pulse frequency must be positive")
    if q.using_pulse is not None and (q.pulse is None or q.pulse.name != q.using_pulse):
        add("unknown-pulse", q.using_pulse, "USING PULSE", f"pulse {q.using_pulse} is not declared")
    seen = set()
    for s in q.streams:
        if s.slide_ms <= 0:
            add("non-positive-slide", s.name, "FROM STREAM", "window slide must be positive")
        if s.name in seen:
            add("duplicate-stream", s.name, "FROM STREAM", f"stream {s.name} is listed twice")
        seen.add(s.name)

    # prefixes (the empty prefix is always available)
    declared = {p for p, _ in q.prefixes} | {""}

    def check_iri(x, clause):
        if isinstance(x, IRI) and x.prefix is not None and x.prefix not in declared:
            add("undeclared-prefix", x.text, clause, f"prefix {x.prefix}: is not declared")

    for clause, triples in (("CONSTRUCT", q.output.triples if isinstance(q.output, Construct) else ()),
                            ("WHERE", q.where)):
        for t in triples:
            for x in (t.subject, t.predicate, t.object):
                check_iri(x, clause)

    # output form
    if isinstance(q.output, Construct):
        for t in q.output.triples:
            if not (t.is_type and isinstance(t.subject, ex.ValueVar) and isinstance(t.object, IRI)):
                add("unsupported-construct-template", str(t), "CONSTRUCT",
                    "CONSTRUCT templates are limited to '?v a C' triples")
    bound_out = set(where_vars(q))
    if q.having is not None:
        bound_out |= positive_vars(q.having)
    clause_name = "CONSTRUCT" if isinstance(q.output, Construct) else "SELECT"
    for v in output_vars(q):
        if isinstance(v, ex.IndexVar) or v.name in idx_names:
            add("time-variable-in-output", v.name, clause_name, f"time variable {v.name} cannot be part of the output")
        elif v.name not in bound_out:
            add("unbound-output-variable", v.name, clause_name,
                f"output variable ?{v.name} is bound neither in WHERE nor in HAVING")

    # sequencing
    if q.sequencing is not None and q.sequencing.strategy not in SUPPORTED_STRATEGIES:
        add("unsupported-strategy", q.sequencing.strategy, "SEQUENCE BY",
            f"unsupported strategy {q.sequencing.strategy}")

    if q.having is None:
        return out

    for n in walk_having(q.having):
        if isinstance(n, Quantified):
            if q.sequencing is None:
                add("missing-sequencing", n.sequence, "HAVING", f"{n.kind} over {n.sequence} needs a SEQUENCE BY clause")
            elif n.sequence != q.sequencing.alias:
                add("unknown-sequence", n.sequence, "HAVING",
                    f"sequence {n.sequence} is not the alias {q.sequencing.alias}")
        elif isinstance(n, GraphPattern):
            for t in n.triples:
                for x in (t.subject, t.predicate, t.object):
                    check_iri(x, "HAVING")
        elif isinstance(n, ex.Call):
            if n.name not in ex.FUNCTIONS:
                add("unknown-function", n.name, "HAVING", f"function {n.name} is not supported")
            elif len(n.args) != ex.ARITY[n.name]:
                add("function-arity", ex.FUNCTIONS[n.name], "HAVING",
                    f"{ex.FUNCTIONS[n.name]} takes {ex.ARITY[n.name]} argument(s), got {len(n.args)}")
            for a in n.args:
                for x in ex.walk(a):
                    if isinstance(x, ex.IndexVar):
                        add("kind-mixing", x.name, "HAVING", f"time variable {x.name} used as a function argument")

    for name in sorted(idx_names & value_names):
        add("kind-mixing", name, "HAVING", f"{name} is used both as a time variable and as a value variable ?{name}")

    # static answers only filter the stream, so HAVING comparisons need graph-bound variables
    _check_having(q.having, frozenset(), frozenset(), add)
    return out


def _check_comparison(c, bound, indices, add, aggregate_ok):
    kinds = set()
    for x in ex.walk(c):
        if isinstance(x, ex.ValueVar):
            kinds.add("value")
            if x.name not in bound:
                add("unsafe-variable", x.name, "HAVING", f"?{x.name} is compared but not bound by a graph pattern")
        elif isinstance(x, ex.IndexVar):
            kinds.add("index")
            if x.name not in indices:
                add("unbound-index-variable", x.name, "HAVING", f"time variable {x.name} is not quantified")
        elif isinstance(x, ex.Call) and x.name in ex.AGGREGATE_FUNCTIONS and not aggregate_ok:
            add("misplaced-aggregate", ex.FUNCTIONS[x.name], "HAVING",
                f"{ex.FUNCTIONS[x.name]} is only allowed in the HAVING of a quantifier")
    if isinstance(c, ex.Comparison) and {"value", "index"} <= kinds:
        add("kind-mixing", str(c), "HAVING", "comparison mixes time variables and value variables")


def _check_condition(e, bound, indices, add, aggregate_ok):
    if isinstance(e, ex.BoolOp):
        for o in e.operands:
            _check_condition(o, bound, indices, add, aggregate_ok)
    elif isinstance(e, ex.NotExpr):
        _check_condition(e.operand, bound, indices, add, aggregate_ok)
    else:
        _check_comparison(e, bound, indices, add, aggregate_ok)


def _check_having(e, bound, indices, add, negation_ok=False):
    if isinstance(e, GraphPattern):
        idx = e.index
        if idx.is_value:
            add("kind-mixing", idx.var, "HAVING", f"value variable ?{idx.var} used as a state index")
        elif idx.var not in indices:
            add("unbound-index-variable", idx.var, "HAVING", f"time variable {idx.var} is not quantified")
    elif isinstance(e, Quantified):
        inner = indices | set(e.variables)
        _check_having(e.body, bound, inner, add)
        if e.having is not None:
            _check_condition(e.having, bound | positive_vars(e.body), inner, add, aggregate_ok=True)
    elif isinstance(e, ex.BoolOp):
        if e.op == "AND":
            scope = bound | positive_vars(e)
            positive = any(_is_positive(o) for o in e.operands)
            for o in e.operands:
                _check_having(o, scope, indices, add, negation_ok=positive)
        else:
            for o in e.operands:
                _check_having(o, bound, indices, add)
            sets = [positive_vars(o) - bound for o in e.operands]
            for v in sorted(set().union(*sets) - set.intersection(*sets)):
                add("unsafe-variable", v, "HAVING", f"?{v} is bound in only some branches of OR")
    elif isinstance(e, ex.NotExpr):
        if not negation_ok:
            add("unsafe-negation", "NOT", "HAVING", "negation needs a positive conjunct")
        _check_having(e.operand, bound, indices, add)
    else:
        _check_condition(e, bound, indices, add, aggregate_ok=False)
