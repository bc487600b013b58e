"""Pretty printer producing STARQL text that parses back to the same tree."""

from __future__ import annotations

from .. import expressions as ex
from .ast import MS, Construct, GraphPattern, Quantified, StarqlQuery

_UNIT_ORDER = ["year", "day", "hour", "min", "sec", "ms"]


def format_duration(ms: int) -> str:
    if ms == 0:
        return "0ms"
    for unit in _UNIT_ORDER:
        if ms % MS[unit] == 0:
            return f"{ms // MS[unit]}{unit}"
    return f"{ms}ms"


def _triples(triples) -> str:
    return "{ " + " . ".join(str(t) for t in triples) + " }"


def format_expr(e) -> str:
    """Conditions and value expressions; parenthesised so parsing is unambiguous."""
    if isinstance(e, ex.BoolOp):
        return "(" + f" {e.op} ".join(format_expr(o) for o in e.operands) + ")"
    if isinstance(e, ex.NotExpr):
        return "NOT " + format_expr(e.operand)
    if isinstance(e, ex.Comparison):
        return f"{format_value(e.left)} {e.op} {format_value(e.right)}"
    return format_value(e)


def format_value(e) -> str:
    if isinstance(e, ex.BinOp):
        return f"({format_value(e.left)} {e.op} {format_value(e.right)})"
    if isinstance(e, ex.Neg):
        return f"-{format_value(e.operand)}"
    if isinstance(e, ex.Call):
        return f"{ex.FUNCTIONS.get(e.name, e.name)}({', '.join(format_value(a) for a in e.args)})"
    return str(e)


def format_having(e) -> str:
    if isinstance(e, GraphPattern):
        return f"GRAPH {e.index} {_triples(e.triples)}"
    if isinstance(e, Quantified):
        text = f"{e.kind} {', '.join(e.variables)} IN {e.sequence} ({format_having(e.body)})"
        if e.having is not None:
            text += f" HAVING {format_expr(e.having)}"
        return text
    if isinstance(e, ex.BoolOp):
        parts = []
        for o in e.operands:
            t = format_having(o)
            parts.append(f"({t})" if isinstance(o, Quantified) and o.having is not None else t)
        return "(" + f" {e.op} ".join(parts) + ")"
    if isinstance(e, ex.NotExpr):
        inner = format_having(e.operand)
        if isinstance(e.operand, Quantified) and e.operand.having is not None:
            inner = f"({inner})"
        return "NOT " + inner
    return format_expr(e)


def format_query(q: StarqlQuery) -> str:
    lines = []
    for name, iri in q.prefixes:
        lines.append(f"PREFIX {name}: {iri}")
    if q.prefixes:
        lines.append("")
    if q.pulse is not None:
        start = q.pulse.start if q.pulse.start == "NOW" else str(q.pulse.start)
        lines.append(f"CREATE PULSE {q.pulse.name} WITH START = {start}, "
                     f"FREQUENCY = {format_duration(q.pulse.frequency_ms)}")
        lines.append("")
    lines.append(f"CREATE STREAM {q.output_stream} AS")
    if isinstance(q.output, Construct):
        lines.append(f"CONSTRUCT GRAPH NOW {_triples(q.output.triples)}")
    else:
        lines.append("SELECT " + " ".join(str(v) for v in q.output.variables))
    if q.static is not None:
        lines.append(f"FROM STATIC ONTOLOGY {q.static.ontology}, DATA {q.static.data}")
    if q.where:
        lines.append(f"WHERE {_triples(q.where)}")
    if q.streams:
        srcs = []
        for s in q.streams:
            sb = f"{format_duration(s.setback_ms)} <-" if s.setback_ms is not None else ""
            window = f"[NOW - {format_duration(s.range_ms)}, NOW]"
            srcs.append(f"{s.name} {sb}{window}-> {format_duration(s.slide_ms)}")
        lines.append("FROM STREAM " + ",\n            ".join(srcs))
    if q.using_pulse is not None:
        lines.append(f"USING PULSE {q.using_pulse}")
    if q.sequencing is not None:
        lines.append(f"SEQUENCE BY {q.sequencing.strategy} AS {q.sequencing.alias}")
    if q.having is not None:
        lines.append(f"HAVING {format_having(q.having)}")
    return "\n".join(lines) + "\n"
