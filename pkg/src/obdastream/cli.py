"""Command-line interface.

Exit codes: 0 success, 1 semantic error (invalid, unsatisfiable, unmapped,
failed run), 2 parse error.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import re
import sys
import tempfile
from pathlib import Path

from . import bench as bn
from . import ir
from .engine import metrics as mt
from .engine.executor import EngineConfig, execute
from .engine.store import WindowStore
from .engine.windows import WindowAssigner, read_stream_csv
from .mappings import MappingError, MappingParseError, dataset_tables, identity_mappings, load_mappings, load_tables
from .ontology import (
    Dataset,
    Ontology,
    OntologyParseError,
    OntologyValidationError,
    QueryParseError,
    UnsatisfiableError,
    check_satisfiability,
    load_dataset,
    load_ontology,
    parse_cq,
    validate_ontology,
)
from .rewriter import UnknownPredicateError, rewrite
from .starql import StarqlSyntaxError, StarqlValidationError, parse_file
from .starql import validate as validate_starql
from .starql.ast import MS
from .starql.parser import _UNITS
from .starql.compiler import compile_query, static_query
from .unfold import unfold_static

PARSE_ERRORS = (OntologyParseError, MappingParseError, StarqlSyntaxError, QueryParseError)
SEMANTIC_ERRORS = (
    OntologyValidationError, UnsatisfiableError, UnknownPredicateError, MappingError, StarqlValidationError,
    ir.PlanError, FileNotFoundError, KeyError, ValueError,
)


class UsageError(Exception):
    pass


def parse_duration(text: str) -> int:
    """``60s``, ``1min``, ``1year``, or plain milliseconds."""
    t = text.strip()
    if t.isdigit():
        return int(t)
    num = t.rstrip("abcdefghijklmnopqrstuvwxyz")
    unit = _UNITS.get(t[len(num):])
    if not num.isdigit() or unit is None:
        raise UsageError(f"bad duration {text!r}")
    return int(num) * MS[unit]


def parse_stream_arg(text: str) -> tuple[str, Path, int]:
    """``name=path[,setback=DUR]``."""
    head, *opts = text.split(",")
    if "=" not in head:
        raise UsageError(f"--stream expects name=path, got {text!r}")
    name, path = head.split("=", 1)
    setback = 0
    for o in opts:
        k, _, v = o.partition("=")
        if k.strip() != "setback":
            raise UsageError(f"unknown stream option {k!r}")
        setback = parse_duration(v)
    return name.strip(), Path(path.strip()), setback


def _ontology(path) -> Ontology:
    return load_ontology(path) if path else Ontology()


def _dataset(path) -> Dataset:
    return load_dataset(path) if path else Dataset.of()


def _tables(args, o: Ontology):
    if not args.data:
        return {}
    p = Path(args.data)
    return load_tables(p) if p.is_dir() else dataset_tables(load_dataset(p), o)


def _mappings(args, o: Ontology):
    if args.mappings:
        return load_mappings(args.mappings)
    d = load_dataset(args.data) if args.data and not Path(args.data).is_dir() else None
    return identity_mappings(o, d)


def _static_cq(args, o: Ontology, m=None):
    """A CQ from ``--query``: a .starql file (its WHERE part) or CQ text, inline or in a file."""
    q = args.query
    p = Path(q)
    if p.suffix == ".starql":
        sq = parse_file(p)
        head = []
        for t in sq.where:
            for v in t.variables():
                if v not in head:
                    head.append(v)
        return static_query(sq, o, m or identity_mappings(o), tuple(head))
    text = p.read_text(encoding="utf-8") if p.is_file() else q
    text = text.strip()
    if ":-" in text:
        return parse_cq(text, o)
    # a bare atom list: every named variable is an answer variable, in order of appearance
    head = []
    for v in re.findall(r"[(,]\s*\??([A-Za-z_]\w*)\s*(?=[,)])", text):
        if v != "_" and v not in head:
            head.append(v)
    return parse_cq(f"q({', '.join(head)}) :- {text}", o)


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args) -> int:
    o = _ontology(args.ontology)
    problems = [f"invalid: {v}" for v in validate_ontology(o)]
    if not problems and args.data:
        report = check_satisfiability(o, _dataset(args.data))
        problems += [f"unsatisfiable: {v}" for v in report.violations]
    if args.query:
        problems += [f"query: {v}" for v in validate_starql(parse_file(args.query))]
    for p in problems:
        print(p)
    if problems:
        return 1
    print("ok")
    return 0


def cmd_rewrite(args) -> int:
    o = _ontology(args.ontology)
    m = load_mappings(args.mappings) if args.mappings else None
    u = rewrite(_static_cq(args, o, m), o, vocabulary=m.vocabulary if m else None)
    print(u)
    return 0


def cmd_unfold(args) -> int:
    o = _ontology(args.ontology)
    m = _mappings(args, o)
    u = rewrite(_static_cq(args, o, m), o, vocabulary=m.vocabulary)
    plan = unfold_static(u, m, o)
    problems = ir.validate_plan(plan)
    if problems:
        raise ir.PlanError("; ".join(problems))
    print(ir.explain(plan))
    return 0


def cmd_explain(args) -> int:
    o = _ontology(args.ontology)
    m = _mappings(args, o)
    plan = compile_query(parse_file(args.query), o, m)
    sys.stdout.write(plan.explain())
    return 0


def cmd_ingest(args) -> int:
    metrics = mt.Metrics()
    name, path, setback = parse_stream_arg(args.stream) if "=" in args.stream else ("", Path(args.stream), 0)
    ms = read_stream_csv(path, name, metrics)
    assigner = WindowAssigner(parse_duration(args.range), parse_duration(args.slide), lateness_ms=args.lateness)
    store = WindowStore.from_windows(assigner.assign(ms, metrics))
    if not len(store):
        print("warning: no windows archived (empty input)", file=sys.stderr)
    store.write(args.store)
    print(f"windows {len(store)}")
    if len(store):
        for f in ("count", "mean", "variance", "min", "max", "norm"):
            col = store.stats[f]
            print(f"{f} min={float(col.min())!r} max={float(col.max())!r}")
    for k in (mt.REJECTED_MALFORMED, mt.REJECTED_LATE):
        if metrics.get(k):
            print(f"{k} {metrics.get(k)}")
    if args.metrics:
        metrics.dump(args.metrics, command="ingest")
    return 0


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def cmd_run(args) -> int:
    out = Path(args.out) if args.out else None
    if out is not None and out.exists():
        out.unlink()
    o = _ontology(args.ontology)
    m = _mappings(args, o)
    plan = compile_query(parse_file(args.query), o, m)
    metrics = mt.Metrics()
    sources, setbacks = {}, {}
    for spec in args.stream or []:
        name, path, setback = parse_stream_arg(spec)
        sources[name] = read_stream_csv(path, name, metrics)
        if ",setback=" in spec:
            setbacks[name] = setback
    if setbacks:
        plan = _override_setbacks(plan, setbacks)
    store = WindowStore.read(args.store) if args.store else None
    k = None if args.index_threshold in ("inf", "none") else float(args.index_threshold)
    config = EngineConfig(mws=args.mws == "on", index_threshold=k, workers=args.workers)
    rows = execute(plan, sources, _tables(args, o), store, config, metrics)
    if plan.output_concept is not None:
        header = "tick_ms,subject,concept\n"
    else:
        header = ",".join(["tick_ms", *plan.stream_plan.variables]) + "\n"
    text = header + "".join(",".join(_cell(v) for v in r) + "\n" for r in rows)
    if out is None:
        sys.stdout.write(text)
    else:
        _write_atomic(out, text)
    if args.metrics:
        metrics.dump(args.metrics, command="run", rows=len(rows))
    return 0


def _override_setbacks(plan, setbacks: dict):
    """A ``setback=`` on ``--stream`` replaces the query's set-back for that stream."""
    unknown = set(setbacks) - {w.stream for w in plan.windows.streams}
    if unknown:
        raise UsageError(f"set-back given for stream(s) not in the query: {', '.join(sorted(unknown))}")
    streams = tuple(dataclasses.replace(w, setback_ms=setbacks.get(w.stream, w.setback_ms))
                    for w in plan.windows.streams)
    return dataclasses.replace(plan, windows=dataclasses.replace(plan.windows, streams=streams))


def _cell(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def cmd_bench(args) -> int:
    workers = tuple(int(w) for w in str(args.workers).split(","))
    queries = tuple(q.strip() for q in args.queries.split(","))
    unknown = [q for q in queries if q not in bn.QUERIES]
    if unknown:
        raise UsageError(f"unknown bench query {unknown[0]!r}; choose from {', '.join(bn.QUERIES)}")
    modes = {"on": (True,), "off": (False,), "both": (True, False)}[args.mws]
    cells = bn.run_bench(queries, modes, workers, windows=args.windows, cycles=args.cycles, seed=args.seed)
    text = bn.to_csv(cells)
    if args.out:
        _write_atomic(Path(args.out), text)
    else:
        sys.stdout.write(text)
    sys.stderr.write(bn.summary(cells))
    if args.metrics:
        metrics = mt.Metrics()
        for c in cells:
            metrics.record(kind="cell", query=c.query, mws=c.mws, workers=c.workers,
                           median_total_ms=c.median("total_ms"), median_join_ms=c.median("join_ms"),
                           scans=c.rows[0][7], results=c.rows[0][8])
        metrics.dump(args.metrics, command="bench")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="obdastream", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, query=False, mappings=True, data=True):
        sp.add_argument("--ontology", help="ontology file (one axiom per line)")
        if mappings:
            sp.add_argument("--mappings", help="mapping file; identity mappings over --data when absent")
        if data:
            sp.add_argument("--data", help="dataset CSV or a directory of table CSVs")
        sp.add_argument("--query", required=query, help="STARQL file or conjunctive query")

    sp = sub.add_parser("validate", help="check ontology restrictions, satisfiability, and a STARQL query")
    common(sp, mappings=False)
    sp.set_defaults(fn=cmd_validate)

    sp = sub.add_parser("rewrite", help="print the rewritten union of conjunctive queries")
    common(sp, query=True, data=False)
    sp.set_defaults(fn=cmd_rewrite)

    sp = sub.add_parser("unfold", help="print the unfolded relational plan")
    common(sp, query=True)
    sp.set_defaults(fn=cmd_unfold)

    sp = sub.add_parser("explain", help="compile a STARQL query and print its plan")
    common(sp, query=True)
    sp.set_defaults(fn=cmd_explain)

    sp = sub.add_parser("ingest", help="archive a stream CSV as windows with signatures")
    sp.add_argument("--stream", required=True, help="path or name=path of a time_ms,sensor_id,value CSV")
    sp.add_argument("--store", required=True, help="output directory")
    sp.add_argument("--range", default="60s")
    sp.add_argument("--slide", default="60s")
    sp.add_argument("--lateness", type=int, default=0, help="ms")
    sp.add_argument("--metrics")
    sp.set_defaults(fn=cmd_ingest)

    sp = sub.add_parser("run", help="execute a STARQL query over replayed streams")
    common(sp, query=True)
    sp.add_argument("--stream", action="append", help="name=path[,setback=DUR]; repeatable")
    sp.add_argument("--store", help="archived window store for historic streams")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--mws", choices=("on", "off"), default="on")
    sp.add_argument("--index-threshold", default="3", help="probes before a batch is indexed; inf disables")
    sp.add_argument("--out")
    sp.add_argument("--metrics")
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("bench", help="archived-window similarity benchmark (CSV)")
    sp.add_argument("--windows", type=int, default=10_000)
    sp.add_argument("--cycles", type=int, default=15)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", default="1", help="comma-separated worker counts")
    sp.add_argument("--mws", choices=("on", "off", "both"), default="both")
    sp.add_argument("--queries", default="pearson,avg,min")
    sp.add_argument("--out")
    sp.add_argument("--metrics")
    sp.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if isinstance(getattr(args, "workers", None), int) and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 1
    try:
        return args.fn(args)
    except PARSE_ERRORS as e:
        print(f"parse error: {e}", file=sys.stderr)
        return 2
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except SEMANTIC_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
