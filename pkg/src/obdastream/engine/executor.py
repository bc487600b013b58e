"""Pulse-driven execution of compiled STARQL plans over replayed streams."""

from __future__ import annotations

import bisect
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import expressions as ex
from .. import ir
from . import metrics as mt
from .index import AdaptiveIndex
from .mws import window_stats
from .similarity import LengthMismatch, UndefinedCorrelation, cosine, pearson
from .store import WindowStore
from .windows import Measurement, WindowAssigner


@dataclass(frozen=True)
class EngineConfig:
    mws: bool = True
    index_threshold: float = 3
    workers: int = 1
    lateness_ms: int = 0
    batch_size: int = 256


@dataclass(frozen=True)
class Tuple:
    """One sequenced measurement: time already shifted by the stream's set-back."""

    stream: str
    sensor_id: str
    value: float
    time: int
    wid: int | None = None

    def field(self, name: str):
        return getattr(self, name)


class _Stream:
    def __init__(self, window: ir.StreamWindow, measurements, config: EngineConfig, metrics: mt.Metrics):
        self.window = window
        self.assigner = WindowAssigner(window.range_ms, window.slide_ms, setback_ms=window.setback_ms,
                                       lateness_ms=config.lateness_ms)
        ms = sorted(self.assigner.accept(measurements, metrics), key=lambda m: (m.time, m.sensor_id))
        self.measurements = ms
        self.times = [m.time for m in ms]

    def tuples(self, tick: int) -> list[Tuple]:
        lo, hi = self.assigner.bounds(tick)
        i, j = bisect.bisect_left(self.times, lo), bisect.bisect_right(self.times, hi)
        sb = self.window.setback_ms
        return [Tuple(self.window.stream, m.sensor_id, m.value, m.time + sb) for m in self.measurements[i:j]]


class _Archive:
    """Historic windows served from a WindowStore through the adaptive index."""

    def __init__(self, store: WindowStore, config: EngineConfig, metrics: mt.Metrics):
        self.store = store
        self.metrics = metrics
        self.index = AdaptiveIndex.over(store.records(), key=lambda r: (r.start, r.end),
                                        batch_size=config.batch_size, threshold=config.index_threshold,
                                        metrics=metrics)

    def tuples(self, window: ir.StreamWindow, assigner: WindowAssigner, tick: int) -> list[Tuple] | None:
        lo, hi = assigner.bounds(tick)
        records = self.index.lookup((lo, hi))
        if not records:
            return None
        out = []
        for r in sorted(records, key=lambda r: (r.sensor_id, r.wid)):
            times, values = self.store.raw(r.wid, self.metrics)
            for t, v in zip(times.tolist(), values.tolist()):
                out.append(Tuple(window.stream, r.sensor_id, v, t + window.setback_ms, r.wid))
        return out


def standard_sequencing(tuples) -> list[list[Tuple]]:
    """Group tuples with equal (shifted) timestamps into states, in time order."""
    states: dict = {}
    for t in tuples:
        states.setdefault(t.time, []).append(t)
    return [sorted(states[k], key=lambda t: (t.stream, t.sensor_id, t.value)) for k in sorted(states)]


def _row_key(row) -> tuple:
    return tuple((v is None, type(v).__name__, v if isinstance(v, (int, float)) else str(v)) for v in row)


class EngineContext(ir.Context):
    def __init__(self, states, static_answers, store, config: EngineConfig, metrics: mt.Metrics):
        super().__init__({}, static_answers)
        self.states = states
        self.store = store
        self.config = config
        self.metrics = metrics

    def state_count(self) -> int:
        return len(self.states)

    def slice_rows(self, node: ir.Slice) -> set:
        names = {w.stream for w in node.windows}
        n = len(self.states)
        out = set()
        for s, state in enumerate(self.states):
            idx = s - node.offset
            if idx < 0 or idx >= n:
                continue
            for t in state:
                if names and t.stream not in names:
                    continue
                out.add((idx, *(t.field(f) for _, f in node.mapping)))
        return out

    # -- aggregates
    def _signature(self, arg, cols, rows):
        if not (self.config.mws and self.store is not None and isinstance(arg, ex.ValueVar)):
            return None
        col = f"#wid.{arg.name}"
        if col not in cols:
            return None
        k = cols.index(col)
        wids = {r[k] for r in rows}
        if len(wids) != 1 or None in wids:
            return None
        sig = self.store.signature(next(iter(wids)))
        if sig.count != len(rows):
            return None
        self.metrics.inc(mt.MWS_HITS)
        return sig

    def _aggregate(self, call: ex.Call, cols, rows):
        dicts = [dict(zip(cols, r)) for r in rows]

        def series(arg):
            return np.array([float(ex.evaluate(arg, d)) for d in dicts], dtype=np.float64)

        if call.name in ("pearson", "cosine"):
            fn = pearson if call.name == "pearson" else cosine
            a, b = call.args
            sb = self._signature(b, cols, rows)
            if sb is not None:
                return fn(series(a), series(b), sb)
            sa = self._signature(a, cols, rows)
            if sa is not None:
                return fn(series(b), series(a), sa)
            return fn(series(a), series(b))
        (arg,) = call.args
        if call.name == "count":
            return len(rows)
        sig = self._signature(arg, cols, rows)
        if sig is None:
            stats = window_stats(series(arg)[None, :])
            get = {k: float(v[0]) for k, v in stats.items()}
        else:
            get = {"mean": sig.mean, "min": sig.min, "max": sig.max, "sum": sig.sum}
        return get[{"avg": "mean", "min": "min", "max": "max", "sum": "sum"}[call.name]]

    def _group_holds(self, node: ir.StreamAggregate, cols, key, rows) -> bool:
        try:
            values = {c: self._aggregate(c, cols, rows) for c in ex.aggregate_calls(node.condition)}
            env = dict(zip(node.group, key))
            return bool(ex.evaluate(node.condition, env, values))
        except UndefinedCorrelation:
            self.metrics.inc(mt.UNDEFINED_PAIRS)
        except (LengthMismatch, ex.ExpressionError, ValueError):
            self.metrics.inc("numeric_errors")
        return False

    def stream_aggregate(self, node: ir.StreamAggregate, child: ir.Relation) -> set:
        cols = child.columns
        gi = [cols.index(c) for c in node.group]
        oi = [cols.index(c) for c in node.order]
        groups: dict = {}
        for r in sorted(child.rows, key=lambda r: (tuple(r[i] for i in oi), _row_key(r))):
            groups.setdefault(tuple(r[i] for i in gi), []).append(r)
        items = sorted(groups.items(), key=lambda kv: _row_key(kv[0]))
        workers = max(1, self.config.workers)
        if workers == 1 or len(items) < 2:
            return {k for k, rows in items if self._group_holds(node, cols, k, rows)}
        parts = [[] for _ in range(workers)]
        for k, rows in items:
            parts[zlib.crc32(repr(k).encode()) % workers].append((k, rows))

        def run(part):
            return [k for k, rows in part if self._group_holds(node, cols, k, rows)]

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, parts))
        return {k for res in results for k in res}


def pulse_ticks(first: int, last: int, frequency_ms: int, start=None) -> range:
    """Pulse grid points from the first at or after ``first`` to the last at or before ``last``.

    A tick fires only once replayed stream time has reached it, so a trailing
    partial window is never emitted.
    """
    anchor = start if isinstance(start, int) else 0
    lo = anchor - ((anchor - first) // frequency_ms) * frequency_ms
    if isinstance(start, int):
        lo = max(lo, start)
    hi = anchor + ((last - anchor) // frequency_ms) * frequency_ms
    return range(lo, hi + 1, frequency_ms)


def execute(plan, sources: dict, tables: dict | None = None, store: WindowStore | None = None,
            config: EngineConfig | None = None, metrics: mt.Metrics | None = None) -> list[tuple]:
    """Run ``plan`` over replayed ``sources`` (stream name -> measurements).

    Returns ``(tick, *output values)`` rows sorted by tick then values; a
    CONSTRUCT plan yields ``(tick, subject, concept)``.
    """
    config = config or EngineConfig()
    metrics = metrics if metrics is not None else mt.Metrics()
    static = None
    if plan.static_plan is not None:
        static = ir.evaluate(plan.static_plan, tables or {})
        static = ir.Relation(plan.static_columns, static.rows)
        if not static.rows:
            return []
    streams = {}
    for w in plan.windows.streams:
        if w.stream not in sources and not (store is not None and w.setback_ms):
            raise KeyError(f"no data for stream {w.stream!r}")
        streams[w.stream] = _Stream(w, sources.get(w.stream, []), config, metrics)
    archive = _Archive(store, config, metrics) if store is not None else None

    live = [s for s in streams.values() if not s.window.setback_ms] or list(streams.values())
    times = [t + s.window.setback_ms for s in live for t in s.times]
    if not times:
        return []
    q = plan.query
    start = q.pulse.start if q.pulse is not None else None
    out = []
    root = plan.stream_plan
    for tick in pulse_ticks(min(times), max(times), plan.pulse_ms, start):
        tuples = []
        for s in streams.values():
            got = None
            if archive is not None and s.window.setback_ms:
                got = archive.tuples(s.window, s.assigner, tick)
            tuples.extend(got if got is not None else s.tuples(tick))
        ctx = EngineContext(standard_sequencing(tuples), static, store, config, metrics)
        rel = ir.evaluate(root, ctx)
        for r in sorted(rel.rows, key=_row_key):
            out.append((tick, *r, root.concept) if root.concept is not None else (tick, *r))
        metrics.inc("ticks")
    return out


def measurements_by_stream(items) -> dict:
    out: dict = {}
    for m in items:
        out.setdefault(m.stream, []).append(m)
    return out


__all__ = ["EngineConfig", "EngineContext", "Measurement", "execute", "pulse_ticks", "standard_sequencing"]
