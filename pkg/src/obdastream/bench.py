"""Desk-scale reproduction of the archived-window similarity benchmarks.

A synthetic archive of fixed-length windows (one value per second, one
window per archived minute) is scored against a fresh live window in every
cycle. Values look like turbine temperatures: a per-window base level, a
sinusoid and seeded noise. A planted subset of archived windows follows the
live shape closely so the Pearson query has answers.
"""

from __future__ import annotations

import csv
import hashlib
import io
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .distribution import ParallelScanner, format_rows, partition
from .engine import metrics as mt
from .engine.planner import HYBRID, AccessPlan, SimilarityCondition, plan_hybrid
from .engine.store import WindowStore

QUERIES = {
    "pearson": (SimilarityCondition("pearson", ">", 0.75),),
    "avg": (SimilarityCondition("avg", "<", 10.0),),
    "min": (SimilarityCondition("min", "<", 10.0),),
}
COLUMNS = ["query", "mws", "workers", "cycle", "join_ms", "compute_ms", "total_ms", "scans", "results"]


@dataclass(frozen=True)
class Synthetic:
    store: WindowStore
    planted: np.ndarray  # wids of the planted correlated windows
    length: int
    seed: int

    def live(self, cycle: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, 1, cycle])
        return _shape(self.length, 500.0, 0.0, rng, noise=2.0)


def _shape(length, base, phase, rng, noise):
    t = np.arange(length)
    return base + 20.0 * np.sin(2 * np.pi * t / length + phase) + noise * rng.standard_normal(length)


def synthetic_archive(windows: int = 10_000, length: int = 60, seed: int = 0, planted: float = 0.05) -> Synthetic:
    rng = np.random.default_rng([seed, 0])
    base = rng.uniform(450.0, 550.0, windows)
    phase = rng.uniform(0.0, 2 * np.pi, windows)
    n_planted = max(1, int(round(windows * planted))) if windows else 0
    chosen = np.sort(rng.choice(windows, size=n_planted, replace=False)) if windows else np.empty(0, np.int64)
    phase[chosen] = rng.normal(0.0, 0.1, n_planted)
    noise = np.full(windows, 8.0)
    noise[chosen] = 3.0
    t = np.arange(length)
    matrix = (base[:, None] + 20.0 * np.sin(2 * np.pi * t[None, :] / length + phase[:, None])
              + noise[:, None] * rng.standard_normal((windows, length)))
    minute = 60_000
    starts = np.arange(windows, dtype=np.int64) * minute
    store = WindowStore.from_matrix(matrix, sensors=[f"a{i % 16}" for i in range(windows)],
                                    starts=starts, ends=starts + (length - 1) * 1000)
    return Synthetic(store, store.wids[chosen].copy(), length, seed)


def access_for(query: str) -> AccessPlan:
    return plan_hybrid(QUERIES[query])


def forced_hybrid(query: str) -> AccessPlan:
    """Same conditions, but scheduled as if the raw measurements were needed."""
    conds = QUERIES[query]
    return AccessPlan(HYBRID, (), conds)


@dataclass
class Cell:
    query: str
    mws: bool
    workers: int
    rows: list = field(default_factory=list)  # CSV rows, one per cycle
    results: list = field(default_factory=list)  # merged result rows per cycle

    def digest(self) -> str:
        h = hashlib.sha256()
        for rows in self.results:
            h.update(format_rows(rows).encode())
        return h.hexdigest()

    def median(self, column: str) -> float:
        return statistics.median(r[COLUMNS.index(column)] for r in self.rows)


def run_bench(queries=("pearson", "avg", "min"), mws_modes=(True, False), workers=(1,), windows: int = 10_000,
              cycles: int = 15, seed: int = 0, length: int = 60, synthetic: Synthetic | None = None,
              warmup: int = 1) -> list[Cell]:
    """Run every cell for ``cycles`` cycles.

    MWS modes and worker counts are interleaved within each cycle so slow
    drift of the host affects every cell alike.
    """
    syn = synthetic or synthetic_archive(windows, length, seed)
    cells = {}
    scanners = {}
    try:
        for n in workers:
            pplan = partition(syn.store, n)
            for mode in mws_modes:
                scanners[(n, mode)] = ParallelScanner(syn.store, pplan, mws=mode)
        for q in queries:
            for n in workers:
                for mode in mws_modes:
                    cells[(q, mode, n)] = Cell(q, mode, n)
        for cycle in range(-warmup, cycles):
            live = syn.live(max(cycle, 0))
            for q in queries:
                access = access_for(q)
                for n in workers:
                    for mode in mws_modes:
                        metrics = mt.Metrics()
                        sc = scanners[(n, mode)]
                        sc.metrics = metrics
                        t0 = time.perf_counter()
                        merged, parts = sc.run(live, access, tick=cycle)
                        total = (time.perf_counter() - t0) * 1e3
                        if cycle < 0:
                            continue
                        join = max(p.join_s for p in parts) * 1e3
                        compute = max(p.compute_s for p in parts) * 1e3
                        cell = cells[(q, mode, n)]
                        cell.rows.append([q, "on" if mode else "off", n, cycle, round(join, 4),
                                          round(compute, 4), round(total, 4),
                                          metrics.get(mt.MEASUREMENT_SCANS), len(merged)])
                        cell.results.append(merged)
    finally:
        for sc in scanners.values():
            sc.close()
    return list(cells.values())


def to_csv(cells) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for c in cells:
        w.writerows(c.rows)
    return buf.getvalue()


def summary(cells) -> str:
    """Median per cell, with the join share of the total."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["query", "mws", "workers", "median_join_ms", "median_compute_ms", "median_total_ms",
                "join_share", "scans", "results", "digest"])
    for c in cells:
        total = c.median("total_ms")
        join = c.median("join_ms")
        w.writerow([c.query, "on" if c.mws else "off", c.workers, round(join, 4), round(c.median("compute_ms"), 4),
                    round(total, 4), round(join / total, 4) if total else 0.0, c.rows[0][7] if c.rows else 0,
                    c.rows[0][8] if c.rows else 0, c.digest()[:16]])
    return buf.getvalue()


def mws_reduction(cells, query: str = "pearson", workers: int = 1) -> float | None:
    """Relative drop of the median total time when MWS is on (positive is faster)."""
    by = {(c.query, c.mws, c.workers): c for c in cells}
    on, off = by.get((query, True, workers)), by.get((query, False, workers))
    if on is None or off is None:
        return None
    return 1.0 - on.median("total_ms") / off.median("total_ms")
