"""Hash partitioning of archived windows and fork-join evaluation per tick.

Workers are in-process threads that share only the immutable store. Each one
scores the live window against its own partition; the coordinator merges the
per-worker rows sorted by ``(tick, wid)``. numpy releases the GIL in the row
reductions, so threads overlap on multi-core hosts.
"""

from __future__ import annotations

import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engine import metrics as mt
from .engine.planner import AccessPlan, SignatureIndex, evaluate_archive
from .engine.store import WindowStore


class WorkerFailure(RuntimeError):
    def __init__(self, worker: int, tick, cause: BaseException):
        self.worker = worker
        self.tick = tick
        self.cause = cause
        super().__init__(f"worker {worker} failed at tick {tick}: {type(cause).__name__}: {cause}")


def worker_of(wid: int, n: int) -> int:
    return zlib.crc32(int(wid).to_bytes(8, "little", signed=True)) % n


@dataclass(frozen=True)
class PartitionPlan:
    workers: int
    assignment: dict  # wid -> worker
    partitions: tuple  # per worker: sorted store positions

    def wids(self, worker: int, store: WindowStore) -> list[int]:
        return [int(w) for w in store.wids[self.partitions[worker]]]


@dataclass
class WorkerResult:
    worker: int
    rows: list = field(default_factory=list)  # (tick, wid, score, ...)
    join_s: float = 0.0
    compute_s: float = 0.0
    wall_s: float = 0.0


def partition(store: WindowStore, n: int) -> PartitionPlan:
    if n < 1:
        raise ValueError(f"worker count must be >= 1, got {n}")
    buckets = [[] for _ in range(n)]
    assignment = {}
    for pos, wid in enumerate(store.wids.tolist()):
        w = worker_of(wid, n)
        assignment[wid] = w
        buckets[w].append(pos)
    parts = tuple(np.asarray(b, dtype=np.int64) for b in buckets)
    return PartitionPlan(n, assignment, parts)


class ParallelScanner:
    """Reusable fork-join executor for one store and partition plan."""

    def __init__(self, store: WindowStore, pplan: PartitionPlan, mws: bool = True,
                 metrics: mt.Metrics | None = None):
        self.store = store
        self.pplan = pplan
        self.mws = mws
        self.metrics = metrics
        self.indexes = [SignatureIndex(store, p) for p in pplan.partitions]
        self._pool = ThreadPoolExecutor(max_workers=pplan.workers) if pplan.workers > 1 else None

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _work(self, w: int, live, access: AccessPlan, tick) -> WorkerResult:
        t0 = time.perf_counter()
        res = evaluate_archive(live, self.store, self.pplan.partitions[w], access, mws=self.mws,
                               metrics=self.metrics, index=self.indexes[w])
        rows = [(tick, *r) for r in res.rows]
        return WorkerResult(w, rows, res.join_s, res.compute_s, time.perf_counter() - t0)

    def run(self, live, access: AccessPlan, tick=0) -> tuple[list, list[WorkerResult]]:
        """Merged ``(tick, wid, scores...)`` rows and per-worker results.

        A failing worker aborts the whole tick: nothing is returned for it.
        """
        n = self.pplan.workers
        if self._pool is None:
            futures = None
            results = []
            for w in range(n):
                try:
                    results.append(self._work(w, live, access, tick))
                except Exception as e:  # noqa: BLE001
                    raise WorkerFailure(w, tick, e) from e
        else:
            futures = [self._pool.submit(self._work, w, live, access, tick) for w in range(n)]
            results = []
            for w, f in enumerate(futures):
                try:
                    results.append(f.result())
                except Exception as e:  # noqa: BLE001
                    for g in futures:
                        g.cancel()
                    raise WorkerFailure(w, tick, e) from e
        merged = sorted((r for res in results for r in res.rows), key=lambda r: (r[0], r[1]))
        if self.metrics is not None:
            for res in results:
                self.metrics.record(kind="worker", tick=tick, worker=res.worker, rows=len(res.rows),
                                    join_ms=res.join_s * 1e3, compute_ms=res.compute_s * 1e3,
                                    wall_ms=res.wall_s * 1e3)
        return merged, results


def parallel_execute(access: AccessPlan, pplan: PartitionPlan, store: WindowStore, live, tick=0,
                     mws: bool = True, metrics: mt.Metrics | None = None) -> list:
    """Score one live window against every archived window, one thread per partition."""
    with ParallelScanner(store, pplan, mws, metrics) as scanner:
        merged, _ = scanner.run(live, access, tick)
    return merged


def format_rows(rows) -> str:
    """Canonical CSV text of merged rows; used for byte comparisons across worker counts."""
    return "".join(",".join(repr(v) for v in r) + "\n" for r in rows)
