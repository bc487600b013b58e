"""Access planning for predicates over archived windows, and their evaluation.

A predicate is a conjunction of :class:`SimilarityCondition`. ``avg``,
``min`` and ``max`` conditions compare the live statistic with the archived
one (``|f(live) - f(archived)| cmp threshold``) and need only signature
fields. ``pearson`` and ``cosine`` compare the coefficient itself and need the
cross term, hence the raw archived measurements.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .. import expressions as ex
from . import metrics as mt
from .mws import window_stats
from .similarity import cosine_many, pearson_many

SIGNATURE_FIELDS = frozenset({"count", "sum", "mean", "variance", "min", "max", "norm"})
REQUIRED_STATS = {
    "avg": frozenset({"mean"}),
    "min": frozenset({"min"}),
    "max": frozenset({"max"}),
    "sum": frozenset({"sum"}),
    "count": frozenset({"count"}),
    "pearson": frozenset({"mean", "variance", "cross"}),
    "cosine": frozenset({"norm", "cross"}),
}
_STAT_OF = {"avg": "mean", "min": "min", "max": "max", "sum": "sum", "count": "count"}

SIGNATURE_ONLY = "signature-only"
HYBRID = "hybrid"


@dataclass(frozen=True)
class SimilarityCondition:
    function: str
    cmp: str
    threshold: float

    def __post_init__(self):
        if self.function not in REQUIRED_STATS:
            raise ValueError(f"unknown similarity function {self.function!r}")

    @property
    def required_stats(self) -> frozenset:
        return REQUIRED_STATS[self.function]

    @property
    def signature_only(self) -> bool:
        return self.required_stats <= SIGNATURE_FIELDS

    def __str__(self) -> str:
        if self.signature_only:
            return f"|{self.function}(live) - {self.function}(archived)| {self.cmp} {self.threshold:g}"
        return f"{self.function}(live, archived) {self.cmp} {self.threshold:g}"


@dataclass(frozen=True)
class AccessPlan:
    mode: str
    prefilter: tuple  # signature-only conditions checked before the Measurements join
    residual: tuple  # conditions needing raw measurements

    @property
    def conditions(self) -> tuple:
        return self.prefilter + self.residual


def plan_hybrid(conditions) -> AccessPlan:
    """Signature-only when every required statistic is a signature field."""
    conditions = tuple(conditions)
    sig = tuple(c for c in conditions if c.signature_only)
    raw = tuple(c for c in conditions if not c.signature_only)
    if not raw:
        return AccessPlan(SIGNATURE_ONLY, sig, ())
    return AccessPlan(HYBRID, sig, raw)


def access_mode(condition) -> str:
    """Planner decision for a HAVING condition with aggregate calls."""
    needs = set()
    for call in ex.aggregate_calls(condition):
        needs |= REQUIRED_STATS.get(call.name, frozenset({"cross"}))
    return SIGNATURE_ONLY if needs <= SIGNATURE_FIELDS else HYBRID


# ---------------------------------------------------------------------------
# evaluation over a set of archived windows


@dataclass
class ScanResult:
    rows: list  # (wid, score, ...) for qualifying windows, in wid order
    join_s: float = 0.0
    compute_s: float = 0.0


class SignatureIndex:
    """Sorted signature columns for range prefilters (one per partition)."""

    def __init__(self, store, positions: np.ndarray):
        self.positions = np.asarray(positions, dtype=np.int64)
        self._sorted = {}
        self._store = store

    def column(self, stat: str):
        if stat not in self._sorted:
            vals = np.asarray(self._store.stats[stat], dtype=np.float64)[self.positions]
            order = np.argsort(vals, kind="stable")
            self._sorted[stat] = (vals[order], self.positions[order])
        return self._sorted[stat]

    def candidates(self, cond: SimilarityCondition, live_stat: float) -> np.ndarray | None:
        """Positions that can satisfy ``|live - archived| < thr`` (None: no pruning)."""
        if cond.cmp not in ("<", "<="):
            return None
        vals, pos = self.column(_STAT_OF[cond.function])
        lo = np.searchsorted(vals, live_stat - cond.threshold, side="left")
        hi = np.searchsorted(vals, live_stat + cond.threshold, side="right")
        return np.sort(pos[lo:hi])


def _live_stats(x: np.ndarray) -> dict:
    return {k: float(v[0]) for k, v in window_stats(np.asarray(x, dtype=np.float64)[None, :]).items()}


def _signature_score(cond, live: dict, stats: dict) -> np.ndarray:
    stat = _STAT_OF[cond.function]
    return np.abs(live[stat] - np.asarray(stats[stat], dtype=np.float64))


def _holds(scores: np.ndarray, cmp: str, threshold: float) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        ok = {
            "<": scores < threshold, "<=": scores <= threshold, ">": scores > threshold,
            ">=": scores >= threshold, "=": scores == threshold, "!=": scores != threshold,
        }[cmp]
    return ok & ~np.isnan(scores)


def evaluate_archive(live, store, positions, plan: AccessPlan, mws: bool = True,
                     metrics: mt.Metrics | None = None, index: SignatureIndex | None = None) -> ScanResult:
    """Score ``live`` against the archived windows at ``positions``.

    With ``mws`` the archived statistics come from the signatures: a
    signature-only plan never touches raw measurements, and a hybrid plan
    prefilters on the signature conditions before joining. Without ``mws``
    every candidate's raw block is read and its statistics recomputed.
    """
    x = np.ascontiguousarray(live, dtype=np.float64)
    live_stats = _live_stats(x)
    positions = np.asarray(positions, dtype=np.int64)
    conds = plan.conditions
    t0 = time.perf_counter()
    join_s = 0.0
    if mws:
        cand = positions
        if plan.mode == HYBRID and plan.prefilter and index is not None:
            for c in plan.prefilter:
                pruned = index.candidates(c, live_stats[_STAT_OF[c.function]])
                if pruned is not None:
                    cand = np.intersect1d(cand, pruned, assume_unique=True)
        stats = {k: np.asarray(v)[cand] for k, v in store.stats.items()}
        matrix = None
        if plan.mode == HYBRID:
            tj = time.perf_counter()
            matrix = store.gather(cand, metrics)
            join_s = time.perf_counter() - tj
    else:
        cand = positions
        tj = time.perf_counter()
        matrix = store.gather(cand, metrics)
        join_s = time.perf_counter() - tj
        stats = window_stats(matrix) if len(cand) else {k: np.empty(0) for k in store.stats}
    ok = np.ones(len(cand), dtype=bool)
    scores = []
    for c in conds:
        if c.function == "pearson":
            if x.size < 2 or (matrix.size and matrix.shape[1] != x.size):
                raise ValueError(f"live window has {x.size} points, archived windows {matrix.shape[1]}")
            s = pearson_many(x, matrix, stats["mean"], stats["variance"]) if len(cand) else np.empty(0)
        elif c.function == "cosine":
            if matrix.size and matrix.shape[1] != x.size:
                raise ValueError(f"live window has {x.size} points, archived windows {matrix.shape[1]}")
            s = cosine_many(x, matrix, stats["norm"]) if len(cand) else np.empty(0)
        else:
            s = _signature_score(c, live_stats, stats)
        undefined = int(np.isnan(s).sum())
        if undefined and metrics is not None:
            metrics.inc(mt.UNDEFINED_PAIRS, undefined)
        ok &= _holds(s, c.cmp, c.threshold)
        scores.append(s)
    wids = store.wids[cand]
    rows = [(int(wids[k]), *(float(s[k]) for s in scores)) for k in np.flatnonzero(ok)]
    rows.sort()
    total = time.perf_counter() - t0
    return ScanResult(rows, join_s, total - join_s)
