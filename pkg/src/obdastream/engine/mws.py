"""Materialised window signatures.

All statistics go through :func:`window_stats` so that a signature stored at
ingest time and one recomputed later from the same raw block are the same
floats bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FIELDS = ("count", "sum", "mean", "variance", "min", "max", "norm")


class EmptyWindowError(ValueError):
    pass


def window_stats(matrix: np.ndarray) -> dict:
    """Row-wise signature fields of a 2-D array of equal-length windows."""
    m = np.ascontiguousarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("expected a 2-D array of windows")
    n = m.shape[1]
    if n == 0:
        raise EmptyWindowError("empty window")
    total = m.sum(axis=1)
    mean = total / n
    dev = m - mean[:, None]
    variance = (dev * dev).sum(axis=1) / n
    return {
        "count": np.full(m.shape[0], n, dtype=np.int64),
        "sum": total,
        "mean": mean,
        "variance": variance,
        "min": m.min(axis=1),
        "max": m.max(axis=1),
        "norm": np.sqrt((m * m).sum(axis=1)),
    }


@dataclass(frozen=True)
class MwsSignature:
    count: int
    sum: float
    mean: float
    variance: float
    min: float
    max: float
    norm: float

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def sum_squares(self) -> float:
        return self.norm * self.norm

    def check(self) -> list[str]:
        problems = []
        if self.count < 1:
            problems.append("count < 1")
        if self.variance < 0:
            problems.append("negative variance")
        slack = 1e-9 * self.sum_squares
        if self.sum_squares < self.count * self.mean * self.mean - slack:
            problems.append("norm below n * mean^2")
        if self.min > self.max:
            problems.append("min > max")
        return problems

    def merge(self, other: MwsSignature) -> MwsSignature:
        """Signature of the concatenation, from the mergeable parts (n, sums, min, max)."""
        n = self.count + other.count
        total = self.sum + other.sum
        squares = self.sum_squares + other.sum_squares
        mean = total / n
        variance = max(squares / n - mean * mean, 0.0)
        return MwsSignature(n, total, mean, variance, min(self.min, other.min), max(self.max, other.max),
                            math.sqrt(squares))

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, f) for f in FIELDS)


def compute_mws(values) -> MwsSignature:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise EmptyWindowError("cannot sign an empty window")
    s = window_stats(arr[None, :])
    return MwsSignature(int(s["count"][0]), float(s["sum"][0]), float(s["mean"][0]), float(s["variance"][0]),
                        float(s["min"][0]), float(s["max"][0]), float(s["norm"][0]))


def signature_at(stats: dict, i: int) -> MwsSignature:
    return MwsSignature(int(stats["count"][i]), float(stats["sum"][i]), float(stats["mean"][i]),
                        float(stats["variance"][i]), float(stats["min"][i]), float(stats["max"][i]),
                        float(stats["norm"][i]))
