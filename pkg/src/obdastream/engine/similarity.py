"""Correlation and similarity between a live window and archived windows.

Scalar functions take the live series ``x`` and the archived series ``y``;
``signature`` (the archived window's MWS) replaces the recomputation of the
archived mean, variance or norm. Vectorised forms work on row matrices.
"""

from __future__ import annotations

import math

import numpy as np

from .mws import MwsSignature, window_stats


class UndefinedCorrelation(ArithmeticError):
    """Zero variance (Pearson) or zero norm (cosine) on one side."""


class LengthMismatch(ValueError):
    pass


def _aligned(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"series lengths differ: {x.size} vs {y.size}")
    return x, y


def _stats(v: np.ndarray) -> dict:
    return {k: float(a[0]) for k, a in window_stats(v[None, :]).items()}


def pearson(x, y, signature: MwsSignature | None = None) -> float:
    x, y = _aligned(x, y)
    n = x.size
    if n < 2:
        raise LengthMismatch("Pearson needs at least two points")
    sx = _stats(x)
    if signature is not None:
        if signature.count != n:
            raise LengthMismatch(f"signature covers {signature.count} points, series has {n}")
        mean_y, var_y = signature.mean, signature.variance
    else:
        sy = _stats(y)
        mean_y, var_y = sy["mean"], sy["variance"]
    if sx["variance"] <= 0 or var_y <= 0:
        raise UndefinedCorrelation("zero variance")
    cross = float((x * y).sum())
    return (cross / n - sx["mean"] * mean_y) / (math.sqrt(sx["variance"]) * math.sqrt(var_y))


def cosine(x, y, signature: MwsSignature | None = None) -> float:
    x, y = _aligned(x, y)
    nx = _stats(x)["norm"]
    ny = signature.norm if signature is not None else _stats(y)["norm"]
    if nx == 0 or ny == 0:
        raise UndefinedCorrelation("zero norm")
    return float((x * y).sum()) / (nx * ny)


def avg_similarity(x, archived: MwsSignature, threshold: float = 10.0) -> tuple[float, bool]:
    """``|avg(x) - avg(archived)|`` and whether it is below ``threshold``."""
    d = abs(_stats(np.asarray(x, dtype=np.float64))["mean"] - archived.mean)
    return d, d < threshold


def min_similarity(x, archived: MwsSignature, threshold: float = 10.0) -> tuple[float, bool]:
    d = abs(float(np.min(x)) - archived.min)
    return d, d < threshold


def cosine_similarity(x, y, signature: MwsSignature | None = None) -> float:
    return cosine(x, y, signature)


# ---------------------------------------------------------------------------
# vectorised, one live window against many archived windows


def pearson_many(x: np.ndarray, matrix: np.ndarray, mean_y: np.ndarray, var_y: np.ndarray) -> np.ndarray:
    """Coefficients per row; NaN where either side has zero variance."""
    n = x.size
    sx = _stats(x)
    cross = (matrix * x).sum(axis=1)
    denom = math.sqrt(sx["variance"]) * np.sqrt(var_y)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (cross / n - sx["mean"] * mean_y) / denom
    r[(var_y <= 0) | (sx["variance"] <= 0)] = np.nan
    return r


def cosine_many(x: np.ndarray, matrix: np.ndarray, norm_y: np.ndarray) -> np.ndarray:
    nx = _stats(x)["norm"]
    cross = (matrix * x).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = cross / (nx * norm_y)
    r[(norm_y == 0) | (nx == 0)] = np.nan
    return r
