"""Archived window store with materialised signatures.

Directory layout::

    windows.csv   manifest, one row per window:
                  wid,sensor_id,window_start,window_end,offset,length,
                  count,sum,mean,variance,min,max,norm
    values.f64    raw measurement values, little-endian float64, one
                  contiguous block per window at [offset, offset+length)
    times.i64     measurement times (ms), little-endian int64, same blocks

Floats in the manifest are written with ``repr`` so they round-trip exactly.
Writing the same windows twice produces identical bytes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics as mt
from .mws import FIELDS, MwsSignature, window_stats

MANIFEST = "windows.csv"
VALUES = "values.f64"
TIMES = "times.i64"
HEADER = ["wid", "sensor_id", "window_start", "window_end", "offset", "length", *FIELDS]


@dataclass(frozen=True)
class WindowRecord:
    wid: int
    start: int
    end: int
    sensor_id: str
    signature: MwsSignature
    offset: int
    length: int


class WindowStore:
    """Immutable once built; numpy arrays are marked read-only."""

    def __init__(self, wids, sensors, starts, ends, offsets, lengths, stats: dict, values, times):
        self.wids = _ro(np.asarray(wids, dtype=np.int64))
        self.sensors = list(sensors)
        self.starts = _ro(np.asarray(starts, dtype=np.int64))
        self.ends = _ro(np.asarray(ends, dtype=np.int64))
        self.offsets = _ro(np.asarray(offsets, dtype=np.int64))
        self.lengths = _ro(np.asarray(lengths, dtype=np.int64))
        self.stats = {k: _ro(np.asarray(v)) for k, v in stats.items()}
        self.values = _ro(np.asarray(values, dtype=np.float64))
        self.times = _ro(np.asarray(times, dtype=np.int64))
        if len(set(self.wids.tolist())) != len(self.wids):
            raise ValueError("window ids must be unique")
        self._pos = {int(w): i for i, w in enumerate(self.wids)}

    def __len__(self) -> int:
        return len(self.wids)

    # -- construction
    @classmethod
    def from_windows(cls, windows) -> WindowStore:
        """Build from assigner windows (empty ones are skipped)."""
        windows = [w for w in windows if len(w.values)]
        lengths = np.array([len(w.values) for w in windows], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(np.int64) if len(windows) else lengths
        values = np.array([v for w in windows for v in w.values], dtype=np.float64)
        times = np.array([t for w in windows for t in w.times], dtype=np.int64)
        stats = _stats_by_length(values, offsets, lengths)
        return cls([w.wid for w in windows], [w.sensor_id for w in windows], [w.start for w in windows],
                   [w.end for w in windows], offsets, lengths, stats, values, times)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, sensors=None, starts=None, ends=None, first_wid: int = 0) -> WindowStore:
        """Equal-length windows given as rows (used by the benchmark generator)."""
        m = np.ascontiguousarray(matrix, dtype=np.float64)
        k, n = m.shape
        sensors = sensors if sensors is not None else [f"arch{i}" for i in range(k)]
        starts = starts if starts is not None else np.zeros(k, dtype=np.int64)
        ends = ends if ends is not None else starts
        offsets = np.arange(k, dtype=np.int64) * n
        lengths = np.full(k, n, dtype=np.int64)
        times = np.tile(np.arange(n, dtype=np.int64), k)
        return cls(np.arange(first_wid, first_wid + k), sensors, starts, ends, offsets, lengths, window_stats(m),
                   m.reshape(-1), times)

    # -- access
    def position(self, wid: int) -> int:
        return self._pos[int(wid)]

    def signature(self, wid: int) -> MwsSignature:
        i = self.position(wid)
        return MwsSignature(*(int(self.stats[f][i]) if f == "count" else float(self.stats[f][i]) for f in FIELDS))

    def record(self, wid: int) -> WindowRecord:
        i = self.position(wid)
        return WindowRecord(int(self.wids[i]), int(self.starts[i]), int(self.ends[i]), self.sensors[i],
                            self.signature(wid), int(self.offsets[i]), int(self.lengths[i]))

    def records(self) -> list[WindowRecord]:
        return [self.record(int(w)) for w in self.wids]

    def raw(self, wid: int, metrics: mt.Metrics | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Times and values of one window; counts as a Measurements scan."""
        i = self.position(wid)
        a, n = int(self.offsets[i]), int(self.lengths[i])
        if metrics is not None:
            metrics.inc(mt.MEASUREMENT_SCANS, n)
        return self.times[a:a + n], self.values[a:a + n]

    def gather(self, positions: np.ndarray, metrics: mt.Metrics | None = None) -> np.ndarray:
        """Values of equal-length windows (by position) as a fresh row matrix."""
        positions = np.asarray(positions, dtype=np.int64)
        if positions.size == 0:
            return np.empty((0, 0))
        lengths = self.lengths[positions]
        n = int(lengths[0])
        if np.any(lengths != n):
            raise ValueError("gather needs equal-length windows")
        m = self.values[self.offsets[positions][:, None] + np.arange(n)]
        if metrics is not None:
            metrics.inc(mt.MEASUREMENT_SCANS, int(m.size))
        return m

    def check_signatures(self, rel: float = 1e-9) -> list[int]:
        """Wids whose stored signature disagrees with a recomputation."""
        fresh = _stats_by_length(self.values, self.offsets, self.lengths)
        bad = set()
        for f in FIELDS:
            a, b = np.asarray(self.stats[f], dtype=float), np.asarray(fresh[f], dtype=float)
            diff = np.abs(a - b) > rel * np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
            bad |= set(self.wids[diff].tolist())
        return sorted(bad)

    # -- persistence
    def write(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        with (d / MANIFEST).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HEADER)
            for i in range(len(self)):
                stats = [int(self.stats["count"][i])] + [repr(float(self.stats[f][i])) for f in FIELDS[1:]]
                w.writerow([int(self.wids[i]), self.sensors[i], int(self.starts[i]), int(self.ends[i]),
                            int(self.offsets[i]), int(self.lengths[i]), *stats])
        self.values.astype("<f8").tofile(d / VALUES)
        self.times.astype("<i8").tofile(d / TIMES)
        return d

    @classmethod
    def read(cls, directory) -> WindowStore:
        d = Path(directory)
        rows = []
        with (d / MANIFEST).open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != HEADER:
                raise ValueError(f"{d / MANIFEST}: unexpected header {header}")
            rows = list(reader)
        values = np.fromfile(d / VALUES, dtype="<f8").astype(np.float64)
        times = np.fromfile(d / TIMES, dtype="<i8").astype(np.int64)
        cols = list(zip(*rows)) if rows else [[] for _ in HEADER]
        stats = {"count": np.array([int(x) for x in cols[6]], dtype=np.int64)}
        for k, f in enumerate(FIELDS[1:], start=7):
            stats[f] = np.array([float(x) for x in cols[k]], dtype=np.float64)
        return cls([int(x) for x in cols[0]], list(cols[1]), [int(x) for x in cols[2]], [int(x) for x in cols[3]],
                   [int(x) for x in cols[4]], [int(x) for x in cols[5]], stats, values, times)


def _ro(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _stats_by_length(values, offsets, lengths) -> dict:
    k = len(lengths)
    out = {f: np.zeros(k, dtype=np.int64 if f == "count" else np.float64) for f in FIELDS}
    for n in sorted(set(np.asarray(lengths).tolist())):
        idx = np.flatnonzero(np.asarray(lengths) == n)
        m = np.asarray(values)[np.asarray(offsets)[idx][:, None] + np.arange(n)]
        s = window_stats(m)
        for f in FIELDS:
            out[f][idx] = s[f]
    return out
