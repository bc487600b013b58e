"""Measurements, stream CSV input, and sliding-window assignment."""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

from . import metrics as mt


@dataclass(frozen=True, order=True)
class Measurement:
    time: int
    sensor_id: str
    value: float
    stream: str = ""


@dataclass
class Window:
    wid: int
    tick: int
    start: int
    end: int
    sensor_id: str
    times: list = field(default_factory=list)
    values: list = field(default_factory=list)


def read_stream_csv(path, stream: str = "", metrics: mt.Metrics | None = None) -> list[Measurement]:
    """Rows ``time_ms,sensor_id,value``; a header row is optional.

    Malformed rows (wrong arity, non-integer time, non-finite value) are
    skipped and counted.
    """
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for n, row in enumerate(csv.reader(fh)):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if n == 0 and row[0].strip() == "time_ms":
                continue
            try:
                if len(row) != 3:
                    raise ValueError
                t = int(row[0].strip())
                v = float(row[2])
                if not math.isfinite(v):
                    raise ValueError
            except ValueError:
                if metrics is not None:
                    metrics.inc(mt.REJECTED_MALFORMED)
                continue
            out.append(Measurement(t, row[1].strip(), v, stream))
    return out


def write_stream_csv(path, measurements) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_ms", "sensor_id", "value"])
        for m in measurements:
            w.writerow([m.time, m.sensor_id, repr(float(m.value))])


@dataclass(frozen=True)
class WindowAssigner:
    """Closed windows ``[e - range - setback, e - setback]`` with ``e`` on the slide grid."""

    range_ms: int
    slide_ms: int
    anchor_ms: int = 0
    setback_ms: int = 0
    lateness_ms: int = 0

    def __post_init__(self):
        if self.range_ms < 0:
            raise ValueError("window range must be >= 0")
        if self.slide_ms <= 0:
            raise ValueError("window slide must be > 0")
        if self.setback_ms < 0:
            raise ValueError("set-back must be >= 0")

    def grid_end(self, tick: int) -> int:
        """Latest slide-grid point not after ``tick``."""
        return self.anchor_ms + ((tick - self.anchor_ms) // self.slide_ms) * self.slide_ms

    def bounds(self, tick: int) -> tuple[int, int]:
        e = self.grid_end(tick)
        return e - self.range_ms - self.setback_ms, e - self.setback_ms

    def ticks(self, first: int, last: int) -> range:
        """Grid ticks whose window can contain a time in ``[first, last]``."""
        sb, r, sl, a = self.setback_ms, self.range_ms, self.slide_ms, self.anchor_ms
        lo = a + (-((a - (first + sb)) // sl)) * sl  # ceil to grid
        hi = a + ((last + sb + r - a) // sl) * sl
        return range(lo, hi + 1, sl)

    def accept(self, measurements, metrics: mt.Metrics | None = None) -> list[Measurement]:
        """Drop measurements older than the lateness bound for their sensor."""
        latest: dict = {}
        out = []
        for m in measurements:
            key = (m.stream, m.sensor_id)
            if key in latest and m.time < latest[key] - self.lateness_ms:
                if metrics is not None:
                    metrics.inc(mt.REJECTED_LATE)
                continue
            latest[key] = max(latest.get(key, m.time), m.time)
            out.append(m)
        return out

    def assign(self, measurements, metrics: mt.Metrics | None = None, first_wid: int = 0) -> list[Window]:
        """Per-sensor windows at every grid tick; empty windows are not emitted."""
        accepted = self.accept(measurements, metrics)
        if not accepted:
            return []
        by_sensor: dict = {}
        for m in accepted:
            by_sensor.setdefault(m.sensor_id, []).append(m)
        for ms in by_sensor.values():
            ms.sort(key=lambda m: m.time)
        times = {s: [m.time for m in ms] for s, ms in by_sensor.items()}
        first = min(m.time for m in accepted)
        last = max(m.time for m in accepted)
        out = []
        wid = first_wid
        for tick in self.ticks(first, last):
            lo, hi = self.bounds(tick)
            for s in sorted(by_sensor):
                ts = times[s]
                i, j = bisect.bisect_left(ts, lo), bisect.bisect_right(ts, hi)
                if i == j:
                    continue
                ms = by_sensor[s][i:j]
                out.append(Window(wid, tick, lo, hi, s, [m.time for m in ms], [m.value for m in ms]))
                wid += 1
        return out


def window_slice(sorted_measurements, sorted_times, lo: int, hi: int) -> list[Measurement]:
    i = bisect.bisect_left(sorted_times, lo)
    j = bisect.bisect_right(sorted_times, hi)
    return sorted_measurements[i:j]
