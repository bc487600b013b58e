"""Thread-safe execution counters, dumped as JSON lines."""

from __future__ import annotations

import json
import threading
from collections import Counter

# counter names used across the engine
MEASUREMENT_SCANS = "measurement_scans"
INDEX_BUILDS = "index_builds"
INDEX_PROBES = "index_probes"
INDEXED_PROBES = "indexed_probes"
UNDEFINED_PAIRS = "undefined_pairs"
REJECTED_LATE = "rejected_late"
REJECTED_MALFORMED = "rejected_malformed"
MWS_HITS = "mws_hits"


class Metrics:
    def __init__(self):
        self._lock = threading.Lock()
        self._counts: Counter = Counter()
        self._timings: list[dict] = []

    def inc(self, name: str, n: int = 1) -> None:
        with self._lock:
            self._counts[name] += n

    def get(self, name: str) -> int:
        with self._lock:
            return self._counts[name]

    def record(self, **fields) -> None:
        with self._lock:
            self._timings.append(dict(fields))

    def snapshot(self) -> dict:
        with self._lock:
            return dict(sorted(self._counts.items()))

    @property
    def timings(self) -> list[dict]:
        with self._lock:
            return list(self._timings)

    def dump(self, path, **extra) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"type": "counters", **extra, **self.snapshot()}, sort_keys=True) + "\n")
            for t in self.timings:
                fh.write(json.dumps({"type": "timing", **t}, sort_keys=True) + "\n")
