"""Adaptive in-memory join index over batches of archived windows.

Each batch is probed by linear scan until its probe count exceeds the
threshold K; the probe that crosses it builds a hash map for the batch and is
served from it, as are all later probes.
"""

from __future__ import annotations

import math

from . import metrics as mt


class AdaptiveIndex:
    def __init__(self, batches, key, threshold: float = 3, metrics: mt.Metrics | None = None):
        self.batches = [list(b) for b in batches]
        self.key = key
        self.threshold = math.inf if threshold is None else threshold
        self.metrics = metrics
        self.probes = [0] * len(self.batches)
        self.maps: list[dict | None] = [None] * len(self.batches)
        self.trace: list[tuple[int, int, str]] = []  # (batch, probe number, "scan" | "index")

    @classmethod
    def over(cls, items, key, batch_size: int = 256, threshold: float = 3, metrics=None) -> AdaptiveIndex:
        items = list(items)
        batches = [items[i:i + batch_size] for i in range(0, len(items), batch_size)]
        return cls(batches, key, threshold, metrics)

    def _build(self, b: int) -> None:
        m: dict = {}
        for item in self.batches[b]:
            m.setdefault(self.key(item), []).append(item)
        self.maps[b] = m
        if self.metrics is not None:
            self.metrics.inc(mt.INDEX_BUILDS)

    def probe(self, b: int, k) -> list:
        self.probes[b] += 1
        n = self.probes[b]
        if self.metrics is not None:
            self.metrics.inc(mt.INDEX_PROBES)
        if self.maps[b] is None and n > self.threshold:
            self._build(b)
        if self.maps[b] is not None:
            self.trace.append((b, n, "index"))
            if self.metrics is not None:
                self.metrics.inc(mt.INDEXED_PROBES)
            return list(self.maps[b].get(k, ()))
        self.trace.append((b, n, "scan"))
        return [item for item in self.batches[b] if self.key(item) == k]

    def lookup(self, k) -> list:
        out = []
        for b in range(len(self.batches)):
            out.extend(self.probe(b, k))
        return out

    @property
    def built(self) -> list[int]:
        return [b for b, m in enumerate(self.maps) if m is not None]
