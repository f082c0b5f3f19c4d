"""Derived stream tasks: heavy hitters, top-k, change detection, distinct count."""

from __future__ import annotations

import heapq
import math

import numpy as np

from . import _kernels as k
from .combine import subtract_sketches
from .errors import AllSlotsOccupied
from .metrics import ErrorSeries, _stream_arrays
from .oracle import ExactOracle
from .sketch import Sketch, SketchConfig
from .slot_array import SlotArray


class HeavyHitterTracker:
    """Min-heap of the `capacity` items with the highest current estimates.

    Estimates are refreshed only when an item is touched again, so stale heap
    entries may understate; lazy deletion keeps updates O(log capacity). Ties
    at the eviction boundary keep the lower item id.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.estimates: dict[int, int] = {}
        self._heap: list[tuple[float, int, int]] = []

    def _prune(self) -> None:
        h = self._heap
        while h and self.estimates.get(h[0][2]) != h[0][0]:
            heapq.heappop(h)

    def offer(self, item: int, estimate) -> None:
        """Consider (item, estimate) for membership after one arrival."""
        cur = self.estimates.get(item)
        if cur is not None:
            if estimate > cur:
                self.estimates[item] = estimate
                heapq.heappush(self._heap, (estimate, -item, item))
            return
        if len(self.estimates) < self.capacity:
            self.estimates[item] = estimate
            heapq.heappush(self._heap, (estimate, -item, item))
            return
        self._prune()
        mn_est, neg_id, mn_item = self._heap[0]
        if (estimate, -item) > (mn_est, neg_id):
            heapq.heappop(self._heap)
            del self.estimates[mn_item]
            self.estimates[item] = estimate
            heapq.heappush(self._heap, (estimate, -item, item))

    def report(self, threshold: float | None = None) -> list[tuple[int, float]]:
        """(item, estimate) pairs, highest first; optional threshold filter."""
        out = [(x, e) for x, e in self.estimates.items()
               if threshold is None or e >= threshold]
        out.sort(key=lambda xe: (-xe[1], xe[0]))
        return out

    def __len__(self) -> int:
        return len(self.estimates)


def track_heavy_hitters(tracker: HeavyHitterTracker, sketch, stream,
                        values=None, threshold: float | None = None):
    """Run the stream, updating the heap from each on-arrival estimate."""
    items, values = _stream_arrays(stream, values)
    ests = sketch.update_many(items, values, record_estimates=True)
    estimates = tracker.estimates
    offer = tracker.offer
    for t in range(len(items)):
        x = int(items[t])
        e = int(ests[t])
        cur = estimates.get(x)
        if cur is None or e > cur:
            offer(x, e)
    return tracker.report(threshold)


def change_detection(stream_a, stream_b, config: SketchConfig) -> ErrorSeries:
    """Errors of the difference sketch s(A) - s(B) over the item union.

    Requires a count sketch (general subtraction needs the turnstile model).
    """
    if config.kind != "cs":
        raise ValueError("change detection requires a count sketch")
    items_a, values_a = _stream_arrays(stream_a, None)
    items_b, values_b = _stream_arrays(stream_b, None)
    sa = Sketch(config)
    sb = Sketch(config)
    sa.update_many(items_a, values_a)
    sb.update_many(items_b, values_b)
    diff = subtract_sketches(sa, sb)
    oa = ExactOracle.from_stream(items_a, values_a)
    ob = ExactOracle.from_stream(items_b, values_b)
    union = np.array(sorted(set(oa.freq) | set(ob.freq)), dtype=np.uint64)
    truth = np.array([oa.frequency(int(x)) - ob.frequency(int(x))
                      for x in union], dtype=np.float64)
    est = diff.query_many(union).astype(np.float64)
    return ErrorSeries(np.abs(est - truth))


def zero_slot_estimate(row: SlotArray) -> float:
    """Estimated number of base slots that would be zero absent merging.

    Merged counters hide their zero sub-slots; assume the zero fraction seen
    among unmerged slots also holds for the 2^L - 1 residual sub-slots of each
    merged counter (each has at least one nonzero sub-slot).
    """
    unmerged, unmerged_zero, residual = k.zero_slot_stats(
        row._s2, row._m2, 0, row.s, row.max_level, row.w)
    frac = unmerged_zero / unmerged if unmerged else 0.0
    return unmerged_zero + frac * residual


def count_distinct(row) -> float:
    """Linear-counting estimate from one sketch row.

    Accepts a SlotArray (merging layout, via the zero-slot heuristic) or a
    plain counter array (baseline rows).
    """
    if isinstance(row, SlotArray):
        w = row.w
        zeros = zero_slot_estimate(row)
    else:
        counters = np.asarray(row)
        w = len(counters)
        zeros = float((counters == 0).sum())
    p = zeros / w
    if p <= 0.0:
        raise AllSlotsOccupied("no zero slots; linear counting is undefined")
    return math.log(p) / math.log(1.0 - 1.0 / w)
