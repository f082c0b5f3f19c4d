"""On-arrival evaluation and the error metrics used by the benchmarks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as k
from .errors import EmptyOracle, EmptySeries
from .oracle import ExactOracle


@dataclass(frozen=True)
class ErrorSeries:
    """Per-update absolute errors of an on-arrival run."""

    errors: np.ndarray

    @property
    def n(self) -> int:
        return len(self.errors)


def nrmse(series: ErrorSeries) -> float:
    """Root-mean-square error divided by the series length; unitless.

    For unit-weight on-arrival runs this lands in [0, 1].
    """
    if series.n == 0:
        raise EmptySeries("no errors recorded")
    e = np.asarray(series.errors, dtype=np.float64)
    return float(np.sqrt(np.mean(e * e)) / series.n)


def _positive_truth(oracle: ExactOracle):
    items = oracle.positive_items()
    truth = np.array([oracle.freq[int(x)] for x in items], dtype=np.float64)
    return items, truth


def aae(sketch, oracle: ExactOracle) -> float:
    """Mean absolute estimation error over items with positive frequency."""
    items, truth = _positive_truth(oracle)
    est = np.asarray(sketch.query_many(items), dtype=np.float64)
    return float(np.mean(np.abs(est - truth)))


def are(sketch, oracle: ExactOracle) -> float:
    """Mean relative estimation error over items with positive frequency."""
    items, truth = _positive_truth(oracle)
    est = np.asarray(sketch.query_many(items), dtype=np.float64)
    return float(np.mean(np.abs(est - truth) / truth))


def _stream_arrays(stream, values):
    if hasattr(stream, "items") and hasattr(stream, "values"):
        return (np.ascontiguousarray(stream.items, dtype=np.uint64),
                np.ascontiguousarray(stream.values, dtype=np.int64))
    items = np.ascontiguousarray(stream, dtype=np.uint64)
    if values is None:
        values = np.ones(len(items), dtype=np.int64)
    else:
        values = np.ascontiguousarray(values, dtype=np.int64)
    return items, values


def running_truth(items, values=None) -> np.ndarray:
    """Exact frequency of each update's item just after that update."""
    items, values = _stream_arrays(items, values)
    _, inv = np.unique(items, return_inverse=True)
    counts = np.zeros(int(inv.max()) + 1 if len(inv) else 0, dtype=np.int64)
    out = np.zeros(len(items), dtype=np.int64)
    if len(items):
        k.running_truth(inv.astype(np.int64), values, counts, out)
    return out


def on_arrival_run(sketch, stream, values=None) -> ErrorSeries:
    """Feed the stream one update at a time, querying each item on arrival.

    Each update is applied to the sketch and the exact oracle, then the
    estimate for the arriving item is compared against its exact running
    frequency (update first, then query).
    """
    items, values = _stream_arrays(stream, values)
    ests = sketch.update_many(items, values, record_estimates=True)
    truth = running_truth(items, values)
    errors = np.abs(ests.astype(np.float64) - truth.astype(np.float64))
    return ErrorSeries(errors)
