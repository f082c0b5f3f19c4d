"""Synthetic trace generation and trace file I/O.

Item ids are treated as already-keyed 64-bit values; Zipf items are labeled by
rank (id == rank, rank 1 most frequent). Traces travel either as raw binary
(16-byte little-endian records: item u64, value i64) or as CSV with a
mandatory "item,value" header.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import ParseError

FORMATS = ("binary", "csv")
_RECORD_DTYPE = np.dtype([("item", "<u8"), ("value", "<i8")])


@dataclass(frozen=True)
class TraceRecord:
    item: int
    value: int = 1


@dataclass(frozen=True)
class ZipfSpec:
    """i.i.d. draws with P(rank r) proportional to r^-skew."""

    skew: float
    universe: int
    length: int
    seed: int = 0

    def __post_init__(self):
        if self.skew <= 0:
            raise ValueError("skew must be positive")
        if self.universe < 1 or self.length < 0:
            raise ValueError("universe must be >= 1 and length >= 0")


@dataclass(frozen=True)
class Trace:
    """A stream as parallel arrays; values default to unit weights."""

    items: np.ndarray
    values: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        items = np.ascontiguousarray(self.items, dtype=np.uint64)
        if self.values is None:
            values = np.ones(len(items), dtype=np.int64)
        else:
            values = np.ascontiguousarray(self.values, dtype=np.int64)
            if len(values) != len(items):
                raise ValueError("items and values length mismatch")
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.items)

    def records(self) -> Iterator[TraceRecord]:
        for x, v in zip(self.items, self.values):
            yield TraceRecord(int(x), int(v))

    @classmethod
    def from_records(cls, records: Iterable[TraceRecord]) -> "Trace":
        recs = list(records)
        return cls(np.array([r.item for r in recs], dtype=np.uint64),
                   np.array([r.value for r in recs], dtype=np.int64))

    @classmethod
    def concat(cls, a: "Trace", b: "Trace") -> "Trace":
        return cls(np.concatenate([a.items, b.items]),
                   np.concatenate([a.values, b.values]))


def generate_zipf(spec: ZipfSpec) -> Trace:
    """Unit-weight Zipf trace via inverse-CDF over the exact rank table."""
    rng = np.random.default_rng(spec.seed)
    ranks = np.arange(1, spec.universe + 1, dtype=np.float64)
    weights = ranks ** -spec.skew
    cum = np.cumsum(weights)
    cum /= cum[-1]
    draws = rng.random(spec.length)
    items = np.searchsorted(cum, draws, side="right") + 1
    return Trace(items.astype(np.uint64))


def split_halves(trace: Trace) -> tuple[Trace, Trace]:
    """First ceil(n/2) records, then the remainder."""
    cut = (len(trace) + 1) // 2
    return (Trace(trace.items[:cut], trace.values[:cut]),
            Trace(trace.items[cut:], trace.values[cut:]))


def _check_format(fmt: str) -> None:
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")


def write_trace(path, fmt: str, records) -> None:
    """Write a Trace or an iterable of TraceRecords."""
    _check_format(fmt)
    trace = records if isinstance(records, Trace) else Trace.from_records(records)
    path = Path(path)
    if fmt == "binary":
        arr = np.empty(len(trace), dtype=_RECORD_DTYPE)
        arr["item"] = trace.items
        arr["value"] = trace.values
        path.write_bytes(arr.tobytes())
        return
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item", "value"])
        for x, v in zip(trace.items, trace.values):
            writer.writerow([int(x), int(v)])


def read_trace(path, fmt: str) -> Iterator[TraceRecord]:
    """Stream records one at a time; ParseError carries the CSV line number."""
    _check_format(fmt)
    if fmt == "binary":
        for rec in load_trace(path, fmt).records():
            yield rec
        return
    with Path(path).open(newline="") as fh:
        header = fh.readline().strip()
        if header.replace(" ", "") != "item,value":
            raise ParseError(f"bad header {header!r}", line=1)
        for lineno, row in enumerate(csv.reader(fh), start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", line=lineno)
            try:
                yield TraceRecord(int(row[0]), int(row[1]))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None


def load_trace(path, fmt: str) -> Trace:
    """Read a whole trace into arrays."""
    _check_format(fmt)
    if fmt == "binary":
        raw = Path(path).read_bytes()
        if len(raw) % _RECORD_DTYPE.itemsize:
            raise ParseError(
                f"file size {len(raw)} is not a multiple of 16-byte records")
        arr = np.frombuffer(raw, dtype=_RECORD_DTYPE)
        return Trace(arr["item"].copy(), arr["value"].copy())
    return Trace.from_records(read_trace(path, fmt))
