"""Exact ground truth for evaluating sketches."""

from __future__ import annotations

import numpy as np

from .errors import EmptyOracle


class ExactOracle:
    """Exact frequency map plus stream statistics.

    volume is the total absolute update weight seen (equal to the sum of
    frequencies for cash-register streams).
    """

    __slots__ = ("freq", "volume")

    def __init__(self):
        self.freq: dict[int, int] = {}
        self.volume = 0

    def add(self, x: int, v: int = 1) -> None:
        self.freq[x] = self.freq.get(x, 0) + v
        self.volume += abs(v)

    @classmethod
    def from_stream(cls, items, values=None) -> "ExactOracle":
        items = np.asarray(items, dtype=np.uint64)
        o = cls()
        if values is None:
            uniq, cnt = np.unique(items, return_counts=True)
            o.freq = {int(x): int(c) for x, c in zip(uniq, cnt)}
            o.volume = int(len(items))
            return o
        values = np.asarray(values, dtype=np.int64)
        uniq, inv = np.unique(items, return_inverse=True)
        sums = np.zeros(len(uniq), dtype=np.int64)
        np.add.at(sums, inv, values)
        o.freq = {int(x): int(c) for x, c in zip(uniq, sums)}
        o.volume = int(np.abs(values).sum())
        return o

    def frequency(self, x: int) -> int:
        return self.freq.get(x, 0)

    @property
    def distinct_count(self) -> int:
        return sum(1 for f in self.freq.values() if f != 0)

    def moment(self, p: float) -> float:
        """Exact F_p of the frequency vector; F_0 is the distinct count."""
        if p == 0:
            return float(self.distinct_count)
        return float(sum(abs(f) ** p for f in self.freq.values() if f != 0))

    def positive_items(self) -> np.ndarray:
        """Distinct items with strictly positive frequency, ascending."""
        if not self.freq:
            raise EmptyOracle("oracle has seen no updates")
        return np.array(sorted(x for x, f in self.freq.items() if f > 0),
                        dtype=np.uint64)

    def top_k(self, k: int) -> list[tuple[int, int]]:
        """The k most frequent items; ties favor the lower item id."""
        ranked = sorted(self.freq.items(), key=lambda kv: (-kv[1], kv[0]))
        return ranked[:k]
