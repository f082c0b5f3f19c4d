"""Seeded per-row hash family shared by every sketch kind.

Row i maps item x through one 64-bit avalanche mix of (x xor row_seed_i). The
row index is the top log2(w) bits of the mix; the count-sketch sign is bit 0,
mapped to +/-1. Taking top bits makes the "underlying" coarse sketch of width
w/2^L (same seed) hash every item to floor(h/2^L) automatically.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as k

_GAMMA = 0x9E3779B97F4A7C15
_M64 = (1 << 64) - 1


def derive_row_seeds(seed: int, d: int) -> np.ndarray:
    """Fixed mixing of the master seed into d independent row seeds."""
    return np.array(
        [int(k.mix64(np.uint64((seed + (i + 1) * _GAMMA) & _M64)))
         for i in range(d)],
        dtype=np.uint64,
    )


class HashFamily:
    """d row hashes onto [0, w) plus d sign hashes onto {+1, -1}."""

    __slots__ = ("seed", "d", "w", "log2w", "shift", "row_seeds")

    def __init__(self, seed: int, d: int, w: int):
        if w < 2 or w & (w - 1):
            raise ValueError("w must be a power of two >= 2")
        if d < 1:
            raise ValueError("d must be positive")
        self.seed = seed
        self.d = d
        self.w = w
        self.log2w = w.bit_length() - 1
        self.shift = np.uint64(64 - self.log2w)
        self.row_seeds = derive_row_seeds(seed, d)

    def index(self, i: int, x: int) -> int:
        """Slot index of item x in row i."""
        m = k.mix64(np.uint64(x) ^ self.row_seeds[i])
        return int(m >> self.shift)

    def sign(self, i: int, x: int) -> int:
        """Count-sketch sign of item x in row i: +1 or -1."""
        m = k.mix64(np.uint64(x) ^ self.row_seeds[i])
        return 1 if int(m) & 1 else -1
