"""Bit-packed counter rows whose counters merge with neighbors on overflow.

A SlotArray holds w base counters of s bits each plus one merge bit per
counter. When a counter needs to represent a value beyond its width it merges
with its aligned neighbor block, doubling in width: slot 6 merges right into
<6,7>, which merges left into <4..7>, which merges into <0..7>, and so on up
to 64-bit counters. The merged value is either the sum or the maximum of the
constituents (max is only sound for non-negative counts).

Merge bits are shared across levels: the bit at index i*2^L + 2^(L-1) - 1
marks the 2^L-aligned block starting at i*2^L as merged. Every index serves
exactly one level, so one bit per counter suffices. The bitmap is kept
downward closed (a merged block implies both halves are marked merged), which
makes decoding a bottom-up scan of at most max_level bits.
"""

from __future__ import annotations

import struct
from enum import IntEnum
from typing import Iterator, NamedTuple

import numpy as np

from . import _kernels as k
from .errors import (
    MaxLevelReached,
    SplitNotMaxMerge,
    SplitUnrepresentable,
    ValueTooWide,
)

SNAPSHOT_MAGIC = b"SLSA"
SNAPSHOT_VERSION = 1


class MergePolicy(IntEnum):
    SUM = 0
    MAX = 1


class CounterRef(NamedTuple):
    """A resolved logical counter: aligned start slot, merge level, bit width."""

    offset: int
    level: int
    width: int


def merge_bit_index(block_start: int, level: int) -> int:
    """Index of the merge bit encoding that the 2^level block is merged."""
    return block_start + (1 << (level - 1)) - 1


def max_merge_level(s: int, w: int) -> int:
    """Largest level with counters at most 64 bits wide and spans within w."""
    lev = 0
    while s << (lev + 1) <= 64 and (1 << (lev + 1)) <= w:
        lev += 1
    return lev


class SlotArray:
    """One sketch row: w slots of s bits, one merge bit per slot.

    signed=True stores counters in sign-magnitude form (top bit of the span is
    the sign), which keeps overflow sign-symmetric for count-sketch rows.
    """

    __slots__ = ("s", "w", "max_level", "signed", "slots", "merge_bits",
                 "_flags", "_s2", "_m2")

    def __init__(self, w: int, s: int = 8, signed: bool = False):
        if w < 2 or w & (w - 1):
            raise ValueError("w must be a power of two >= 2")
        if s < 2 or s & (s - 1) or s > 64:
            raise ValueError("s must be a power of two in [2, 64]")
        if (w * s) % 8:
            raise ValueError("w*s must be a multiple of 8")
        self.s = s
        self.w = w
        self.max_level = max_merge_level(s, w)
        self.signed = signed
        self.slots = np.zeros(w * s // 8, dtype=np.uint8)
        self.merge_bits = np.zeros((w + 7) // 8, dtype=np.uint8)
        self._flags = np.zeros(1, dtype=np.uint8)
        self._bind_views()

    def _bind_views(self):
        # kernels take (d, nbytes) buffers plus a row index; a standalone
        # array is its own single row
        self._s2 = self.slots.reshape(1, -1)
        self._m2 = self.merge_bits.reshape(1, -1)

    # -- resolution ---------------------------------------------------------

    @property
    def saturated(self) -> bool:
        """True once any counter has hit its final-width cap."""
        return bool(self._flags[0])

    def _ref(self, offset: int, level: int) -> CounterRef:
        return CounterRef(offset, level, self.s << level)

    def locate(self, j: int) -> CounterRef:
        """Resolve the logical counter containing slot j."""
        if not 0 <= j < self.w:
            raise IndexError(f"slot index {j} out of range [0, {self.w})")
        lev = int(k.locate_level(self._m2, 0, j, self.max_level))
        return self._ref(j & ~((1 << lev) - 1), lev)

    def _check_ref(self, ref: CounterRef) -> None:
        live = self.locate(ref.offset)
        if (live.offset, live.level) != (ref.offset, ref.level):
            raise ValueError(f"{ref} is not a live counter (found {live})")

    # -- reads and writes ---------------------------------------------------

    def read_unsigned(self, ref: CounterRef) -> int:
        return int(k.read_ctr(self._s2, 0, self.s, ref.offset, ref.level))

    def write_unsigned(self, ref: CounterRef, v: int) -> None:
        if not 0 <= v < (1 << ref.width):
            raise ValueTooWide(f"{v} does not fit {ref.width} bits")
        k.write_ctr(self._s2, 0, self.s, ref.offset, ref.level, np.uint64(v))

    def read_signed(self, ref: CounterRef) -> int:
        return int(k.read_ctr_signed(self._s2, 0, self.s, ref.offset, ref.level))

    def write_signed(self, ref: CounterRef, v: int) -> None:
        # sign-magnitude: -2^(width-1) has no representation, zero is +0
        if abs(v) > (1 << (ref.width - 1)) - 1:
            raise ValueTooWide(f"{v} does not fit {ref.width} bits sign-magnitude")
        k.write_ctr_signed(self._s2, 0, self.s, ref.offset, ref.level, np.int64(v))

    def read(self, ref: CounterRef) -> int:
        return self.read_signed(ref) if self.signed else self.read_unsigned(ref)

    # -- growth -------------------------------------------------------------

    def merge_up(self, ref: CounterRef, policy: MergePolicy) -> CounterRef:
        """Merge ref with its aligned sibling block; returns the parent ref.

        The parent value is the policy-combination of the two constituents; a
        constituent that is itself a mosaic of smaller counters contributes
        the sum (or max) of its live counters.
        """
        self._check_ref(ref)
        if ref.level >= self.max_level:
            raise MaxLevelReached(f"level {ref.level} counters cannot grow")
        parent_level = ref.level + 1
        parent_off = ref.offset & ~((1 << parent_level) - 1)
        k.merge_block(self._s2, self._m2, 0, self.s, self.max_level,
                      parent_off, parent_level, int(policy), self.signed)
        return self._ref(parent_off, parent_level)

    def add_unsigned(self, j: int, v: int, policy: MergePolicy = MergePolicy.SUM) -> CounterRef:
        """Add v >= 0 at slot j, merging (before the add) until the result fits.

        Saturates at the widest counter's cap instead of raising; the sticky
        `saturated` flag records that estimates may no longer dominate.
        """
        if v < 0:
            raise ValueError("add_unsigned requires v >= 0")
        lev = int(k.add_unsigned(self._s2, self._m2, self._flags, 0,
                                 self.s, self.max_level, j, np.uint64(v),
                                 int(policy)))
        return self._ref(j & ~((1 << lev) - 1), lev)

    def add_signed(self, j: int, v: int, policy: MergePolicy = MergePolicy.SUM) -> CounterRef:
        """Signed add; overflow (symmetric magnitude threshold) sum-merges."""
        if policy != MergePolicy.SUM:
            raise ValueError("signed counters support only sum merging")
        lev = int(k.add_signed(self._s2, self._m2, self._flags, 0,
                               self.s, self.max_level, j, np.int64(v)))
        return self._ref(j & ~((1 << lev) - 1), lev)

    def split(self, ref: CounterRef, policy: MergePolicy) -> tuple[CounterRef, CounterRef]:
        """Undo one merge level, writing the current value into both halves.

        Sound only for max-merged counters whose value fits the half width.
        Children merge bits are untouched; they still describe true sub-merges.
        """
        if policy != MergePolicy.MAX:
            raise SplitNotMaxMerge("splitting requires max merging")
        self._check_ref(ref)
        if ref.level < 1:
            raise ValueError("level-0 counters cannot be split")
        val = self.read_unsigned(ref)
        if val >= 1 << (self.s << (ref.level - 1)):
            raise SplitUnrepresentable(f"{val} does not fit {ref.width // 2} bits")
        k.split_block(self._s2, self._m2, 0, self.s, self.max_level,
                      ref.offset, ref.level)
        half = ref.level - 1
        return (self._ref(ref.offset, half),
                self._ref(ref.offset + (1 << half), half))

    def scale_down_all(self, mode: str = "deterministic", rng_seed: int = 0) -> None:
        """Replace every counter value C by floor(C/2) or Binomial(C, 1/2)."""
        if self.signed:
            raise ValueError("scale_down_all requires unsigned mode")
        if mode == "deterministic":
            det = True
        elif mode == "probabilistic":
            det = False
            k.seed_rng(rng_seed & 0x7FFFFFFF)
        else:
            raise ValueError(f"unknown downsampling mode {mode!r}")
        k.scale_down_row(self._s2, self._m2, 0, self.s, self.max_level,
                         self.w, det)

    # -- whole-row views ----------------------------------------------------

    def counters(self) -> Iterator[tuple[CounterRef, int]]:
        """Yield (ref, value) for every live counter in offset order."""
        j = 0
        while j < self.w:
            ref = self.locate(j)
            yield ref, self.read(ref)
            j += 1 << ref.level

    def total(self) -> int:
        """Sum of all live counter values (conserved under sum-merge adds)."""
        if self.signed:
            return sum(v for _, v in self.counters())
        return int(k.row_total(self._s2, self._m2, 0, self.s,
                               self.max_level, self.w))

    def max_merged_level(self) -> int:
        return int(k.row_max_level(self._m2, 0, self.w, self.max_level))

    def bit_footprint(self) -> int:
        """Total storage in bits: w*s payload plus one merge bit per slot."""
        return self.w * self.s + self.w

    def copy(self) -> "SlotArray":
        dup = SlotArray.__new__(SlotArray)
        dup.s, dup.w, dup.max_level, dup.signed = (self.s, self.w,
                                                   self.max_level, self.signed)
        dup.slots = self.slots.copy()
        dup.merge_bits = self.merge_bits.copy()
        dup._flags = self._flags.copy()
        dup._bind_views()
        return dup

    def validate(self) -> None:
        """Assert structural invariants; raises AssertionError on corruption.

        Checks downward closure of the merge bitmap, alignment of every live
        counter, and that every stored value fits its width. Intended for
        tests and debugging; cost is O(w * max_level).
        """
        for L in range(self.max_level, 1, -1):
            for block in range(0, self.w, 1 << L):
                if k.get_mbit(self._m2, 0, merge_bit_index(block, L)):
                    for half in (block, block + (1 << (L - 1))):
                        assert k.get_mbit(self._m2, 0,
                                          merge_bit_index(half, L - 1)), \
                            f"downward closure violated at block {block} level {L}"
        for ref, _ in self.counters():
            assert ref.offset % (1 << ref.level) == 0, f"misaligned {ref}"
            assert ref.level <= self.max_level
            raw = self.read_unsigned(ref)
            assert raw < (1 << ref.width), f"value overflow at {ref}"
            if self.signed:
                mag = raw & ((1 << (ref.width - 1)) - 1)
                assert mag <= (1 << (ref.width - 1)) - 1

    # -- snapshot -----------------------------------------------------------

    def to_bytes(self) -> bytes:
        header = SNAPSHOT_MAGIC + struct.pack(
            "<BBQB", SNAPSHOT_VERSION, self.s, self.w, self.max_level)
        return header + self.merge_bits.tobytes() + self.slots.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, signed: bool = False) -> "SlotArray":
        if data[:4] != SNAPSHOT_MAGIC:
            raise ValueError("bad snapshot magic")
        version, s, w, max_level = struct.unpack_from("<BBQB", data, 4)
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        arr = cls(int(w), int(s), signed=signed)
        if max_level != arr.max_level:
            raise ValueError("snapshot max_level inconsistent with s and w")
        off = 4 + struct.calcsize("<BBQB")
        nmb = len(arr.merge_bits)
        nslots = len(arr.slots)
        if len(data) != off + nmb + nslots:
            raise ValueError("snapshot payload size mismatch")
        arr.merge_bits[:] = np.frombuffer(data[off:off + nmb], dtype=np.uint8)
        arr.slots[:] = np.frombuffer(data[off + nmb:], dtype=np.uint8)
        return arr
