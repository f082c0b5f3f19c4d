"""Count-Min, Conservative-Update, and Count Sketch over shared hashed rows.

Two row layouts are supported. The baseline layout is the textbook one: fixed
`bits`-wide counters that saturate at their cap. The salsa layout backs each
row with a SlotArray whose counters start at s bits and merge with aligned
neighbors on overflow, so a given byte budget buys more counters.

The "underlying" sketch of a merging sketch at level L is the vanilla sketch
with width w/2^L and (s * 2^L)-bit counters using the same seed; because row
hashes take the top bits of the mix, its indices are exactly floor(h / 2^L).
The dominance guarantees (truth <= merging estimate <= underlying estimate)
are exercised in the test suite.
"""

from __future__ import annotations

import struct
import sys
from dataclasses import dataclass, replace

import numpy as np

_LITTLE_ENDIAN = sys.byteorder == "little"

from . import _kernels as k
from .errors import ConfigMismatch, LevelTooSmall, NegativeWeight
from .hashing import HashFamily
from .slot_array import MergePolicy, SlotArray

KINDS = ("cms", "cus", "cs")
LAYOUTS = ("baseline", "salsa")

_BASELINE_DTYPES = {8: "u1", 16: "u2", 32: "u4", 64: "u8"}


@dataclass(frozen=True)
class SketchConfig:
    """Validated sketch shape; identical configs are required for combining.

    kind    cms | cus | cs
    layout  baseline (fixed `bits`-wide counters) | salsa (merging counters)
    d       rows; defaults to 4 for cms/cus and 5 (odd, for the median) for cs
    w       slots per row, power of two
    s       base counter width in bits for the salsa layout
    bits    counter width for the baseline layout
    policy  merge rule for the salsa layout; cus requires max, cs requires sum
    """

    kind: str
    w: int
    layout: str = "salsa"
    d: int | None = None
    s: int = 8
    bits: int = 32
    policy: MergePolicy | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {LAYOUTS}")
        if self.w < 2 or self.w & (self.w - 1):
            raise ValueError("w must be a power of two >= 2")
        if self.d is None:
            object.__setattr__(self, "d", 5 if self.kind == "cs" else 4)
        if self.d < 1:
            raise ValueError("d must be positive")
        if self.kind == "cs" and self.d % 2 == 0:
            raise ValueError("cs requires an odd number of rows")
        if self.policy is None:
            object.__setattr__(
                self, "policy",
                MergePolicy.MAX if self.kind == "cus" else MergePolicy.SUM)
        else:
            object.__setattr__(self, "policy", MergePolicy(self.policy))
        if self.layout == "salsa":
            if self.kind == "cs" and self.policy != MergePolicy.SUM:
                raise ValueError("cs merging must use the sum policy")
            if self.kind == "cus" and self.policy != MergePolicy.MAX:
                raise ValueError("cus merging must use the max policy")
        if self.layout == "baseline" and self.bits not in _BASELINE_DTYPES:
            raise ValueError("baseline bits must be 8, 16, 32 or 64")

    @property
    def signed(self) -> bool:
        return self.kind == "cs"


class Sketch:
    """d hashed rows of counters with kind-appropriate update and query."""

    def __init__(self, config: SketchConfig):
        self.config = config
        self.hashes = HashFamily(config.seed, config.d, config.w)
        if config.layout == "salsa":
            proto = SlotArray(config.w, config.s, signed=config.signed)
            self.max_level = proto.max_level
            self._slots = np.zeros((config.d, len(proto.slots)), dtype=np.uint8)
            self._mbits = np.zeros((config.d, len(proto.merge_bits)), dtype=np.uint8)
            self._flags = np.zeros(config.d, dtype=np.uint8)
            self._rowlev = np.zeros(config.d, dtype=np.int64)
            self._counters = None
            # aligned wide views of the slot bytes: with s=8 a level-L counter
            # is one little-endian (8 << L)-bit word, so the hot paths can
            # load and store counters directly
            if config.s == 8 and config.w >= 8 and _LITTLE_ENDIAN:
                self._wide = self._slots.view(np.uint64)
            else:
                self._wide = None
        else:
            self.max_level = 0
            dtype = _BASELINE_DTYPES[config.bits]
            # stored at 64 bits regardless of the logical width; the logical
            # width only drives the saturation cap and the snapshot encoding
            self._counters = np.zeros(
                (config.d, config.w),
                dtype=np.int64 if config.signed else np.uint64)
            self._slots = self._mbits = self._flags = self._rowlev = None
            self._ser_dtype = ("<i" if config.signed else "<u") + dtype[1]

    # -- derived facts ------------------------------------------------------

    @property
    def kind(self) -> str:
        return self.config.kind

    @property
    def is_salsa(self) -> bool:
        return self.config.layout == "salsa"

    @property
    def saturated(self) -> bool:
        return self.is_salsa and bool(self._flags.any())

    def memory_bytes(self) -> int:
        """Exact footprint: counters plus merge-bit overhead where present."""
        c = self.config
        if self.is_salsa:
            return c.d * (c.w * c.s + c.w) // 8
        return c.d * c.w * c.bits // 8

    def row(self, i: int) -> SlotArray:
        """Live SlotArray view of row i (salsa layout only); mutations stick."""
        if not self.is_salsa:
            raise ValueError("baseline rows are plain counters, not SlotArrays")
        view = SlotArray.__new__(SlotArray)
        view.s, view.w = self.config.s, self.config.w
        view.max_level = self.max_level
        view.signed = self.config.signed
        view.slots = self._slots[i]
        view.merge_bits = self._mbits[i]
        view._flags = self._flags[i:i + 1]
        view._s2 = self._slots[i:i + 1]
        view._m2 = self._mbits[i:i + 1]
        return view

    def row_counters(self, i: int) -> np.ndarray:
        """Raw baseline counter row (a view)."""
        if self.is_salsa:
            raise ValueError("salsa rows are SlotArrays; use row()")
        return self._counters[i]

    def level(self) -> int:
        """Global maximum merge level across all rows (0 for baseline)."""
        if not self.is_salsa:
            return 0
        return max(
            int(k.row_max_level(self._mbits, i, self.config.w, self.max_level))
            for i in range(self.config.d))

    # -- updates ------------------------------------------------------------

    def _as_streams(self, items, values):
        items = np.ascontiguousarray(items, dtype=np.uint64)
        if values is None:
            values = np.ones(len(items), dtype=np.int64)
        else:
            values = np.ascontiguousarray(values, dtype=np.int64)
            if len(values) != len(items):
                raise ValueError("items and values length mismatch")
        return items, values

    def update_many(self, items, values=None, record_estimates: bool = False):
        """Apply a stream of updates in order.

        With record_estimates, returns the on-arrival estimate of each update's
        item, queried immediately after that update was applied.
        """
        items, values = self._as_streams(items, values)
        c = self.config
        if c.kind in ("cms", "cus") and values.size and int(values.min()) < 0:
            raise NegativeWeight(f"{c.kind} updates require v >= 0")
        want = bool(record_estimates)
        conservative = c.kind == "cus"
        if c.kind == "cs":
            ests = np.zeros(len(items), dtype=np.int64)
            if not self.is_salsa:
                k.drive_cs_baseline(self._counters,
                                    np.int64((1 << (c.bits - 1)) - 1),
                                    self.hashes.shift, self.hashes.row_seeds,
                                    items, values, ests, want)
            elif self._wide is not None:
                k.drive_cs_fast(self._slots, self._wide, self._mbits,
                                self._flags, self._rowlev, self.max_level,
                                self.hashes.shift, self.hashes.row_seeds,
                                items, values, ests, want)
            else:
                k.drive_cs(self._slots, self._mbits, self._flags, self._rowlev,
                           c.s, self.max_level, self.hashes.shift,
                           self.hashes.row_seeds, items, values, ests, want)
        else:
            ests = np.zeros(len(items), dtype=np.uint64)
            if not conservative and not want:
                # plain adds keep rows independent: go row-at-a-time so each
                # row's working set stays cache resident
                if not self.is_salsa:
                    k.drive_l1_baseline_rowmajor(
                        self._counters, np.uint64((1 << c.bits) - 1),
                        self.hashes.shift, self.hashes.row_seeds, items,
                        values)
                elif self._wide is not None:
                    k.drive_l1_fast_rowmajor(
                        self._slots, self._wide, self._mbits, self._flags,
                        self._rowlev, self.max_level, self.hashes.shift,
                        self.hashes.row_seeds, int(c.policy), items, values)
                else:
                    k.drive_l1(self._slots, self._mbits, self._flags,
                               self._rowlev, c.s, self.max_level,
                               self.hashes.shift, self.hashes.row_seeds,
                               int(c.policy), conservative, items, values,
                               ests, want)
                return None
            if not self.is_salsa:
                k.drive_l1_baseline(self._counters,
                                    np.uint64((1 << c.bits) - 1),
                                    self.hashes.shift, self.hashes.row_seeds,
                                    conservative, items, values, ests, want)
            elif self._wide is not None:
                k.drive_l1_fast(self._slots, self._wide, self._mbits,
                                self._flags, self._rowlev, self.max_level,
                                self.hashes.shift, self.hashes.row_seeds,
                                int(c.policy), conservative, items, values,
                                ests, want)
            else:
                k.drive_l1(self._slots, self._mbits, self._flags, self._rowlev,
                           c.s, self.max_level, self.hashes.shift,
                           self.hashes.row_seeds, int(c.policy), conservative,
                           items, values, ests, want)
        return ests if want else None

    def update(self, x: int, v: int = 1) -> None:
        """Apply one update <x, v>."""
        self.update_many(np.array([x], dtype=np.uint64),
                         np.array([v], dtype=np.int64))

    # -- queries ------------------------------------------------------------

    def query_many(self, items) -> np.ndarray:
        """Frequency estimates for an array of items."""
        items = np.ascontiguousarray(items, dtype=np.uint64)
        c = self.config
        if c.kind == "cs":
            out = np.zeros(len(items), dtype=np.int64)
            if self.is_salsa:
                k.query_many_cs(self._slots, self._mbits, c.s, self.max_level,
                                self.hashes.shift, self.hashes.row_seeds,
                                items, out)
            else:
                k.query_many_cs_baseline(self._counters, self.hashes.shift,
                                         self.hashes.row_seeds, items, out)
        else:
            out = np.zeros(len(items), dtype=np.uint64)
            if self.is_salsa:
                k.query_many_l1(self._slots, self._mbits, c.s, self.max_level,
                                self.hashes.shift, self.hashes.row_seeds,
                                items, out)
            else:
                k.query_many_l1_baseline(self._counters, self.hashes.shift,
                                         self.hashes.row_seeds, items, out)
        return out

    def query(self, x: int) -> int:
        """Point estimate: min over rows (cms/cus) or median of signed rows (cs)."""
        return int(self.query_many(np.array([x], dtype=np.uint64))[0])

    def row_counter_value(self, i: int, x: int) -> int:
        """Value of the logical counter item x hashes to in row i."""
        j = self.hashes.index(i, x)
        if self.is_salsa:
            r = self.row(i)
            ref = r.locate(j)
            return r.read(ref)
        return int(self._counters[i, j])

    # -- structure ----------------------------------------------------------

    def underlying(self, level: int | None = None) -> "Sketch":
        """Fresh vanilla sketch the dominance guarantees compare against.

        Width w/2^level with (s * 2^level)-bit counters and the same seed; its
        row hashes equal floor(h_i / 2^level). Feed it the same stream to
        compare. Defaults to the sketch's current global merge level.
        """
        if not self.is_salsa:
            raise ValueError("underlying() applies to the salsa layout")
        c = self.config
        if level is None:
            level = self.level()
        if not 0 <= level <= self.max_level:
            raise ValueError(f"level must be in [0, {self.max_level}]")
        if c.w >> level < 2:
            raise ValueError("underlying width would collapse below 2")
        cfg = replace(c, layout="baseline", w=c.w >> level,
                      bits=max(c.s << level, 8))
        return Sketch(cfg)

    def copy(self) -> "Sketch":
        dup = Sketch(self.config)
        if self.is_salsa:
            dup._slots[:] = self._slots
            dup._mbits[:] = self._mbits
            dup._flags[:] = self._flags
            dup._rowlev[:] = self._rowlev
        else:
            dup._counters[:] = self._counters
        return dup

    # -- snapshot -----------------------------------------------------------

    _KIND_CODE = {"cms": 0, "cus": 1, "cs": 2}
    _LAYOUT_CODE = {"baseline": 0, "salsa": 1}

    def to_bytes(self) -> bytes:
        """Little-endian snapshot: config header, then rows in order."""
        c = self.config
        width_byte = c.s if self.is_salsa else c.bits
        head = struct.pack("<BBBBQQB", self._KIND_CODE[c.kind],
                           self._LAYOUT_CODE[c.layout], width_byte, c.d, c.w,
                           c.seed & ((1 << 64) - 1), int(c.policy))
        parts = [head]
        if self.is_salsa:
            for i in range(c.d):
                parts.append(self.row(i).to_bytes())
        else:
            parts.append(self._counters.astype(self._ser_dtype).tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Sketch":
        kind_c, layout_c, width_byte, d, w, seed, policy = struct.unpack_from(
            "<BBBBQQB", data, 0)
        kind = {v: n for n, v in cls._KIND_CODE.items()}[kind_c]
        layout = {v: n for n, v in cls._LAYOUT_CODE.items()}[layout_c]
        off = struct.calcsize("<BBBBQQB")
        if layout == "salsa":
            cfg = SketchConfig(kind, int(w), layout, d=d, s=width_byte,
                               policy=MergePolicy(policy), seed=int(seed))
            sk = cls(cfg)
            row_len = 4 + struct.calcsize("<BBQB") + len(sk._mbits[0]) + len(sk._slots[0])
            for i in range(d):
                arr = SlotArray.from_bytes(data[off:off + row_len],
                                           signed=cfg.signed)
                sk._slots[i] = arr.slots
                sk._mbits[i] = arr.merge_bits
                sk._rowlev[i] = arr.max_merged_level()
                off += row_len
        else:
            cfg = SketchConfig(kind, int(w), layout, d=d, bits=width_byte,
                               policy=MergePolicy(policy), seed=int(seed))
            sk = cls(cfg)
            raw = np.frombuffer(data[off:], dtype=sk._ser_dtype)
            sk._counters[:] = raw.reshape(d, int(w))
        return sk


def coarsen(sketch: Sketch, level: int) -> Sketch:
    """Copy of a sum-policy merging sketch with every 2^level block merged.

    Queries on the result equal queries on the underlying vanilla sketch of
    width w/2^level fed the same stream (sum merging conserves block sums).
    """
    if not sketch.is_salsa:
        raise ValueError("coarsen applies to the salsa layout")
    if sketch.config.policy != MergePolicy.SUM:
        raise ValueError("coarsen is only meaningful under sum merging")
    cur = sketch.level()
    if level < cur:
        raise LevelTooSmall(f"level {level} is below current max level {cur}")
    if level > sketch.max_level:
        raise ValueError(f"level exceeds the structural cap {sketch.max_level}")
    out = sketch.copy()
    for i in range(out.config.d):
        k.coarsen_row(out._slots, out._mbits, i, out.config.s,
                      out.max_level, out.config.w, level, out.config.signed)
        out._rowlev[i] = level
    return out


def check_config_match(a: Sketch, b: Sketch) -> None:
    if a.config != b.config:
        raise ConfigMismatch(f"{a.config} != {b.config}")
