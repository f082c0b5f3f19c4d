"""Merging and subtracting sketches for distributed aggregation and diffs.

Merging sums sketches counter-wise: each block of the result is merged at
least as far as in either input, and overflow during the combination triggers
further merges. Subtraction is the signed analogue; it is generally valid for
count sketches (turnstile), and for count-min only under the caller's
guarantee that stream B is contained in stream A, which is checked indirectly
by rejecting negative results. Inputs are never mutated.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import NegativeResult
from .sketch import Sketch, check_config_match
from .slot_array import MergePolicy, SlotArray


class CombineKind(Enum):
    MERGE = "merge"
    SUBTRACT = "subtract"


def _combine_salsa_row(dst: SlotArray, src: SlotArray, policy: MergePolicy,
                       subtract: bool) -> None:
    # Ascending-offset walk over src's live counters. Overflow-driven growth
    # in dst may coarsen blocks ahead of the cursor, so dst's layout is
    # re-resolved through locate() at every step.
    j = 0
    w = src.w
    while j < w:
        sref = src.locate(j)
        val = src.read(sref)
        dref = dst.locate(j)
        while dref.level < sref.level:
            dref = dst.merge_up(dref, policy)
        if src.signed:
            dst.add_signed(j, -val if subtract else val)
        elif subtract:
            cur = dst.read_unsigned(dref)
            if val > cur:
                raise NegativeResult(
                    f"counter at slot {j} would go negative ({cur} - {val})")
            dst.write_unsigned(dref, cur - val)
        else:
            dst.add_unsigned(j, val, policy)
        j = sref.offset + (1 << sref.level)


def combine_sketches(a: Sketch, b: Sketch, kind: CombineKind) -> Sketch:
    """Return a new sketch holding a + b (MERGE) or a - b (SUBTRACT)."""
    check_config_match(a, b)
    kind = CombineKind(kind)
    subtract = kind == CombineKind.SUBTRACT
    out = a.copy()
    cfg = a.config
    if a.is_salsa:
        for i in range(cfg.d):
            _combine_salsa_row(out.row(i), b.row(i), cfg.policy, subtract)
        out._rowlev[:] = [out.row(i).max_merged_level() for i in range(cfg.d)]
        return out
    if cfg.signed:
        magcap = (1 << (cfg.bits - 1)) - 1
        vals = out._counters + (-b._counters if subtract else b._counters)
        np.clip(vals, -magcap, magcap, out=vals)
        out._counters[:] = vals
        return out
    if subtract:
        if (b._counters > a._counters).any():
            i, j = np.argwhere(b._counters > a._counters)[0]
            raise NegativeResult(f"counter ({i}, {j}) would go negative")
        out._counters[:] = a._counters - b._counters
    else:
        cap = np.uint64((1 << cfg.bits) - 1)
        room = cap - a._counters
        out._counters[:] = np.where(b._counters <= room,
                                    a._counters + b._counters, cap)
    return out


def merge_sketches(a: Sketch, b: Sketch) -> Sketch:
    """Sketch of the concatenated streams: s(A) + s(B)."""
    return combine_sketches(a, b, CombineKind.MERGE)


def subtract_sketches(a: Sketch, b: Sketch,
                      kind: CombineKind = CombineKind.SUBTRACT) -> Sketch:
    """Sketch of the frequency differences: s(A) - s(B).

    For count-min the caller must guarantee B's updates are contained in A's;
    a violated guarantee surfaces as NegativeResult.
    """
    if CombineKind(kind) != CombineKind.SUBTRACT:
        raise ValueError("subtract_sketches only performs subtraction")
    return combine_sketches(a, b, CombineKind.SUBTRACT)
