import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mergesketch import (
    CounterRef,
    MaxLevelReached,
    MergePolicy,
    SlotArray,
    SplitNotMaxMerge,
    SplitUnrepresentable,
    ValueTooWide,
    merge_bit_index,
)
import mergesketch._kernels as k

SUM = MergePolicy.SUM
MAX = MergePolicy.MAX


def set_value(arr, j, v):
    arr.write_unsigned(arr.locate(j), v)


class TestMergeBitIndex:
    def test_pair_merge(self):
        assert merge_bit_index(6, 1) == 6

    def test_quad_merge(self):
        assert merge_bit_index(4, 2) == 5

    def test_oct_merge(self):
        assert merge_bit_index(0, 3) == 3

    def test_role_bijection(self):
        # every index serves exactly one (block, level) pair
        w = 64
        arr = SlotArray(w, 8)
        seen = {}
        for L in range(1, arr.max_level + 1):
            for block in range(0, w, 1 << L):
                idx = merge_bit_index(block, L)
                assert idx not in seen, (idx, seen[idx], (block, L))
                seen[idx] = (block, L)


class TestLocate:
    def test_fresh(self):
        arr = SlotArray(8, 8)
        assert arr.locate(0) == CounterRef(0, 0, 8)

    def test_pair(self):
        arr = SlotArray(8, 8)
        k.set_mbit(arr._m2, 0, 6)
        assert arr.locate(6)[:2] == (6, 1)
        assert arr.locate(7)[:2] == (6, 1)
        assert arr.locate(5)[:2] == (5, 0)

    def test_downward_closed_quad(self):
        arr = SlotArray(8, 8)
        for j in (4, 5, 6):
            k.set_mbit(arr._m2, 0, j)
        assert arr.locate(7)[:2] == (4, 2)

    def test_out_of_range(self):
        arr = SlotArray(8, 8)
        with pytest.raises(IndexError):
            arr.locate(8)

    def test_span_contains_query_slot(self):
        rng = np.random.default_rng(7)
        arr = SlotArray(64, 8)
        for _ in range(300):
            arr.add_unsigned(int(rng.integers(64)), int(rng.integers(1, 6000)), SUM)
        for j in range(64):
            ref = arr.locate(j)
            assert ref.offset <= j < ref.offset + (1 << ref.level)
            assert ref.offset % (1 << ref.level) == 0


class TestReadWrite:
    def test_fresh_zero(self):
        arr = SlotArray(16, 8)
        for j in range(16):
            assert arr.read_unsigned(arr.locate(j)) == 0

    def test_slot_little_endian(self):
        arr = SlotArray(8, 8)
        set_value(arr, 6, 0x03)
        set_value(arr, 7, 0x01)
        arr.merge_up(arr.locate(6), SUM)
        # direct byte layout: low slot holds low bits
        arr.write_unsigned(arr.locate(6), 259)
        assert arr.slots[6] == 0x03 and arr.slots[7] == 0x01
        assert arr.read_unsigned(arr.locate(6)) == 259

    def test_width_limits(self):
        arr = SlotArray(8, 8)
        set_value(arr, 0, 255)
        assert arr.read_unsigned(arr.locate(0)) == 255
        with pytest.raises(ValueTooWide):
            set_value(arr, 0, 256)

    def test_level1_width(self):
        arr = SlotArray(8, 8)
        ref = arr.merge_up(arr.locate(2), SUM)
        arr.write_unsigned(ref, 65535)
        assert arr.read_unsigned(ref) == 65535
        with pytest.raises(ValueTooWide):
            arr.write_unsigned(ref, 65536)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**16 - 1), st.integers(0, 3))
    def test_round_trip(self, v, block):
        arr = SlotArray(8, 8)
        ref = arr.merge_up(arr.locate(block * 2), SUM)
        arr.write_unsigned(ref, v)
        assert arr.read_unsigned(ref) == v

    @settings(max_examples=60, deadline=None)
    @given(st.integers(-(2**15 - 1), 2**15 - 1))
    def test_round_trip_signed(self, v):
        arr = SlotArray(8, 8, signed=True)
        ref = arr.merge_up(arr.locate(0), SUM)
        arr.write_signed(ref, v)
        assert arr.read_signed(ref) == v

    def test_signed_zero_canonical(self):
        arr = SlotArray(8, 8, signed=True)
        ref = arr.locate(3)
        arr.write_signed(ref, -7)
        arr.write_signed(ref, 0)
        # sign bit cleared: raw representation is all zero
        assert arr.read_unsigned(ref) == 0

    def test_sub_byte_slots(self):
        arr = SlotArray(16, 4)
        for j, v in enumerate((1, 15, 0, 7, 12, 3, 9, 2)):
            set_value(arr, j, v)
        for j, v in enumerate((1, 15, 0, 7, 12, 3, 9, 2)):
            assert arr.read_unsigned(arr.locate(j)) == v
        with pytest.raises(ValueTooWide):
            set_value(arr, 0, 16)
        ref = arr.merge_up(arr.locate(0), SUM)
        assert arr.read_unsigned(ref) == 16  # 1 + 15


class TestMergeUp:
    def test_sum(self):
        arr = SlotArray(8, 8)
        set_value(arr, 6, 200)
        set_value(arr, 7, 3)
        ref = arr.merge_up(arr.locate(6), SUM)
        assert ref[:2] == (6, 1) and arr.read_unsigned(ref) == 203

    def test_max(self):
        arr = SlotArray(8, 8)
        set_value(arr, 6, 200)
        set_value(arr, 7, 3)
        ref = arr.merge_up(arr.locate(6), MAX)
        assert ref[:2] == (6, 1) and arr.read_unsigned(ref) == 200

    def test_mosaic_sibling_and_closure(self):
        arr = SlotArray(8, 8)
        set_value(arr, 6, 200)
        set_value(arr, 7, 3)
        pair = arr.merge_up(arr.locate(6), SUM)
        arr.write_unsigned(pair, 300)
        set_value(arr, 4, 10)
        set_value(arr, 5, 20)
        ref = arr.merge_up(pair, SUM)
        assert ref[:2] == (4, 2) and arr.read_unsigned(ref) == 330
        for j in (4, 5, 6):
            assert k.get_mbit(arr._m2, 0, j)
        arr.validate()

    def test_max_level_reached(self):
        arr = SlotArray(8, 8)
        ref = arr.locate(0)
        for _ in range(arr.max_level):
            ref = arr.merge_up(ref, SUM)
        assert ref.level == arr.max_level == 3
        with pytest.raises(MaxLevelReached):
            arr.merge_up(ref, SUM)

    def test_stale_ref_rejected(self):
        arr = SlotArray(8, 8)
        ref = arr.locate(6)
        arr.merge_up(ref, SUM)
        with pytest.raises(ValueError):
            arr.merge_up(ref, SUM)  # (6, 0) no longer live


class TestAddUnsigned:
    def test_plain(self):
        arr = SlotArray(8, 8)
        ref = arr.add_unsigned(3, 5, SUM)
        assert ref[:2] == (3, 0) and arr.read_unsigned(ref) == 5

    def test_overflow_sum(self):
        arr = SlotArray(8, 8)
        set_value(arr, 6, 255)
        set_value(arr, 7, 3)
        ref = arr.add_unsigned(6, 1, SUM)
        assert ref[:2] == (6, 1) and arr.read_unsigned(ref) == 259

    def test_overflow_max(self):
        arr = SlotArray(8, 8)
        set_value(arr, 6, 255)
        set_value(arr, 7, 3)
        ref = arr.add_unsigned(6, 1, MAX)
        assert ref[:2] == (6, 1) and arr.read_unsigned(ref) == 256

    def test_exact_boundary_merges(self):
        # needing to represent 2^s is an overflow even when adding to 2^s - 1
        arr = SlotArray(8, 8)
        set_value(arr, 0, 255)
        ref = arr.add_unsigned(0, 1, SUM)
        assert ref.level == 1 and arr.read_unsigned(ref) == 256

    def test_weighted_multi_level(self):
        arr = SlotArray(8, 8)
        ref = arr.add_unsigned(2, 100_000, SUM)
        assert ref.level == 2 and arr.read_unsigned(ref) == 100_000
        arr.validate()

    def test_saturation_clamps_and_flags(self):
        arr = SlotArray(2, 8)  # max_level 1: widest counter is 16 bits
        assert arr.max_level == 1
        ref = arr.add_unsigned(0, 100_000, SUM)
        assert arr.saturated
        assert arr.read_unsigned(ref) == 65535
        ref = arr.add_unsigned(0, 1, SUM)
        assert arr.read_unsigned(ref) == 65535  # clamped, still sticky
        assert arr.saturated

    def test_sum_conservation(self):
        rng = np.random.default_rng(3)
        arr = SlotArray(32, 8)
        total = 0
        for _ in range(500):
            j = int(rng.integers(32))
            v = int(rng.integers(0, 400))
            arr.add_unsigned(j, v, SUM)
            total += v
            assert arr.total() == total
        arr.validate()

    def test_max_dominated_by_sum(self):
        rng = np.random.default_rng(11)
        a_sum = SlotArray(32, 8)
        a_max = SlotArray(32, 8)
        for _ in range(800):
            j = int(rng.integers(32))
            v = int(rng.integers(0, 300))
            a_sum.add_unsigned(j, v, SUM)
            a_max.add_unsigned(j, v, MAX)
            for q in range(32):
                vs = a_sum.read_unsigned(a_sum.locate(q))
                vm = a_max.read_unsigned(a_max.locate(q))
                assert vm <= vs


class TestAddSigned:
    def test_merge_on_magnitude_overflow(self):
        arr = SlotArray(8, 8, signed=True)
        arr.write_signed(arr.locate(6), 127)
        arr.write_signed(arr.locate(7), -3)
        ref = arr.add_signed(6, 1)
        assert ref[:2] == (6, 1) and arr.read_signed(ref) == 125

    def test_negative_overflow(self):
        arr = SlotArray(8, 8, signed=True)
        arr.write_signed(arr.locate(0), -127)
        ref = arr.add_signed(0, -1)
        assert ref.level == 1 and arr.read_signed(ref) == -128

    def test_max_policy_rejected(self):
        arr = SlotArray(8, 8, signed=True)
        with pytest.raises(ValueError):
            arr.add_signed(0, 1, MergePolicy.MAX)


class TestScaleDown:
    def test_deterministic(self):
        arr = SlotArray(8, 8)
        set_value(arr, 0, 7)
        set_value(arr, 1, 4)
        set_value(arr, 6, 200)
        set_value(arr, 7, 3)
        ref = arr.merge_up(arr.locate(6), SUM)
        arr.write_unsigned(ref, 300)
        before = arr.merge_bits.copy()
        arr.scale_down_all("deterministic")
        assert arr.read_unsigned(arr.locate(0)) == 3
        assert arr.read_unsigned(arr.locate(1)) == 2
        assert arr.read_unsigned(arr.locate(6)) == 150
        assert np.array_equal(arr.merge_bits, before)

    def test_zero_array_unchanged(self):
        arr = SlotArray(8, 8)
        arr.scale_down_all("deterministic")
        assert arr.total() == 0

    def test_probabilistic_mean(self):
        total = 0
        n = 10_000
        for seed in range(n):
            arr = SlotArray(8, 8)
            set_value(arr, 0, 10)
            arr.scale_down_all("probabilistic", rng_seed=seed)
            total += arr.read_unsigned(arr.locate(0))
        mean = total / n
        assert 4.85 <= mean <= 5.15

    def test_order_preserved(self):
        rng = np.random.default_rng(5)
        arr = SlotArray(16, 8)
        for j in range(16):
            set_value(arr, j, int(rng.integers(0, 256)))
        before = [arr.read_unsigned(arr.locate(j)) for j in range(16)]
        arr.scale_down_all("deterministic")
        after = [arr.read_unsigned(arr.locate(j)) for j in range(16)]
        for a in range(16):
            for b in range(16):
                if before[a] >= before[b]:
                    assert after[a] >= after[b]


class TestSplit:
    def test_pair_split(self):
        arr = SlotArray(8, 8)
        set_value(arr, 4, 100)
        ref = arr.merge_up(arr.locate(4), MAX)
        arr.write_unsigned(ref, 150)
        c1, c2 = arr.split(ref, MAX)
        assert c1[:2] == (4, 0) and c2[:2] == (5, 0)
        assert arr.read_unsigned(c1) == 150 and arr.read_unsigned(c2) == 150
        arr.validate()

    def test_unrepresentable(self):
        arr = SlotArray(8, 8)
        ref = arr.merge_up(arr.locate(4), MAX)
        arr.write_unsigned(ref, 300)
        with pytest.raises(SplitUnrepresentable):
            arr.split(ref, MAX)

    def test_sum_policy_rejected(self):
        arr = SlotArray(8, 8)
        ref = arr.merge_up(arr.locate(4), SUM)
        with pytest.raises(SplitNotMaxMerge):
            arr.split(ref, SUM)

    def test_one_level_only(self):
        arr = SlotArray(8, 8)
        ref = arr.merge_up(arr.locate(4), MAX)
        ref = arr.merge_up(ref, MAX)
        arr.write_unsigned(ref, 100)
        c1, c2 = arr.split(ref, MAX)
        assert c1[:2] == (4, 1) and c2[:2] == (6, 1)
        assert arr.read_unsigned(c1) == 100 and arr.read_unsigned(c2) == 100
        # children pair bits still set
        assert arr.locate(5)[:2] == (4, 1)
        assert arr.locate(7)[:2] == (6, 1)
        arr.validate()

    def test_split_then_max_merge_restores(self):
        arr = SlotArray(8, 8)
        ref = arr.merge_up(arr.locate(2), MAX)
        arr.write_unsigned(ref, 99)
        c1, _ = arr.split(ref, MAX)
        restored = arr.merge_up(c1, MAX)
        assert arr.read_unsigned(restored) == 99


class TestFootprintAndSnapshot:
    def test_bit_footprint(self):
        arr = SlotArray(1024, 8)
        assert arr.bit_footprint() == 1024 * 8 + 1024

    def test_snapshot_golden_bytes(self):
        arr = SlotArray(8, 8)
        set_value(arr, 6, 200)
        set_value(arr, 7, 3)
        arr.merge_up(arr.locate(6), SUM)  # value 203 at <6,7>, m_6 set
        expected = (
            b"SLSA"
            + struct.pack("<BBQB", 1, 8, 8, 3)
            + bytes([0b01000000])  # merge bitmap: only bit 6
            + bytes([0, 0, 0, 0, 0, 0, 203, 0])  # slot payload
        )
        assert arr.to_bytes() == expected

    def test_round_trip(self):
        rng = np.random.default_rng(9)
        arr = SlotArray(64, 8)
        for _ in range(500):
            arr.add_unsigned(int(rng.integers(64)), int(rng.integers(0, 5000)), SUM)
        blob = arr.to_bytes()
        back = SlotArray.from_bytes(blob)
        assert back.to_bytes() == blob
        assert [rv for rv in back.counters()] == [rv for rv in arr.counters()]

    def test_bad_magic(self):
        with pytest.raises(ValueError):
            SlotArray.from_bytes(b"XXXX" + bytes(20))


class TestKernelReference:
    """Cross-check the jitted bit plumbing against plain-Python arithmetic."""

    def test_read_write_against_int_model(self):
        rng = np.random.default_rng(17)
        for s in (4, 8, 16):
            arr = SlotArray(16, s)
            model = 0  # whole row as one big little-endian integer
            for _ in range(200):
                lev = int(rng.integers(0, arr.max_level + 1))
                off = int(rng.integers(0, 16 >> lev)) << lev
                width = s << lev
                v = int(rng.integers(0, 1 << min(width, 62)))
                k.write_ctr(arr._s2, 0, s, off, lev, np.uint64(v))
                model &= ~(((1 << width) - 1) << (off * s))
                model |= v << (off * s)
                got = int(k.read_ctr(arr._s2, 0, s, off, lev))
                assert got == (model >> (off * s)) & ((1 << width) - 1) == v
            # final buffer matches the integer model byte for byte
            assert arr.slots.tobytes() == model.to_bytes(16 * s // 8, "little")

    def test_mix64_against_python(self):
        def mix_py(x):
            m = (1 << 64) - 1
            x = (x + 0x9E3779B97F4A7C15) & m
            x ^= x >> 30
            x = (x * 0xBF58476D1CE4E5B9) & m
            x ^= x >> 27
            x = (x * 0x94D049BB133111EB) & m
            x ^= x >> 31
            return x

        rng = np.random.default_rng(23)
        for x in rng.integers(0, 1 << 64, size=200, dtype=np.uint64):
            assert int(k.mix64(x)) == mix_py(int(x))
