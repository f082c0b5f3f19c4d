import numpy as np
import pytest

from mergesketch import ConfigMismatch, MergePolicy, NegativeResult
from mergesketch.combine import (
    CombineKind,
    combine_sketches,
    merge_sketches,
    subtract_sketches,
)
from mergesketch.sketch import Sketch, SketchConfig

from test_sketches import find_colliding_pair, zipf_items


def build(kind, items, seed=50, w=256, **kw):
    s = Sketch(SketchConfig(kind, w, seed=seed, **kw))
    if len(items):
        s.update_many(np.asarray(items, dtype=np.uint64))
    return s


class TestMerge:
    def test_identity(self):
        items = zipf_items(50_000, 1000, seed=41)
        s = build("cms", items)
        empty = build("cms", [])
        merged = merge_sketches(s, empty)
        assert merged.to_bytes() == s.to_bytes()

    def test_disjoint_streams_match_concatenation(self):
        a_items = np.arange(1, 400, dtype=np.uint64)
        b_items = np.arange(1000, 1300, dtype=np.uint64)
        sa = build("cms", a_items, w=4096)
        sb = build("cms", b_items, w=4096)
        both = build("cms", np.concatenate([a_items, b_items]), w=4096)
        merged = merge_sketches(sa, sb)
        uniq = np.concatenate([a_items, b_items])
        assert (merged.query_many(uniq) == both.query_many(uniq)).all()

    def test_row_sums_add(self):
        a_items = zipf_items(60_000, 1500, seed=42)
        b_items = zipf_items(40_000, 1500, seed=43)
        sa = build("cms", a_items)
        sb = build("cms", b_items)
        merged = merge_sketches(sa, sb)
        for i in range(4):
            assert merged.row(i).total() == len(a_items) + len(b_items)

    def test_layout_dominates_inputs(self):
        a_items = zipf_items(80_000, 1500, seed=44)
        b_items = zipf_items(80_000, 1500, seed=45)
        sa = build("cms", a_items)
        sb = build("cms", b_items)
        merged = merge_sketches(sa, sb)
        for i in range(4):
            rows = (sa.row(i), sb.row(i), merged.row(i))
            for j in range(256):
                la, lb, lm = (r.locate(j).level for r in rows)
                assert lm >= max(la, lb)

    def test_commutative(self):
        a_items = zipf_items(70_000, 1500, seed=46)
        b_items = zipf_items(50_000, 1500, seed=47)
        for kind in ("cms", "cs"):
            sa = build(kind, a_items)
            sb = build(kind, b_items)
            ab = merge_sketches(sa, sb)
            ba = merge_sketches(sb, sa)
            assert ab.to_bytes() == ba.to_bytes()

    def test_merge_dominance_over_union(self):
        a_items = zipf_items(60_000, 1500, seed=48)
        b_items = zipf_items(60_000, 1500, seed=49)
        merged = merge_sketches(build("cms", a_items), build("cms", b_items))
        allitems = np.concatenate([a_items, b_items])
        uniq, cnt = np.unique(allitems, return_counts=True)
        assert (merged.query_many(uniq).astype(np.int64) >= cnt).all()

    def test_inputs_unchanged(self):
        a_items = zipf_items(30_000, 500, seed=51)
        sa = build("cms", a_items)
        sb = build("cms", a_items)
        before_a, before_b = sa.to_bytes(), sb.to_bytes()
        merge_sketches(sa, sb)
        assert sa.to_bytes() == before_a and sb.to_bytes() == before_b

    def test_config_mismatch(self):
        with pytest.raises(ConfigMismatch):
            merge_sketches(build("cms", [], seed=1), build("cms", [], seed=2))

    def test_baseline_merge(self):
        a_items = zipf_items(20_000, 500, seed=52)
        b_items = zipf_items(20_000, 500, seed=53)
        sa = build("cms", a_items, layout="baseline")
        sb = build("cms", b_items, layout="baseline")
        merged = merge_sketches(sa, sb)
        assert (merged._counters == sa._counters + sb._counters).all()


class TestSubtract:
    def test_self_subtraction_is_zero(self):
        for kind in ("cms", "cs"):
            items = zipf_items(60_000, 1500, seed=54)
            s = build(kind, items)
            diff = subtract_sketches(s, s)
            for i in range(diff.config.d):
                assert diff.row(i).total() == 0

    def test_cs_exact_difference(self):
        # lone items, no collisions: signed difference is exact
        s_a = build("cs", np.full(10, 3, dtype=np.uint64), w=1024)
        s_b = build("cs", np.full(3, 3, dtype=np.uint64), w=1024)
        diff = subtract_sketches(s_a, s_b)
        assert diff.query(3) == 7

    def test_cs_counter_level_consistency(self):
        a_items = zipf_items(80_000, 1500, seed=55)
        b_items = zipf_items(70_000, 1500, seed=56)
        sa = build("cs", a_items)
        sb = build("cs", b_items)
        diff = subtract_sketches(sa, sb)
        # per-row signed content equals signed load difference on every block
        ua, ca = np.unique(a_items, return_counts=True)
        ub, cb = np.unique(b_items, return_counts=True)
        for i in range(diff.config.d):
            loads = np.zeros(256, dtype=np.int64)
            for xs, cs, sign in ((ua, ca, 1), (ub, cb, -1)):
                for x, c in zip(xs, cs):
                    g = diff.hashes.sign(i, int(x))
                    loads[diff.hashes.index(i, int(x))] += sign * g * int(c)
            row = diff.row(i)
            for ref, val in row.counters():
                span = loads[ref.offset:ref.offset + (1 << ref.level)]
                assert val == int(span.sum())

    def test_cms_subtract_requires_containment(self):
        a_items = np.array([1, 1, 2, 3], dtype=np.uint64)
        b_items = np.array([1, 9], dtype=np.uint64)  # 9 not in A
        sa = build("cms", a_items, w=4096)
        sb = build("cms", b_items, w=4096)
        with pytest.raises(NegativeResult):
            subtract_sketches(sa, sb)

    def test_cms_contained_subtract(self):
        a_items = np.repeat(np.arange(1, 50, dtype=np.uint64), 5)
        b_items = np.repeat(np.arange(1, 50, dtype=np.uint64), 2)
        sa = build("cms", a_items, w=4096)
        sb = build("cms", b_items, w=4096)
        diff = subtract_sketches(sa, sb)
        assert (diff.query_many(np.arange(1, 50, dtype=np.uint64)) == 3).all()

    def test_baseline_cs_subtract(self):
        a_items = zipf_items(20_000, 500, seed=57)
        b_items = zipf_items(20_000, 500, seed=58)
        sa = build("cs", a_items, layout="baseline")
        sb = build("cs", b_items, layout="baseline")
        diff = subtract_sketches(sa, sb)
        assert (diff._counters == sa._counters - sb._counters).all()

    def test_combine_kind_round_trip(self):
        items = zipf_items(10_000, 500, seed=59)
        s = build("cms", items)
        empty = build("cms", [])
        assert combine_sketches(s, empty, CombineKind.MERGE).to_bytes() == s.to_bytes()
        assert combine_sketches(s, empty, CombineKind.SUBTRACT).to_bytes() == s.to_bytes()
        with pytest.raises(ValueError):
            subtract_sketches(s, empty, CombineKind.MERGE)
