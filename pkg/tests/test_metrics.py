import math

import numpy as np
import pytest

from mergesketch import EmptyOracle, EmptySeries
from mergesketch.metrics import (
    ErrorSeries,
    aae,
    are,
    nrmse,
    on_arrival_run,
    running_truth,
)
from mergesketch.oracle import ExactOracle
from mergesketch.sketch import Sketch, SketchConfig

from test_sketches import zipf_items


class FixedSketch:
    """Query stub returning canned estimates."""

    def __init__(self, table):
        self.table = table

    def query_many(self, items):
        return np.array([self.table[int(x)] for x in items], dtype=np.int64)


class TestNrmse:
    def test_zero_errors(self):
        assert nrmse(ErrorSeries(np.zeros(10))) == 0.0

    def test_single_error(self):
        assert nrmse(ErrorSeries(np.array([5.0]))) == 5.0

    def test_two_errors(self):
        got = nrmse(ErrorSeries(np.array([3.0, 4.0])))
        assert got == pytest.approx(math.sqrt(12.5) / 2, rel=1e-12)

    def test_empty(self):
        with pytest.raises(EmptySeries):
            nrmse(ErrorSeries(np.array([])))


class TestAaeAre:
    def test_perfect(self):
        oracle = ExactOracle.from_stream(np.array([1, 1, 2], dtype=np.uint64))
        sk = FixedSketch({1: 2, 2: 1})
        assert aae(sk, oracle) == 0.0
        assert are(sk, oracle) == 0.0

    def test_worked_example(self):
        # truths {10, 4}, estimates {12, 8}: AAE 3, ARE (0.2 + 1.0)/2
        oracle = ExactOracle()
        for _ in range(10):
            oracle.add(1)
        for _ in range(4):
            oracle.add(2)
        sk = FixedSketch({1: 12, 2: 8})
        assert aae(sk, oracle) == pytest.approx(3.0)
        assert are(sk, oracle) == pytest.approx(0.6)

    def test_relabeling_invariance(self):
        for shift in (0, 1000):
            oracle = ExactOracle()
            est = {}
            for x, f, e in ((3, 10, 12), (4, 4, 8)):
                for _ in range(f):
                    oracle.add(x + shift)
                est[x + shift] = e
            assert aae(FixedSketch(est), oracle) == pytest.approx(3.0)

    def test_empty_oracle(self):
        with pytest.raises(EmptyOracle):
            aae(FixedSketch({}), ExactOracle())

    def test_only_positive_items_count(self):
        oracle = ExactOracle()
        oracle.add(1, 5)
        oracle.add(2, 3)
        oracle.add(2, -3)  # net zero: excluded
        assert aae(FixedSketch({1: 5, 2: 99}), oracle) == 0.0


class TestOracle:
    def test_exact_recount(self):
        items = zipf_items(20_000, 500, seed=81)
        oracle = ExactOracle.from_stream(items)
        uniq, cnt = np.unique(items, return_counts=True)
        assert oracle.volume == 20_000
        for x, c in zip(uniq, cnt):
            assert oracle.frequency(int(x)) == c

    def test_incremental_matches_bulk(self):
        items = zipf_items(2_000, 100, seed=82)
        bulk = ExactOracle.from_stream(items)
        inc = ExactOracle()
        for x in items:
            inc.add(int(x))
        assert inc.freq == bulk.freq and inc.volume == bulk.volume

    def test_moments(self):
        items = zipf_items(30_000, 800, seed=83)
        oracle = ExactOracle.from_stream(items)
        assert oracle.moment(1) == oracle.volume  # F_1 == N for unit weights
        assert oracle.moment(0) == oracle.distinct_count
        _, cnt = np.unique(items, return_counts=True)
        assert oracle.moment(2) == pytest.approx(float((cnt.astype(float) ** 2).sum()))

    def test_top_k_tie_break(self):
        oracle = ExactOracle()
        for x in (5, 3, 9):
            oracle.add(x, 7)
        assert oracle.top_k(2) == [(3, 7), (5, 7)]


class TestOnArrival:
    def test_running_truth(self):
        items = np.array([4, 4, 7, 4, 7], dtype=np.uint64)
        assert running_truth(items).tolist() == [1, 2, 1, 3, 2]

    def test_single_item_exact_sketch(self):
        s = Sketch(SketchConfig("cms", 64, seed=1))
        series = on_arrival_run(s, np.full(500, 3, dtype=np.uint64))
        assert (series.errors == 0).all()

    def test_query_after_update_convention(self):
        s = Sketch(SketchConfig("cms", 64, seed=1))
        series = on_arrival_run(s, np.array([9], dtype=np.uint64))
        # truth including the current update is 1 and the estimate is 1
        assert series.errors[0] == 0

    def test_salsa_cms_overestimates_on_arrival(self):
        items = zipf_items(100_000, 2000, seed=84)
        s = Sketch(SketchConfig("cms", 128, seed=84))
        ests = s.update_many(items, record_estimates=True)
        truth = running_truth(items)
        assert (ests.astype(np.int64) >= truth).all()

    def test_nrmse_dominance_vs_underlying(self):
        # per-item dominance makes every on-arrival error no worse
        items = zipf_items(100_000, 2000, seed=85)
        probe = Sketch(SketchConfig("cms", 128, seed=85))
        probe.update_many(items)
        lev = probe.level()
        assert lev >= 1
        s = Sketch(SketchConfig("cms", 128, seed=85))
        under = s.underlying(lev)
        e_s = on_arrival_run(s, items)
        e_u = on_arrival_run(under, items)
        assert (e_s.errors <= e_u.errors).all()
        assert nrmse(e_s) <= nrmse(e_u)

    def test_unit_stream_nrmse_in_unit_interval(self):
        items = zipf_items(50_000, 1000, seed=86)
        s = Sketch(SketchConfig("cms", 64, seed=86))
        v = nrmse(on_arrival_run(s, items))
        assert 0.0 <= v <= 1.0
