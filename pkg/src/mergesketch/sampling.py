"""Sampled counters with budget-driven downsampling for L1 sketches.

Updates are sampled with probability p (an exact power of two). Counters hold
sampled counts and queries rescale by 1/p. A counter that overflows below the
sketch's current top merge level simply merges. When a top-level counter
overflows there are two ways to buy headroom, and each has a quantifiable
price in estimation error:

  downsample  halve p and every counter; the sampling error grows by
              sqrt(2) * eps_est, with eps_est = sqrt(2 ln(2/delta_est) / (p N))
  merge       coarsen to the next level; the collision error guarantee grows
              by eps_cms = delta^(-1/d) * 2^level / w (post-merge level)

The cheaper action is taken. A ForcedDownsample-style configuration instead
downsamples unconditionally on the first `forced_downsamples` overflow events,
bounding the sampling rate at 2^-d0 and so the hashing work per update.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels as k
from .errors import EmptyStream, NegativeWeight
from .sketch import Sketch, SketchConfig
from .slot_array import MergePolicy

_AEE_SEED_SALT = 0xA5E5_0F1E_57A7_E001


class AeeState:
    """Sampling probability, processed volume, and error-budget parameters."""

    __slots__ = ("delta", "delta_est", "d", "w", "downsample_mode",
                 "forced_downsamples", "_f", "_i")

    def __init__(self, d: int, w: int, delta: float = 0.001,
                 forced_downsamples: int = 0,
                 downsample_mode: str = "deterministic"):
        if delta <= 0 or delta >= 1:
            raise ValueError("delta must be in (0, 1)")
        if downsample_mode not in ("deterministic", "probabilistic"):
            raise ValueError(f"unknown downsampling mode {downsample_mode!r}")
        self.delta = delta
        self.delta_est = delta / d
        self.d = d
        self.w = w
        self.downsample_mode = downsample_mode
        self.forced_downsamples = forced_downsamples
        self._f = np.array([1.0])
        # [n_vol, overflow_events, forced_remaining, downsample_events, position]
        self._i = np.zeros(5, dtype=np.int64)
        self._i[2] = forced_downsamples

    @property
    def p(self) -> float:
        return float(self._f[0])

    @property
    def n_vol(self) -> int:
        return int(self._i[0])

    @property
    def overflow_events(self) -> int:
        return int(self._i[1])

    @property
    def forced_remaining(self) -> int:
        return int(self._i[2])

    @property
    def downsample_events(self) -> int:
        return int(self._i[3])


def epsilon_est(state: AeeState) -> float:
    """Additive sampling-error coefficient at the current p and volume."""
    if state.n_vol == 0:
        raise EmptyStream("no volume processed yet")
    return math.sqrt(2.0 * math.log(2.0 / state.delta_est)
                     / (state.p * state.n_vol))


def epsilon_cms(state: AeeState, level: int) -> float:
    """Collision-error coefficient of the sketch at the given merge level."""
    return state.delta ** (-1.0 / state.d) * (2.0 ** level) / state.w


class AeeSketch:
    """A merging-layout cms/cus sketch driven through sampled updates."""

    def __init__(self, config: SketchConfig, delta: float = 0.001,
                 forced_downsamples: int = 0,
                 downsample_mode: str = "deterministic",
                 split_counters: bool = False):
        if config.layout != "salsa" or config.kind not in ("cms", "cus"):
            raise ValueError("sampled updates support merging cms/cus sketches")
        self.sketch = Sketch(config)
        self.state = AeeState(config.d, config.w, delta, forced_downsamples,
                              downsample_mode)
        self.split_counters = split_counters
        self._aee_seed = np.uint64(k.mix64(np.uint64(config.seed ^ _AEE_SEED_SALT)))

    @property
    def config(self) -> SketchConfig:
        return self.sketch.config

    def level(self) -> int:
        return self.sketch.level()

    def update_many(self, items, values=None, record_estimates: bool = False):
        """Sampled in-order updates; estimates (if recorded) are rescaled by 1/p."""
        items, values = self.sketch._as_streams(items, values)
        if values.size and int(values.min()) < 0:
            raise NegativeWeight("sampled updates require v >= 0")
        sk = self.sketch
        c = sk.config
        for i in range(c.d):
            sk._rowlev[i] = k.row_max_level(sk._mbits, i, c.w, sk.max_level)
        ests = np.zeros(len(items), dtype=np.float64)
        k.drive_aee(sk._slots, sk._mbits, sk._rowlev, c.s, sk.max_level,
                    sk.hashes.shift, sk.hashes.row_seeds, int(c.policy),
                    c.kind == "cus", c.w, self.state.delta,
                    self.state.delta_est,
                    self.state.downsample_mode == "deterministic",
                    self.split_counters, self._aee_seed, self.state._f,
                    self.state._i, items, values, ests,
                    bool(record_estimates))
        return ests if record_estimates else None

    def update(self, x: int, v: int = 1) -> None:
        self.update_many(np.array([x], dtype=np.uint64),
                         np.array([v], dtype=np.int64))

    def query_many(self, items) -> np.ndarray:
        return self.sketch.query_many(items).astype(np.float64) / self.state.p

    def query(self, x: int) -> float:
        return self.sketch.query(x) / self.state.p

    def error_budget(self) -> float:
        """Additive bound N * (eps_est + eps_cms) at the current state."""
        return self.state.n_vol * (epsilon_est(self.state)
                                   + epsilon_cms(self.state, self.level()))

    def memory_bytes(self) -> int:
        return self.sketch.memory_bytes()
