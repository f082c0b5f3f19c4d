"""The sampled-counter hybrid: merge or downsample, whichever is cheaper.

With very little memory, growing a top-level counter costs collision accuracy
(eps_cms doubles per merge level) while halving the sampling probability costs
sampling accuracy (sqrt(2) * eps_est). Each top-level overflow takes the
cheaper action, so plenty of memory degenerates to pure merging and tiny
memory behaves like a pure sampling estimator.
"""

import numpy as np

from mergesketch import (
    AeeSketch,
    Sketch,
    SketchConfig,
    ZipfSpec,
    epsilon_cms,
    epsilon_est,
    generate_zipf,
)

trace = generate_zipf(ZipfSpec(1.0, 100_000, 1_000_000, seed=31))
uniq, cnt = np.unique(trace.items, return_counts=True)
top = np.argsort(-cnt)[:5]

for w, label in ((2**14, "plenty of memory"), (2**6, "tiny memory")):
    cfg = SketchConfig("cms", w, "salsa", d=4, s=8, seed=31)
    hybrid = AeeSketch(cfg, delta=0.001)
    hybrid.update_many(trace.items)
    st = hybrid.state
    print(f"{label}: w = {w}")
    print(f"  sampling probability {st.p:g}   downsample events "
          f"{st.downsample_events}   widest level {hybrid.level()}")
    print(f"  eps_est {epsilon_est(st):.4f}   eps_cms "
          f"{epsilon_cms(st, hybrid.level()):.4f}   error budget "
          f"{hybrid.error_budget():,.0f}")
    print(f"  {'item':>6} {'estimate':>10} {'truth':>8}")
    for r in top:
        x = int(uniq[r])
        print(f"  {x:6d} {hybrid.query(x):10.0f} {cnt[r]:8d}")
    if st.downsample_events == 0:
        plain = Sketch(cfg)
        plain.update_many(trace.items)
        print("  never downsampled -> state is bit-identical to the plain "
              "merging sketch:", hybrid.sketch.to_bytes() == plain.to_bytes())
    print()

# a speed-oriented setup forces the first few overflows to downsample,
# capping the sampling rate (and so the hashing work) early
forced = AeeSketch(SketchConfig("cms", 2**10, "salsa", d=4, s=8, seed=31),
                   forced_downsamples=3)
forced.update_many(trace.items)
print(f"forced first-3 downsamples: p = {forced.state.p:g} after "
      f"{forced.state.overflow_events} overflow events")
