"""The dominance guarantees, observed exactly on real streams.

For a merging count-min row whose widest counter reached level L, the
"underlying" sketch is the vanilla one with width w/2^L and (s * 2^L)-bit
counters under the same seed (its hashes are floor(h / 2^L)). For every item:

    true frequency <= merging estimate <= underlying estimate

and max-merge estimates never exceed sum-merge estimates on the same stream.
Conservative-update rows satisfy the same chain counter by counter.
"""

import numpy as np

from mergesketch import (
    MergePolicy,
    Sketch,
    SketchConfig,
    ZipfSpec,
    coarsen,
    generate_zipf,
)

trace = generate_zipf(ZipfSpec(1.0, 50_000, 400_000, seed=3))
uniq, truth = np.unique(trace.items, return_counts=True)

sum_sketch = Sketch(SketchConfig("cms", 1024, "salsa", policy=MergePolicy.SUM, seed=3))
max_sketch = Sketch(SketchConfig("cms", 1024, "salsa", policy=MergePolicy.MAX, seed=3))
cus_sketch = Sketch(SketchConfig("cus", 1024, "salsa", seed=3))
for s in (sum_sketch, max_sketch, cus_sketch):
    s.update_many(trace.items)

level = sum_sketch.level()
under = sum_sketch.underlying(level)
under.update_many(trace.items)

e_sum = sum_sketch.query_many(uniq).astype(np.int64)
e_max = max_sketch.query_many(uniq).astype(np.int64)
e_cus = cus_sketch.query_many(uniq).astype(np.int64)
e_und = under.query_many(uniq).astype(np.int64)

print(f"{len(uniq):,} distinct items, widest counter level {level}")
print("truth <= sum-merge estimate:      ", bool((truth <= e_sum).all()))
print("sum-merge <= underlying estimate: ", bool((e_sum <= e_und).all()))
print("max-merge <= sum-merge:           ", bool((e_max <= e_sum).all()))
print("truth <= conservative estimate:   ", bool((truth <= e_cus).all()))
print()
print("mean overestimate per item:")
for name, est in (("underlying", e_und), ("sum-merge", e_sum),
                  ("max-merge", e_max), ("conservative", e_cus)):
    print(f"  {name:12s} {float(np.mean(est - truth)):8.2f}")

# coarsening a sum-merge sketch reproduces the underlying sketch exactly
co = coarsen(sum_sketch, level)
print("\ncoarsen(sketch, L) queries == underlying sketch queries:",
      bool((co.query_many(uniq) == e_und.astype(np.uint64)).all()))

# and sum merging conserves mass: every row still totals the stream length
print("row totals equal stream length:",
      all(sum_sketch.row(i).total() == len(trace) for i in range(4)))
