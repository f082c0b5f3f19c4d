"""Finding the heaviest items with a min-heap over on-arrival estimates."""

import numpy as np

from mergesketch import (
    ExactOracle,
    HeavyHitterTracker,
    Sketch,
    SketchConfig,
    ZipfSpec,
    generate_zipf,
    track_heavy_hitters,
)

K = 32
trace = generate_zipf(ZipfSpec(1.0, 50_000, 300_000, seed=11))
oracle = ExactOracle.from_stream(trace.items)
true_top = {x for x, _ in oracle.top_k(K)}

print(f"top-{K} recall, 4 rows, equal counter bits (merge bitmap on top):")
for layout, w in (("salsa", 4096), ("baseline", 1024)):
    sketch = Sketch(SketchConfig("cms", w, layout, d=4, seed=11))
    tracker = HeavyHitterTracker(K)
    report = track_heavy_hitters(tracker, sketch, trace)
    found = {x for x, _ in report[:K]}
    recall = len(found & true_top) / K
    print(f"  {layout:8s} ({sketch.memory_bytes():6,d} B): recall {recall:.2f}")

print("\nthreshold heavy hitters (phi = 0.5% of the stream volume):")
phi = 0.005
threshold = phi * oracle.volume
sketch = Sketch(SketchConfig("cms", 4096, "salsa", d=4, seed=11))
tracker = HeavyHitterTracker(int(1 / phi))
report = track_heavy_hitters(tracker, sketch, trace, threshold=threshold)
print(f"  {'item':>6} {'estimate':>9} {'truth':>7}")
for item, est in report[:10]:
    print(f"  {item:6d} {est:9.0f} {oracle.frequency(item):7d}")
