"""Streaming frequency sketches built on dynamically resizing counters.

Counters start small (s bits) and merge with their aligned neighbors when they
overflow, so a byte budget buys more counters without capping the counting
range. The package provides the bit-packed counter rows (SlotArray), their
integration into Count-Min / Conservative-Update / Count Sketch, sketch
algebra (merge and subtract), a sampled-counter hybrid, evaluation metrics and
stream tasks, synthetic workloads, and a benchmark CLI (sketchbench).
"""

from .errors import (
    AllSlotsOccupied,
    ConfigMismatch,
    EmptyOracle,
    EmptySeries,
    EmptyStream,
    LevelTooSmall,
    MaxLevelReached,
    NegativeResult,
    NegativeWeight,
    ParseError,
    SketchError,
    SplitNotMaxMerge,
    SplitUnrepresentable,
    ValueTooWide,
)
from .combine import CombineKind, combine_sketches, merge_sketches, subtract_sketches
from .hashing import HashFamily
from .metrics import ErrorSeries, aae, are, nrmse, on_arrival_run, running_truth
from .oracle import ExactOracle
from .sampling import AeeSketch, AeeState, epsilon_cms, epsilon_est
from .sketch import Sketch, SketchConfig, coarsen
from .slot_array import CounterRef, MergePolicy, SlotArray, merge_bit_index
from .tasks import (
    HeavyHitterTracker,
    change_detection,
    count_distinct,
    track_heavy_hitters,
    zero_slot_estimate,
)
from .workload import (
    Trace,
    TraceRecord,
    ZipfSpec,
    generate_zipf,
    load_trace,
    read_trace,
    split_halves,
    write_trace,
)

__all__ = [
    "AeeSketch",
    "AeeState",
    "AllSlotsOccupied",
    "CombineKind",
    "ConfigMismatch",
    "CounterRef",
    "EmptyOracle",
    "EmptySeries",
    "EmptyStream",
    "ErrorSeries",
    "ExactOracle",
    "HashFamily",
    "HeavyHitterTracker",
    "LevelTooSmall",
    "MaxLevelReached",
    "MergePolicy",
    "NegativeResult",
    "NegativeWeight",
    "ParseError",
    "Sketch",
    "SketchConfig",
    "SketchError",
    "SlotArray",
    "SplitNotMaxMerge",
    "SplitUnrepresentable",
    "Trace",
    "TraceRecord",
    "ValueTooWide",
    "ZipfSpec",
    "aae",
    "are",
    "change_detection",
    "coarsen",
    "combine_sketches",
    "count_distinct",
    "epsilon_cms",
    "epsilon_est",
    "generate_zipf",
    "load_trace",
    "merge_bit_index",
    "merge_sketches",
    "nrmse",
    "on_arrival_run",
    "read_trace",
    "running_truth",
    "split_halves",
    "subtract_sketches",
    "track_heavy_hitters",
    "write_trace",
    "zero_slot_estimate",
]
