"""Benchmark harness: build sketches, run tasks over traces, emit metric tables.

Subcommands:
  generate  write a synthetic Zipf trace to a file
  run       evaluate sketch configurations over a trace; one table row per
            (sketch, budget, seed, task, metric), plus mean and 95% Student-t
            confidence-interval rows per group (seed column "all")
  sweep     run across several memory budgets to produce error-vs-memory curves

Row widths are derived from byte budgets: the largest power-of-two w whose
total footprint (counters plus one merge bit per counter for the merging
layout, plain counter width for baselines) fits. Output is a pure function of
the arguments; all randomness is seeded. Exit codes: 0 ok, 2 usage, 3 runtime.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from .errors import SketchError
from .metrics import ErrorSeries, aae, are, nrmse, on_arrival_run
from .oracle import ExactOracle
from .sampling import AeeSketch
from .sketch import Sketch, SketchConfig
from .slot_array import MergePolicy
from .tasks import HeavyHitterTracker, change_detection, count_distinct, \
    track_heavy_hitters
from .workload import Trace, ZipfSpec, generate_zipf, load_trace, split_halves, \
    write_trace

COLUMNS = ("sketch_kind", "layout", "policy", "s", "d", "w", "memory_bytes",
           "seed", "task", "metric", "value")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class TaskSpec:
    name: str
    param: float | None = None

    def __str__(self):
        if self.param is None:
            return self.name
        param = int(self.param) if self.name == "top_k" else self.param
        return f"{self.name}:{param}"


@dataclass
class RunSpec:
    kinds: list[str]
    layouts: list[str]
    policy: str
    s: int
    bits: int
    d: int | None
    budgets: list[int]
    seeds: list[int]
    tasks: list[TaskSpec]
    trace_path: str | None = None
    trace_format: str = "binary"
    zipf: ZipfSpec | None = None
    aee: bool = False
    delta: float = 0.001
    forced_downsamples: int = 0
    downsample_mode: str = "deterministic"
    out_format: str = "csv"
    out_path: str | None = None


def width_for_budget(budget: int, layout: str, d: int, s: int, bits: int) -> int:
    """Largest power-of-two w whose exact footprint fits the byte budget."""
    per_slot_bits = (s + 1) if layout == "salsa" else bits
    max_w = (budget * 8) // (d * per_slot_bits)
    if max_w < 2:
        raise UsageError(f"budget {budget} B cannot hold any row "
                         f"(layout={layout}, d={d})")
    return 1 << (max_w.bit_length() - 1)


def make_config(spec: RunSpec, kind: str, layout: str, w: int, seed: int) -> SketchConfig:
    policy = MergePolicy.SUM if spec.policy == "sum" else MergePolicy.MAX
    if kind == "cus":
        policy = MergePolicy.MAX
    if kind == "cs":
        policy = MergePolicy.SUM
    return SketchConfig(kind, w, layout, d=spec.d, s=spec.s, bits=spec.bits,
                        policy=policy, seed=seed)


def build_sketch(spec: RunSpec, cfg: SketchConfig):
    if spec.aee:
        return AeeSketch(cfg, delta=spec.delta,
                         forced_downsamples=spec.forced_downsamples,
                         downsample_mode=spec.downsample_mode)
    return Sketch(cfg)


def _memory_of(spec: RunSpec, cfg: SketchConfig) -> int:
    return Sketch(cfg).memory_bytes() if cfg.layout == "baseline" \
        else cfg.d * (cfg.w * cfg.s + cfg.w) // 8


def load_stream(spec: RunSpec, seed: int) -> Trace:
    if spec.trace_path is not None:
        return load_trace(spec.trace_path, spec.trace_format)
    z = spec.zipf
    return generate_zipf(ZipfSpec(z.skew, z.universe, z.length, seed=seed))


def run_tasks(spec: RunSpec, cfg: SketchConfig, trace: Trace, seed: int):
    """Metric values for every requested task on a fresh sketch per task."""
    values: list[tuple[str, str, float]] = []
    oracle = ExactOracle.from_stream(trace.items, trace.values)
    for task in spec.tasks:
        tname = str(task)
        if task.name == "on_arrival":
            sketch = build_sketch(spec, cfg)
            series = on_arrival_run(sketch, trace)
            values.append((tname, "nrmse", nrmse(series)))
            values.append((tname, "aae", aae(sketch, oracle)))
            values.append((tname, "are", are(sketch, oracle)))
        elif task.name == "top_k":
            k = int(task.param)
            sketch = build_sketch(spec, cfg)
            report = track_heavy_hitters(HeavyHitterTracker(k), sketch, trace)
            truth = {x for x, _ in oracle.top_k(k)}
            found = {x for x, _ in report[:k]}
            values.append((tname, "recall", len(found & truth) / k))
        elif task.name == "heavy_hitters":
            phi = float(task.param)
            thresh = phi * oracle.volume
            true_hh = [x for x, f in oracle.freq.items() if f >= thresh]
            capacity = max(1, math.ceil(1.0 / phi))
            sketch = build_sketch(spec, cfg)
            report = track_heavy_hitters(HeavyHitterTracker(capacity), sketch,
                                         trace, threshold=thresh)
            if true_hh:
                found = {x for x, _ in report}
                recall = len(found & set(true_hh)) / len(true_hh)
                hh = np.array(true_hh, dtype=np.uint64)
                truth = np.array([oracle.freq[int(x)] for x in hh], float)
                est = np.asarray(sketch.query_many(hh), dtype=float)
                rel = float(np.mean(np.abs(est - truth) / truth))
            else:
                recall, rel = 1.0, 0.0
            values.append((tname, "recall", recall))
            values.append((tname, "are", rel))
        elif task.name == "change_detection":
            half_a, half_b = split_halves(trace)
            series = change_detection(half_a, half_b, cfg)
            values.append((tname, "nrmse", nrmse(series)))
        elif task.name == "count_distinct":
            sketch = build_sketch(spec, cfg)
            sketch.update_many(trace.items, trace.values)
            ests = []
            for i in range(cfg.d):
                row = sketch.row(i) if cfg.layout == "salsa" \
                    else sketch.row_counters(i)
                try:
                    ests.append(count_distinct(row))
                except SketchError:
                    pass
            if not ests:
                print(f"warning: count_distinct failed on all rows "
                      f"(seed {seed}, w {cfg.w})", file=sys.stderr)
                continue
            truth = oracle.distinct_count
            values.append((tname, "relative_error",
                           abs(float(np.mean(ests)) - truth) / truth))
        else:
            raise UsageError(f"unknown task {task.name!r}")
    return values


def build_rows(spec: RunSpec) -> list[dict]:
    """Cross product of (kind, layout, budget, seed): the per-seed table."""
    rows = []
    for kind in spec.kinds:
        for layout in spec.layouts:
            for budget in spec.budgets:
                w = width_for_budget(budget, layout, spec.d or
                                     (5 if kind == "cs" else 4), spec.s,
                                     spec.bits)
                for seed in spec.seeds:
                    cfg = make_config(spec, kind, layout, w, seed)
                    trace = load_stream(spec, seed)
                    if len(trace) == 0:
                        print(f"warning: empty trace (seed {seed}); no metrics",
                              file=sys.stderr)
                        continue
                    for tname, metric, value in run_tasks(spec, cfg, trace, seed):
                        rows.append({
                            "sketch_kind": kind,
                            "layout": layout,
                            "policy": cfg.policy.name.lower(),
                            "s": cfg.s if layout == "salsa" else cfg.bits,
                            "d": cfg.d,
                            "w": cfg.w,
                            "memory_bytes": _memory_of(spec, cfg),
                            "seed": seed,
                            "task": tname,
                            "metric": metric,
                            "value": float(value),
                        })
    return rows


def aggregate_rows(rows: list[dict]) -> list[dict]:
    """Mean and 95% Student-t confidence half-width per group over seeds."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        key = tuple(r[c] for c in COLUMNS if c not in ("seed", "value"))
        groups.setdefault(key, []).append(r)
    out = []
    for key, members in groups.items():
        vals = np.array([m["value"] for m in members], dtype=float)
        base = {c: members[0][c] for c in COLUMNS if c not in ("seed", "value")}
        out.append({**base, "seed": "all",
                    "metric": base["metric"] + "_mean",
                    "value": float(vals.mean())})
        if len(vals) >= 2:
            half = float(scipy.stats.t.ppf(0.975, len(vals) - 1)
                         * vals.std(ddof=1) / math.sqrt(len(vals)))
            out.append({**base, "seed": "all",
                        "metric": base["metric"] + "_ci95", "value": half})
    return out


def _sort_key(row):
    seed = row["seed"]
    return (row["sketch_kind"], row["layout"], row["policy"], row["s"],
            row["d"], row["w"], row["memory_bytes"], row["task"],
            row["metric"], (1, 0) if seed == "all" else (0, int(seed)))


def render(rows: list[dict], fmt: str) -> str:
    rows = sorted(rows, key=_sort_key)
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    lines = [",".join(COLUMNS)]
    for r in rows:
        lines.append(",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c])
                              for c in COLUMNS))
    return "\n".join(lines) + "\n"


def emit(text: str, out_path: str | None) -> None:
    if out_path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out_path, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# argument parsing

def _parse_tasks(raw: list[str]) -> list[TaskSpec]:
    tasks = []
    for item in raw:
        name, _, param = item.partition(":")
        if name in ("on_arrival", "change_detection", "count_distinct"):
            if param:
                raise UsageError(f"task {name} takes no parameter")
            tasks.append(TaskSpec(name))
        elif name == "top_k":
            tasks.append(TaskSpec(name, float(param or 64)))
        elif name == "heavy_hitters":
            tasks.append(TaskSpec(name, float(param or 1e-3)))
        else:
            raise UsageError(f"unknown task {name!r}")
    return tasks


def _parse_seeds(raw: str) -> list[int]:
    if "," in raw:
        return [int(x) for x in raw.split(",") if x]
    n = int(raw)
    return list(range(n))


def _parse_budgets(raw: str) -> list[int]:
    budgets = [int(x) for x in raw.split(",") if x]
    deduped = list(dict.fromkeys(budgets))
    if len(deduped) != len(budgets):
        print("warning: duplicate memory budgets ignored", file=sys.stderr)
    return deduped


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sketchbench",
                                description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic Zipf trace")
    g.add_argument("--skew", type=float, required=True)
    g.add_argument("--universe", type=int, required=True)
    g.add_argument("--length", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--trace-format", choices=("binary", "csv"), default="binary")
    g.add_argument("--out", required=True)

    for name in ("run", "sweep"):
        r = sub.add_parser(name, help="evaluate sketches and emit a metric table")
        r.add_argument("--sketch", default="cms",
                       help="cms|cus|cs, comma separated for several")
        r.add_argument("--layout", default="salsa",
                       help="baseline|salsa, comma separated for several")
        r.add_argument("--policy", choices=("sum", "max"), default="sum")
        r.add_argument("--bits", type=int, default=32,
                       help="baseline counter width")
        r.add_argument("--s", type=int, default=8, dest="s",
                       help="base counter width for the merging layout")
        r.add_argument("--d", type=int, default=None)
        r.add_argument("--memory", required=True,
                       help="byte budget(s), comma separated")
        r.add_argument("--trace", default=None, help="trace file path")
        r.add_argument("--trace-format", choices=("binary", "csv"),
                       default="binary")
        r.add_argument("--zipf", default=None, help="SKEW,UNIVERSE,LENGTH")
        r.add_argument("--seeds", default="10", help="count or explicit list")
        r.add_argument("--task", action="append", default=None,
                       help="on_arrival | top_k[:K] | heavy_hitters[:PHI] | "
                            "change_detection | count_distinct (repeatable)")
        r.add_argument("--aee", action="store_true",
                       help="sampled counters with downsampling")
        r.add_argument("--delta", type=float, default=0.001)
        r.add_argument("--forced-downsamples", type=int, default=0)
        r.add_argument("--downsample-mode",
                       choices=("deterministic", "probabilistic"),
                       default="deterministic")
        r.add_argument("--format", choices=("csv", "json"), default="csv")
        r.add_argument("--out", default=None)
    return p


def _spec_from_args(args) -> RunSpec:
    kinds = [x for x in args.sketch.split(",") if x]
    layouts = [x for x in args.layout.split(",") if x]
    for kind in kinds:
        if kind not in ("cms", "cus", "cs"):
            raise UsageError(f"unknown sketch kind {kind!r}")
    for layout in layouts:
        if layout not in ("baseline", "salsa"):
            raise UsageError(f"unknown layout {layout!r}")
    budgets = _parse_budgets(args.memory)
    if not budgets:
        raise UsageError("at least one memory budget is required")
    if (args.trace is None) == (args.zipf is None):
        raise UsageError("exactly one of --trace or --zipf is required")
    zipf = None
    if args.zipf is not None:
        try:
            skew, universe, length = args.zipf.split(",")
            zipf = ZipfSpec(float(skew), int(universe), int(length))
        except ValueError as exc:
            raise UsageError(f"bad --zipf value: {exc}") from None
    tasks = _parse_tasks(args.task or ["on_arrival"])
    if args.aee:
        bad = {"change_detection", "count_distinct"} & {t.name for t in tasks}
        if bad:
            raise UsageError(f"--aee does not support tasks: {sorted(bad)}")
        if "cs" in kinds:
            raise UsageError("--aee applies to cms/cus only")
        if "baseline" in layouts:
            raise UsageError("--aee requires the salsa layout")
    return RunSpec(
        kinds=kinds, layouts=layouts, policy=args.policy, s=args.s,
        bits=args.bits, d=args.d, budgets=budgets,
        seeds=_parse_seeds(args.seeds), tasks=tasks, trace_path=args.trace,
        trace_format=args.trace_format, zipf=zipf, aee=args.aee,
        delta=args.delta, forced_downsamples=args.forced_downsamples,
        downsample_mode=args.downsample_mode, out_format=args.format,
        out_path=args.out)


def cmd_generate(args) -> int:
    trace = generate_zipf(ZipfSpec(args.skew, args.universe, args.length,
                                   seed=args.seed))
    write_trace(args.out, args.trace_format, trace)
    return 0


def cmd_run(args) -> int:
    spec = _spec_from_args(args)
    rows = build_rows(spec)
    rows += aggregate_rows(rows)
    emit(render(rows, spec.out_format), spec.out_path)
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "generate":
            return cmd_generate(args)
        return cmd_run(args)  # run and sweep share the table pipeline
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (OSError, SketchError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
