# ======================================================================================
# Copyright (©) 2025 marssim developers.
# CeCILL-B FREE SOFTWARE LICENSE AGREEMENT
# See full LICENSE agreement in the root directory.
# ======================================================================================
"""
Baseline versus reorder-stage experiments.

For every seed the workload is generated and merged once; the same merged
stream then goes through each pipeline and the DRAM model. Results are written
under ``<output_dir>/<name>/``:

- ``record.json``: configuration, digests and per-seed metrics;
- ``metrics.csv``: ``workload,pipeline,seed,metric,window_size,value``;
- ``locality.csv``: ``workload,tap,seed,window_size,locality``;
- ``traces/<pipeline>_seed<k>.csv``: command traces;
- ``traces/requests_seed<k>.csv``: the merged request stream.

Files are first written to ``<name>.partial`` which replaces ``<name>`` only when
everything succeeded.
"""

__all__ = [
    "METRIC_NAMES",
    "SWEEP_PARAMETERS",
    "RunRecord",
    "apply_parameter",
    "run_experiment",
    "run_seed",
    "sweep",
    "sweep_frame",
]

import json
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from marssim.core.dram import simulate_pipeline
from marssim.core.dram import write_command_trace
from marssim.core.mars import run_reorder
from marssim.core.metrics import RunMetrics
from marssim.core.metrics import compare
from marssim.core.metrics import locality
from marssim.core.traffic import MergeTreeSpec
from marssim.core.traffic import generate_workload
from marssim.core.traffic import write_trace
from marssim.core.utils import ConfigError
from marssim.core.utils import debug_
from marssim.core.utils import info_

METRIC_NAMES = [
    "requests",
    "act_count",
    "cas_count",
    "pre_count",
    "read_count",
    "write_count",
    "total_cycles",
    "cas_per_act",
    "bandwidth_efficiency",
    "achieved_bandwidth",
    "achieved_gbps",
]
IMPROVEMENT_NAMES = [
    "bandwidth_delta_pct",
    "cas_per_act_delta_pct",
    "cas_per_act_ratio",
    "efficiency_delta_pct",
]
SWEEP_PARAMETERS = ("window_size", "leaves", "Q", "pending_queue_depth", "sets_ways")
_ALIASES = {"sets×ways": "sets_ways", "setsxways": "sets_ways", "capacity": "Q", "q": "Q"}

_CSV = {"index": False, "lineterminator": "\n", "float_format": "%.10g"}


# ======================================================================
# Record
# ======================================================================
@dataclass
class RunRecord:
    """
    Outcome of one experiment over all its seeds.

    ``metrics`` and ``stream_digests`` map a pipeline to one entry per seed;
    ``locality`` maps a tap point to ``{window_size: [value per seed]}``.
    """

    name: str
    workload: str
    config_digest: str
    config: dict
    seeds: list
    stream_digests: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    locality: dict = field(default_factory=dict)
    stalls: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0

    @property
    def pipelines(self):
        return list(self.metrics)

    def improvements(self):
        """One `ImprovementReport` per seed, or an empty list without both pipelines."""
        if not {"baseline", "mars"} <= set(self.metrics):
            return []
        return [compare(b, m) for b, m in zip(self.metrics["baseline"], self.metrics["mars"], strict=True)]

    def mean(self, pipeline, metric):
        return float(np.mean([getattr(m, metric) for m in self.metrics[pipeline]]))

    def with_windows(self, windows):
        """Copy keeping only the given locality window sizes."""
        windows = [int(w) for w in windows]
        loc = {tap: {w: v[w] for w in windows if w in v} for tap, v in self.locality.items()}
        cfg = dict(self.config, window_sizes=windows)
        return replace(self, locality=loc, config=cfg)

    # ----------------------------------------------------------------------------------
    # Tables
    # ----------------------------------------------------------------------------------
    def metrics_frame(self):
        rows = []
        for pipeline, per_seed in self.metrics.items():
            for seed, m in zip(self.seeds, per_seed, strict=True):
                rows.extend(
                    (self.workload, pipeline, seed, name, None, float(getattr(m, name)))
                    for name in METRIC_NAMES
                )
        for seed, rep in zip(self.seeds, self.improvements(), strict=False):
            rows.extend(
                (self.workload, "mars_vs_baseline", seed, name, None, float(getattr(rep, name)))
                for name in IMPROVEMENT_NAMES
            )
        for tap, per_window in self.locality.items():
            for w, values in sorted(per_window.items()):
                rows.extend(
                    (self.workload, tap, seed, "locality", w, v)
                    for seed, v in zip(self.seeds, values, strict=True)
                )
        df = pd.DataFrame(rows, columns=["workload", "pipeline", "seed", "metric", "window_size", "value"])
        df["window_size"] = df["window_size"].astype("Int64")
        return df

    def locality_frame(self):
        rows = [
            (self.workload, tap, seed, w, v)
            for tap, per_window in self.locality.items()
            for w, values in sorted(per_window.items())
            for seed, v in zip(self.seeds, values, strict=True)
        ]
        return pd.DataFrame(rows, columns=["workload", "tap", "seed", "window_size", "locality"])

    # ----------------------------------------------------------------------------------
    # JSON
    # ----------------------------------------------------------------------------------
    def to_dict(self):
        return {
            "name": self.name,
            "workload": self.workload,
            "config_digest": self.config_digest,
            "config": self.config,
            "seeds": list(self.seeds),
            "stream_digests": self.stream_digests,
            "metrics": {p: [m.to_dict() for m in ms] for p, ms in self.metrics.items()},
            "improvements": [r.to_dict() for r in self.improvements()],
            "locality": {t: {str(w): v for w, v in lv.items()} for t, lv in self.locality.items()},
            "stalls": self.stalls,
            "wall_clock_s": self.wall_clock_s,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            name=data["name"],
            workload=data["workload"],
            config_digest=data["config_digest"],
            config=data["config"],
            seeds=list(data["seeds"]),
            stream_digests=data.get("stream_digests", {}),
            metrics={p: [RunMetrics.from_dict(m) for m in ms] for p, ms in data["metrics"].items()},
            locality={t: {int(w): v for w, v in lv.items()} for t, lv in data.get("locality", {}).items()},
            stalls=data.get("stalls", {}),
            wall_clock_s=data.get("wall_clock_s", 0.0),
        )


# ======================================================================
# Runs
# ======================================================================
def _mean_locality(streams, window, page_offset_bits):
    means = [m for s in streams if (m := locality(s, window, page_offset_bits).mean) is not None]
    return float(np.mean(means)) if means else None


def run_seed(cfg, seed):
    """
    Generate, merge and simulate every pipeline for one seed.

    Returns
    -------
    dict
        ``seed``, ``stream_digest``, ``metrics``, ``commands``, ``stalls``,
        ``locality`` and the merged ``stream``.
    """
    specs, tree = cfg.workload_specs()
    sources, merged = generate_workload(
        specs, tree, seed, cfg.page_offset_bits, cfg.line_size, cfg.memory_map.addr_bits
    )
    digest = cfg.digest()
    out = {
        "seed": seed,
        "stream_digest": merged.digest(),
        "stream": merged,
        "metrics": {},
        "commands": {},
        "stalls": {},
        "locality": {},
    }
    reordered = None
    for pipeline in cfg.pipelines:
        commands, metrics, stage = simulate_pipeline(
            merged, pipeline, cfg.mars, cfg.dram, cfg.memory_map, config_digest=digest
        )
        out["metrics"][pipeline] = metrics
        out["commands"][pipeline] = commands
        out["stalls"][pipeline] = dict(stage.stalls)
        if pipeline == "mars":
            reordered = stage.output_stream()
        info_(
            f"{cfg.name} seed {seed} {pipeline}: CAS/ACT {metrics.cas_per_act:.2f}, "
            f"efficiency {metrics.bandwidth_efficiency:.3f}"
        )
        debug_(f"{cfg.name} seed {seed} {pipeline} stalls: {dict(stage.stalls)}")

    for tap in cfg.tap_points:
        if tap == "source":
            streams = sources
        elif tap == "merge":
            streams = [merged]
        else:
            streams = [reordered if reordered is not None else run_reorder(merged, cfg.mars)]
        out["locality"][tap] = {
            w: _mean_locality(streams, w, cfg.page_offset_bits) for w in cfg.window_sizes
        }
    return out


def _write_outputs(record, results, final):
    final = Path(final)
    partial = final.with_name(final.name + ".partial")
    if partial.exists():
        shutil.rmtree(partial)
    try:
        traces = partial / "traces"
        traces.mkdir(parents=True)
        record.metrics_frame().to_csv(partial / "metrics.csv", na_rep="", **_CSV)
        record.locality_frame().to_csv(partial / "locality.csv", **_CSV)
        for res in results:
            seed = res["seed"]
            write_trace(res["stream"], traces / f"requests_seed{seed}.csv")
            for pipeline, commands in res["commands"].items():
                write_command_trace(commands, traces / f"{pipeline}_seed{seed}.csv")
        (partial / "record.json").write_text(json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n")
        if final.exists():
            shutil.rmtree(final)
        partial.rename(final)
    except BaseException:
        shutil.rmtree(partial, ignore_errors=True)
        raise
    info_(f"results written to {final}")


def run_experiment(cfg, jobs=1, output_dir=None, write=True):
    """
    Run every seed of an experiment through both pipelines.

    Parameters
    ----------
    cfg : ExperimentConfig
        The experiment.
    jobs : int, optional
        Worker processes; seeds run in parallel when greater than 1. Results are
        ordered by seed either way.
    output_dir : str or Path, optional
        Overrides ``cfg.output_dir``.
    write : bool, optional
        Persist the result files.

    Returns
    -------
    RunRecord
    """
    start = time.perf_counter()
    digest = cfg.digest()
    info_(f"experiment {cfg.name} ({cfg.workload.name}, {len(cfg.seeds)} seed(s)), config {digest[:12]}")
    seeds = list(cfg.seeds)
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(seeds))) as ex:
            results = list(ex.map(run_seed, [cfg] * len(seeds), seeds))
    else:
        results = [run_seed(cfg, s) for s in seeds]

    record = RunRecord(
        name=cfg.name,
        workload=cfg.workload.name,
        config_digest=digest,
        config=cfg.to_dict(),
        seeds=seeds,
        stream_digests={p: [r["stream_digest"] for r in results] for p in cfg.pipelines},
        metrics={p: [r["metrics"][p] for r in results] for p in cfg.pipelines},
        locality={
            tap: {w: [r["locality"][tap][w] for r in results] for w in cfg.window_sizes}
            for tap in cfg.tap_points
        },
        stalls={p: [r["stalls"][p] for r in results] for p in cfg.pipelines},
    )
    record.wall_clock_s = round(time.perf_counter() - start, 3)
    if write:
        _write_outputs(record, results, cfg.output_path(output_dir))
    info_(f"experiment {cfg.name} done in {record.wall_clock_s:.1f} s")
    return record


# ======================================================================
# Sweeps
# ======================================================================
def _canonical_parameter(parameter):
    name = _ALIASES.get(parameter, parameter)
    if name not in SWEEP_PARAMETERS:
        raise ConfigError(f"Unknown sweep parameter {parameter!r}. Expected one of {list(SWEEP_PARAMETERS)}")
    return name


def _parse_sets_ways(value):
    if isinstance(value, list | tuple):
        sets, ways = value
        return int(sets), int(ways)
    text = str(value).lower().replace("×", "x")
    try:
        sets, ways = (int(v) for v in text.split("x"))
    except ValueError as e:
        raise ConfigError(f"sets_ways values look like '64x2', got {value!r}") from e
    return sets, ways


def apply_parameter(cfg, parameter, value):
    """Return a copy of ``cfg`` with one sweep parameter set."""
    name = _canonical_parameter(parameter)
    if name == "window_size":
        return cfg.replace(window_sizes=(int(value),))
    if name == "leaves":
        arbitration = cfg.merge_tree.arbitration if cfg.merge_tree else "round-robin"
        return cfg.replace(merge_tree=MergeTreeSpec.for_leaves(int(value), arbitration))
    if name == "Q":
        return cfg.replace(mars=replace(cfg.mars, capacity=int(value)))
    if name == "pending_queue_depth":
        return cfg.replace(dram=replace(cfg.dram, pending_queue_depth=int(value)))
    sets, ways = _parse_sets_ways(value)
    return cfg.replace(mars=replace(cfg.mars, sets=sets, ways=ways))


def sweep_frame(parameter, values, records):
    """Combined table: one row per (value, pipeline, metric, window_size) with mean/min/max over seeds."""
    frames = []
    for value, record in zip(values, records, strict=True):
        df = record.metrics_frame()
        df.insert(0, "point", str(value))
        frames.append(df)
    if not frames:
        return pd.DataFrame(columns=["parameter", "value", "pipeline", "metric", "window_size", "mean", "min", "max"])
    df = pd.concat(frames, ignore_index=True)
    out = (
        df.groupby(["point", "pipeline", "metric", "window_size"], sort=False, dropna=False)["value"]
        .agg(["mean", "min", "max"])
        .reset_index()
        .rename(columns={"point": "value"})
    )
    out.insert(0, "parameter", parameter)
    return out


def sweep(cfg, parameter, values, jobs=1, output_dir=None, write=True):
    """
    Run one experiment per parameter value.

    ``window_size`` only changes the analysis, so the experiment runs once and
    the record is sliced per window.

    Returns
    -------
    list of RunRecord
        One per value, in the given order.
    """
    name = _canonical_parameter(parameter)
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    if name == "window_size":
        windows = tuple(sorted({int(v) for v in values}))
        base = cfg.replace(name=f"{cfg.name}_window_size", window_sizes=windows)
        record = run_experiment(base, jobs=jobs, output_dir=output_dir, write=write)
        records = [record.with_windows([v]) for v in values]
    else:
        records = []
        for v in values:
            label = str(v).replace("×", "x")
            point = apply_parameter(cfg, name, v).replace(name=f"{cfg.name}_{name}_{label}")
            records.append(run_experiment(point, jobs=jobs, output_dir=output_dir, write=write))
    if write:
        path = cfg.output_path(output_dir).with_name(f"{cfg.name}_sweep_{name}.csv")
        path.parent.mkdir(parents=True, exist_ok=True)
        sweep_frame(name, values, records).to_csv(path, na_rep="", **_CSV)
        info_(f"sweep table written to {path}")
    return records
