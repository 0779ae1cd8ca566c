# ======================================================================================
# Copyright (©) 2025 marssim developers.
# CeCILL-B FREE SOFTWARE LICENSE AGREEMENT
# See full LICENSE agreement in the root directory.
# ======================================================================================
"""
Summary tables and chart data built from experiment records.

`report` writes, in the target directory:

- ``summary.csv`` and ``summary.txt``: one row per record;
- ``bandwidth_improvement.csv`` and ``cas_per_act_improvement.csv``: one bar per
  record (mean, min, max over seeds);
- ``locality_vs_window.csv``: one curve per record and tap point;
- optionally the matching ``.svg`` charts (needs matplotlib).
"""

__all__ = ["aggregate_improvement", "load_records", "report", "summary_frame"]

import json
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from marssim.core.metrics import REFERENCE_POINTS
from marssim.core.utils import MarsSimWarning
from marssim.core.utils import TraceError
from marssim.core.utils import info_
from marssim.harness.experiment import RunRecord

_CSV = {"index": False, "lineterminator": "\n", "float_format": "%.6g"}


def load_records(path):
    """
    Read every ``record.json`` below ``path`` (or in it), sorted by directory name.

    Raises
    ------
    TraceError
        If no record is found or a record is not valid JSON.
    """
    path = Path(path)
    files = [path / "record.json"] if (path / "record.json").exists() else sorted(path.glob("*/record.json"))
    if not files:
        raise TraceError(f"no record.json found in {path}")
    records = []
    for f in files:
        try:
            records.append(RunRecord.from_dict(json.loads(f.read_text())))
        except (json.JSONDecodeError, KeyError) as e:
            raise TraceError(f"{f}: unreadable record ({e})") from e
    return records


def _stats(values):
    values = [v for v in values if v is not None]
    if not values:
        return np.nan, np.nan, np.nan
    return float(np.mean(values)), float(np.min(values)), float(np.max(values))


def summary_frame(records):
    rows = []
    for r in records:
        row = {"name": r.name, "workload": r.workload, "seeds": len(r.seeds)}
        for p in ("baseline", "mars"):
            if p in r.metrics:
                row[f"{p}_cas_per_act"] = r.mean(p, "cas_per_act")
                row[f"{p}_efficiency"] = r.mean(p, "bandwidth_efficiency")
                row[f"{p}_gbps"] = r.mean(p, "achieved_gbps")
            else:
                row[f"{p}_cas_per_act"] = row[f"{p}_efficiency"] = row[f"{p}_gbps"] = np.nan
        reps = r.improvements()
        for key in ("cas_per_act_delta_pct", "bandwidth_delta_pct"):
            mean, lo, hi = _stats([getattr(x, key) for x in reps])
            row[key] = mean
            row[f"{key}_min"] = lo
            row[f"{key}_max"] = hi
        row["cas_per_act_ratio"] = _stats([x.cas_per_act_ratio for x in reps])[0]
        rows.append(row)
    return pd.DataFrame(rows)


def _improvement_frame(records, key):
    rows = []
    for r in records:
        mean, lo, hi = _stats([getattr(x, key) for x in r.improvements()])
        rows.append({"name": r.name, "workload": r.workload, "mean": mean, "min": lo, "max": hi})
    return pd.DataFrame(rows, columns=["name", "workload", "mean", "min", "max"])


def _locality_frame(records):
    rows = []
    for r in records:
        for tap, per_window in r.locality.items():
            for w, values in sorted(per_window.items()):
                mean, lo, hi = _stats(values)
                rows.append(
                    {"name": r.name, "workload": r.workload, "tap": tap, "window_size": w, "mean": mean, "min": lo, "max": hi}
                )
    return pd.DataFrame(rows, columns=["name", "workload", "tap", "window_size", "mean", "min", "max"])


def aggregate_improvement(records):
    """Mean CAS/ACT and bandwidth deltas (percent) over every record and seed."""
    reps = [x for r in records for x in r.improvements()]
    if not reps:
        return {"cas_per_act_delta_pct": None, "bandwidth_delta_pct": None}
    return {
        "cas_per_act_delta_pct": float(np.mean([x.cas_per_act_delta_pct for x in reps])),
        "bandwidth_delta_pct": float(np.mean([x.bandwidth_delta_pct for x in reps])),
    }


# ======================================================================
# Charts
# ======================================================================
def _render_svg(bandwidth, cas, loc, out_dir):
    try:
        import matplotlib as mpl
    except ImportError:
        warnings.warn("matplotlib is not installed, SVG charts skipped", MarsSimWarning, stacklevel=3)
        return []

    mpl.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    style = {"svg.hashsalt": "marssim", "svg.fonttype": "none", "font.size": 9}
    with plt.rc_context(style):
        for df, stem, label, ref in (
            (bandwidth, "bandwidth_improvement", "bandwidth improvement (%)", "bandwidth_improvement_pct"),
            (cas, "cas_per_act_improvement", "CAS/ACT improvement (%)", "cas_per_act_improvement_pct"),
        ):
            fig, ax = plt.subplots(figsize=(6, 3.5))
            err = np.vstack([df["mean"] - df["min"], df["max"] - df["mean"]])
            ax.bar(df["name"], df["mean"], yerr=err, capsize=3, color="0.45")
            ax.axhline(REFERENCE_POINTS[ref], ls="--", lw=0.8, color="k", label="published")
            ax.set_ylabel(label)
            ax.legend(frameon=False)
            fig.tight_layout()
            path = out_dir / f"{stem}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            written.append(path)

        fig, ax = plt.subplots(figsize=(6, 3.5))
        for (name, tap), g in loc.groupby(["name", "tap"], sort=True):
            ax.plot(g["window_size"], g["mean"], marker="o", ms=3, label=f"{name} {tap}")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("window size (requests)")
        ax.set_ylabel("requests per 4 KB page")
        ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
        path = out_dir / "locality_vs_window.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written


# ======================================================================
# Report
# ======================================================================
def report(records, out_dir, svg=False):
    """
    Write the summary bundle for a list of records.

    Parameters
    ----------
    records : list of RunRecord
        At least one record.
    out_dir : str or Path
        Target directory (created if needed).
    svg : bool, optional
        Also render SVG charts.

    Returns
    -------
    dict
        File stem mapped to the written path.
    """
    records = list(records)
    if not records:
        raise TraceError("report needs at least one record")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    summary = summary_frame(records)
    bandwidth = _improvement_frame(records, "bandwidth_delta_pct")
    cas = _improvement_frame(records, "cas_per_act_delta_pct")
    loc = _locality_frame(records)

    paths = {}
    for stem, df in (
        ("summary", summary),
        ("bandwidth_improvement", bandwidth),
        ("cas_per_act_improvement", cas),
        ("locality_vs_window", loc),
    ):
        paths[stem] = out_dir / f"{stem}.csv"
        df.to_csv(paths[stem], **_CSV)

    agg = aggregate_improvement(records)
    lines = [summary.to_string(index=False, float_format=lambda v: f"{v:.3f}"), ""]
    if agg["cas_per_act_delta_pct"] is not None:
        lines.append(
            f"aggregate: CAS/ACT {agg['cas_per_act_delta_pct']:+.1f} % "
            f"(published {REFERENCE_POINTS['cas_per_act_improvement_pct']:+.0f} %), "
            f"bandwidth {agg['bandwidth_delta_pct']:+.1f} % "
            f"(published {REFERENCE_POINTS['bandwidth_improvement_pct']:+.0f} %)"
        )
    paths["summary_txt"] = out_dir / "summary.txt"
    paths["summary_txt"].write_text("\n".join(lines) + "\n")

    if svg:
        for p in _render_svg(bandwidth, cas, loc, out_dir):
            paths[f"{p.stem}_svg"] = p
    info_(f"report written to {out_dir} ({len(records)} record(s))")
    return paths
