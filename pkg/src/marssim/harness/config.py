# ======================================================================================
# Copyright (©) 2025 marssim developers.
# CeCILL-B FREE SOFTWARE LICENSE AGREEMENT
# See full LICENSE agreement in the root directory.
# ======================================================================================
"""
Experiment configuration files.

An experiment is one TOML file::

    name = "wl1"
    seeds = [1, 2, 3]
    tap_points = ["source", "merge", "mars"]
    window_sizes = [128, 512, 2048, 8192, 16384]
    output_dir = "results"

    [workload]
    name = "WL1"
    scale = 1.0

    [merge_tree]
    leaves = 24
    fanouts = [3, 8]

    [mars]
    capacity = 512
    sets = 64
    ways = 2

    [dram]
    pending_queue_depth = 16

    [memory_map]
    preset = "default"

Every table is optional. ``[workload]`` takes either a preset ``name`` or an
explicit ``streams`` array of stream tables. Unknown keys are errors.
"""

__all__ = [
    "OUTPUT_ROOT_ENV",
    "PIPELINES",
    "TAP_POINTS",
    "ExperimentConfig",
    "WorkloadConfig",
    "load_config",
]

import hashlib
import json
import os
import sys
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from pathlib import Path

from marssim.core.addressing import DEFAULT_PAGE_OFFSET_BITS
from marssim.core.addressing import LINE_SIZE
from marssim.core.addressing import MemoryMap
from marssim.core.dram import DramConfig
from marssim.core.mars import MarsConfig
from marssim.core.traffic import MergeTreeSpec
from marssim.core.traffic import StreamSpec
from marssim.core.traffic import workload_preset
from marssim.core.utils import ConfigError

if sys.version_info >= (3, 11):  # noqa: UP036
    import tomllib
else:
    import tomli as tomllib

OUTPUT_ROOT_ENV = "MARSSIM_OUTPUT_ROOT"
TAP_POINTS = ("source", "merge", "mars")
PIPELINES = ("baseline", "mars")


@dataclass(frozen=True)
class WorkloadConfig:
    """A preset name and scale, or explicit stream specs."""

    name: str = "WL1"
    scale: float = 1.0
    streams: tuple = ()

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        unknown = sorted(set(data) - {"name", "scale", "streams"})
        if unknown:
            raise ConfigError(f"Unknown key(s) in [workload]: {unknown}")
        streams = data.pop("streams", ())
        if not isinstance(streams, list | tuple):
            raise ConfigError("[workload] streams must be an array of tables")
        specs = []
        for i, s in enumerate(streams):
            bad = sorted(set(s) - set(StreamSpec.__dataclass_fields__))
            if bad:
                raise ConfigError(f"Unknown key(s) in [[workload.streams]] #{i}: {bad}")
            specs.append(StreamSpec(**s))
        if specs and "name" not in data:
            data["name"] = "custom"
        return cls(streams=tuple(specs), **data)

    def to_dict(self):
        out = {"name": self.name, "scale": self.scale}
        if self.streams:
            out["streams"] = [vars(s).copy() for s in self.streams]
        return out

    def resolve(self):
        """Return ``(specs, tree)``; explicit streams use the ``gpu24`` tree."""
        if self.streams:
            if self.scale != 1.0:
                raise ConfigError("[workload] scale only applies to presets")
            return list(self.streams), MergeTreeSpec.preset("gpu24")
        return workload_preset(self.name, self.scale)


def _as_tuple(value, key, kind=int):
    if not isinstance(value, list | tuple):
        raise ConfigError(f"{key} must be an array")
    try:
        return tuple(kind(v) for v in value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{key} holds an invalid value ({e})") from e


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Everything needed to reproduce an experiment.

    ``merge_tree`` None means the workload preset's tree.
    """

    name: str = "experiment"
    seeds: tuple = (1, 2, 3)
    tap_points: tuple = TAP_POINTS
    window_sizes: tuple = (128, 512, 2048, 8192, 16384)
    output_dir: str = "results"
    page_offset_bits: int = DEFAULT_PAGE_OFFSET_BITS
    line_size: int = LINE_SIZE
    pipelines: tuple = PIPELINES
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    merge_tree: MergeTreeSpec | None = None
    mars: MarsConfig = field(default_factory=MarsConfig)
    dram: DramConfig = field(default_factory=DramConfig)
    memory_map: MemoryMap = field(default_factory=lambda: MemoryMap.preset("default"))

    def __post_init__(self):
        if not self.name or "/" in self.name or "\\" in self.name:
            raise ConfigError(f"name must be a non-empty plain file name, got {self.name!r}")
        if not self.seeds or any(s < 0 for s in self.seeds):
            raise ConfigError("seeds must be a non-empty array of non-negative integers")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"seeds must be distinct, got {list(self.seeds)}")
        bad = sorted(set(self.tap_points) - set(TAP_POINTS))
        if bad:
            raise ConfigError(f"tap_points must be among {list(TAP_POINTS)}, got {bad}")
        if set(self.pipelines) - set(PIPELINES) or len(set(self.pipelines)) != len(self.pipelines):
            raise ConfigError(f"pipelines must be distinct names among {list(PIPELINES)}, got {list(self.pipelines)}")
        if any(w < 1 for w in self.window_sizes):
            raise ConfigError("window_sizes must all be >= 1")
        if self.line_size < 1 or (1 << self.page_offset_bits) % self.line_size:
            raise ConfigError("line_size must divide the page size (2**page_offset_bits)")
        if self.mars.page_offset_bits != self.page_offset_bits:
            raise ConfigError(
                f"mars.page_offset_bits={self.mars.page_offset_bits} differs from "
                f"page_offset_bits={self.page_offset_bits}"
            )
        self.memory_map.check_dimensions(self.dram)

    # ----------------------------------------------------------------------------------
    # Construction
    # ----------------------------------------------------------------------------------
    @classmethod
    def from_dict(cls, data):
        """
        Build and validate a configuration from a parsed TOML document.

        Raises
        ------
        ConfigError
            Naming the unknown key or the invalid field.
        """
        data = dict(data)
        tables = {"workload", "merge_tree", "mars", "dram", "memory_map"}
        scalars = set(cls.__dataclass_fields__) - tables
        unknown = sorted(set(data) - scalars - tables)
        if unknown:
            raise ConfigError(f"Unknown top-level key(s): {unknown}")
        for t in tables & set(data):
            if not isinstance(data[t], dict):
                raise ConfigError(f"[{t}] must be a table")

        kwargs = {}
        for key in ("seeds", "window_sizes"):
            if key in data:
                kwargs[key] = _as_tuple(data[key], key)
        for key in ("tap_points", "pipelines"):
            if key in data:
                kwargs[key] = _as_tuple(data[key], key, str)
        for key in ("name", "output_dir"):
            if key in data:
                kwargs[key] = str(data[key])
        for key in ("page_offset_bits", "line_size"):
            if key in data:
                if not isinstance(data[key], int):
                    raise ConfigError(f"{key} must be an integer, got {data[key]!r}")
                kwargs[key] = data[key]

        pob = kwargs.get("page_offset_bits", DEFAULT_PAGE_OFFSET_BITS)
        mars = dict(data.get("mars", {}))
        mars.setdefault("page_offset_bits", pob)
        kwargs["mars"] = MarsConfig.from_dict(mars)
        kwargs["dram"] = DramConfig.from_dict(data.get("dram", {}))
        kwargs["memory_map"] = MemoryMap.from_dict(data.get("memory_map", {"preset": "default"}))
        kwargs["workload"] = WorkloadConfig.from_dict(data.get("workload", {}))
        if "merge_tree" in data:
            tree = dict(data["merge_tree"])
            bad = sorted(set(tree) - {"leaves", "fanouts", "arbitration", "preset"})
            if bad:
                raise ConfigError(f"Unknown key(s) in [merge_tree]: {bad}")
            if "preset" in tree:
                if len(tree) > 1:
                    raise ConfigError("[merge_tree] takes either 'preset' or leaves/fanouts, not both")
                kwargs["merge_tree"] = MergeTreeSpec.preset(tree["preset"])
            else:
                try:
                    kwargs["merge_tree"] = MergeTreeSpec(**tree)
                except TypeError as e:
                    raise ConfigError(f"[merge_tree]: {e}") from e
        try:
            cfg = cls(**kwargs)
        except TypeError as e:
            raise ConfigError(str(e)) from e
        cfg.workload_specs()
        return cfg

    def to_dict(self):
        out = {
            "name": self.name,
            "seeds": list(self.seeds),
            "tap_points": list(self.tap_points),
            "window_sizes": list(self.window_sizes),
            "output_dir": self.output_dir,
            "page_offset_bits": self.page_offset_bits,
            "line_size": self.line_size,
            "pipelines": list(self.pipelines),
            "workload": self.workload.to_dict(),
            "mars": self.mars.to_dict(),
            "dram": self.dram.to_dict(),
            "memory_map": self.memory_map.to_dict(),
        }
        if self.merge_tree is not None:
            out["merge_tree"] = {
                "leaves": self.merge_tree.leaves,
                "fanouts": list(self.merge_tree.fanouts),
                "arbitration": self.merge_tree.arbitration,
            }
        return out

    def digest(self):
        """SHA-256 of the canonical JSON form, ``output_dir`` excluded."""
        data = self.to_dict()
        data.pop("output_dir")
        text = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def replace(self, **changes):
        return replace(self, **changes)

    # ----------------------------------------------------------------------------------
    # Derived
    # ----------------------------------------------------------------------------------
    def workload_specs(self):
        """Return ``(specs, tree)`` with the ``[merge_tree]`` override applied."""
        specs, tree = self.workload.resolve()
        return specs, (self.merge_tree or tree)

    def output_path(self, output_dir=None):
        """
        Directory receiving this experiment's files.

        A relative output directory is resolved against ``$MARSSIM_OUTPUT_ROOT``
        when set, else against the working directory.
        """
        base = Path(output_dir if output_dir is not None else self.output_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not base.is_absolute():
            base = Path(root) / base
        return base / self.name


def load_config(path):
    """
    Read an experiment TOML file.

    Raises
    ------
    ConfigError
        If the file is missing, not valid TOML, or fails validation.
    """
    path = Path(path)
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: invalid TOML ({e})") from e
    data.setdefault("name", path.stem)
    return ExperimentConfig.from_dict(data)
