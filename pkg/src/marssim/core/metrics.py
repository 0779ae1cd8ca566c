# ======================================================================================
# Copyright (©) 2025 marssim developers.
# CeCILL-B FREE SOFTWARE LICENSE AGREEMENT
# See full LICENSE agreement in the root directory.
# ======================================================================================
"""
Page locality, CAS/ACT and bandwidth metrics, and baseline vs reorder comparison.

Locality is the average number of requests per distinct 4 KB page over
consecutive, non-overlapping windows of a request stream. A trailing partial
window counts with its own length.

>>> series = locality([1, 1, 2, 2, 3, 3, 3], window_size=4)
>>> series.values.tolist()
[2.0, 3.0]
>>> round(series.mean, 4)
2.4286
"""

__all__ = [
    "REFERENCE_POINTS",
    "ImprovementReport",
    "LocalitySeries",
    "RunMetrics",
    "best_grouping_locality",
    "cas_per_act_from_trace",
    "compare",
    "group_by_page",
    "locality",
    "mean_run_length",
]

from collections import Counter
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field

import numpy as np
import pandas as pd

from marssim.core.addressing import DEFAULT_PAGE_OFFSET_BITS
from marssim.core.traffic import RequestStream
from marssim.core.utils import ConfigError
from marssim.core.utils import ConfigMismatchError

# Published improvements, attached to every report for orientation only.
REFERENCE_POINTS = {
    "bandwidth_improvement_pct": 11.0,
    "cas_per_act_improvement_pct": 69.0,
    "wl1_wl5_cas_per_act_ratio": 2.0,
}


def _pages(stream, page_offset_bits=DEFAULT_PAGE_OFFSET_BITS):
    if isinstance(stream, RequestStream):
        return stream.pages(page_offset_bits)
    return np.asarray(stream, dtype=np.int64)


# ======================================================================
# Locality
# ======================================================================
@dataclass(frozen=True, eq=False)
class LocalitySeries:
    """
    Per-window locality values.

    Attributes
    ----------
    window_size : int
        Requested window length.
    values : numpy.ndarray
        Window length divided by distinct pages, one value per window.
    lengths : numpy.ndarray
        Number of requests in each window (only the last may be shorter).
    """

    window_size: int
    values: np.ndarray
    lengths: np.ndarray

    def __len__(self):
        return len(self.values)

    @property
    def mean(self):
        """Request-weighted mean, None for an empty stream."""
        if not len(self.values):
            return None
        return float(np.dot(self.values, self.lengths) / self.lengths.sum())


def locality(stream, window_size, page_offset_bits=DEFAULT_PAGE_OFFSET_BITS):
    """
    Compute tumbling-window page locality.

    Parameters
    ----------
    stream : RequestStream or array_like
        Requests, or page ids directly.
    window_size : int
        Requests per window (>= 1).
    page_offset_bits : int, optional
        Page size when ``stream`` is a `RequestStream`.

    Returns
    -------
    LocalitySeries
    """
    if window_size < 1:
        raise ConfigError(f"window_size must be >= 1, got {window_size}")
    pages = _pages(stream, page_offset_bits)
    n = len(pages)
    full = n // window_size
    values = []
    lengths = []
    if full:
        block = np.sort(pages[: full * window_size].reshape(full, window_size), axis=1)
        distinct = 1 + np.count_nonzero(np.diff(block, axis=1), axis=1)
        values.append(window_size / distinct)
        lengths.append(np.full(full, window_size))
    tail = pages[full * window_size :]
    if len(tail):
        values.append(np.array([len(tail) / len(np.unique(tail))]))
        lengths.append(np.array([len(tail)]))
    if not values:
        return LocalitySeries(window_size, np.empty(0), np.empty(0, dtype=np.int64))
    return LocalitySeries(
        window_size, np.concatenate(values).astype(float), np.concatenate(lengths).astype(np.int64)
    )


def mean_run_length(stream, page_offset_bits=DEFAULT_PAGE_OFFSET_BITS):
    """
    Mean length of maximal runs of consecutive same-page requests.

    >>> mean_run_length([5, 5, 5, 7, 5])
    1.6666666666666667
    """
    pages = _pages(stream, page_offset_bits)
    if not len(pages):
        return 0.0
    runs = 1 + np.count_nonzero(np.diff(pages))
    return len(pages) / runs


def group_by_page(stream, page_offset_bits=DEFAULT_PAGE_OFFSET_BITS):
    """
    Stable grouping by page, pages ordered by first arrival.

    This is the order an unbounded reorder buffer would forward.

    Parameters
    ----------
    stream : RequestStream or array_like
        Requests or page ids.

    Returns
    -------
    RequestStream or numpy.ndarray
        Same type as the input (requests keep their seq).

    Examples
    --------
    >>> group_by_page([3, 1, 3, 2, 1]).tolist()
    [3, 3, 1, 1, 2]
    """
    pages = _pages(stream, page_offset_bits)
    if not len(pages):
        return stream if isinstance(stream, RequestStream) else pages
    _, first, inverse = np.unique(pages, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first)] = np.arange(len(first))
    order = np.argsort(rank[inverse.ravel()], kind="stable")
    if isinstance(stream, RequestStream):
        return stream.take(order)
    return pages[order]


def _distinct_permutations(counts, prefix, n):
    if len(prefix) == n:
        yield tuple(prefix)
        return
    for page in list(counts):
        if counts[page]:
            counts[page] -= 1
            prefix.append(page)
            yield from _distinct_permutations(counts, prefix, n)
            prefix.pop()
            counts[page] += 1


def best_grouping_locality(pages, window_size, max_requests=10):
    """
    Highest mean locality over every reordering of a tiny stream.

    Parameters
    ----------
    pages : array_like
        Page ids.
    window_size : int
        Window length.
    max_requests : int, optional
        Refuse longer inputs (the search is exponential).

    Returns
    -------
    tuple
        ``(best mean, one ordering reaching it)``.

    Examples
    --------
    >>> best_grouping_locality([1, 2, 2, 3], 2)
    (1.5, (1, 3, 2, 2))
    """
    pages = [int(p) for p in pages]
    if len(pages) > max_requests:
        raise ConfigError(f"best_grouping_locality is limited to {max_requests} requests, got {len(pages)}")
    if not pages:
        return None, ()
    best = None
    best_order = None
    for perm in _distinct_permutations(Counter(pages), [], len(pages)):
        mean = locality(np.array(perm), window_size).mean
        if best is None or mean > best + 1e-12:
            best, best_order = mean, perm
    return best, best_order


# ======================================================================
# Run metrics
# ======================================================================
@dataclass(frozen=True)
class RunMetrics:
    """
    Counters of one simulated run and the ratios derived from them.

    ``data_busy_cycles`` holds one value per channel.
    """

    act_count: int
    cas_count: int
    pre_count: int
    read_count: int
    write_count: int
    requests: int
    total_cycles: int
    data_busy_cycles: tuple
    achieved_bytes: int
    clock_mhz: float = 1600.0
    config_digest: str = ""

    @property
    def channels(self):
        return len(self.data_busy_cycles)

    @property
    def cas_per_act(self):
        return self.cas_count / self.act_count if self.act_count else 0.0

    @property
    def channel_efficiency(self):
        if not self.total_cycles:
            return tuple(0.0 for _ in self.data_busy_cycles)
        return tuple(b / self.total_cycles for b in self.data_busy_cycles)

    @property
    def bandwidth_efficiency(self):
        """Data-busy cycles over elapsed cycles, averaged over channels."""
        if not self.total_cycles or not self.channels:
            return 0.0
        return sum(self.data_busy_cycles) / (self.channels * self.total_cycles)

    @property
    def achieved_bandwidth(self):
        """Bytes per controller cycle over the whole system."""
        return self.achieved_bytes / self.total_cycles if self.total_cycles else 0.0

    @property
    def achieved_gbps(self):
        return self.achieved_bandwidth * self.clock_mhz * 1e6 / 1e9

    def to_dict(self):
        out = asdict(self)
        out["data_busy_cycles"] = list(self.data_busy_cycles)
        out["cas_per_act"] = self.cas_per_act
        out["bandwidth_efficiency"] = self.bandwidth_efficiency
        out["achieved_bandwidth"] = self.achieved_bandwidth
        out["achieved_gbps"] = self.achieved_gbps
        return out

    @classmethod
    def from_dict(cls, data):
        names = cls.__dataclass_fields__
        kwargs = {k: v for k, v in data.items() if k in names}
        kwargs["data_busy_cycles"] = tuple(kwargs["data_busy_cycles"])
        return cls(**kwargs)


def cas_per_act_from_trace(commands):
    """
    Recompute CAS/ACT from a command trace.

    Parameters
    ----------
    commands : pandas.DataFrame or iterable of DramCommand
        A frame with a ``kind`` column, or command tuples.
    """
    kinds = commands["kind"] if isinstance(commands, pd.DataFrame) else [c.kind for c in commands]
    counts = Counter(kinds)
    act = counts["ACT"]
    return (counts["RD"] + counts["WR"]) / act if act else 0.0


def _delta_pct(new, old):
    if old == 0:
        return 0.0
    return (new / old - 1.0) * 100.0


@dataclass(frozen=True)
class ImprovementReport:
    """Reorder-stage run relative to its baseline."""

    bandwidth_delta_pct: float
    cas_per_act_delta_pct: float
    cas_per_act_ratio: float
    efficiency_delta_pct: float
    channel_efficiency_delta_pct: tuple
    annotations: dict = field(default_factory=lambda: dict(REFERENCE_POINTS))

    def to_dict(self):
        out = asdict(self)
        out["channel_efficiency_delta_pct"] = list(self.channel_efficiency_delta_pct)
        return out


def compare(baseline, mars):
    """
    Improvement of ``mars`` over ``baseline``.

    Raises
    ------
    ConfigMismatchError
        If the two runs do not share the same configuration digest.
    """
    if baseline.config_digest != mars.config_digest:
        raise ConfigMismatchError(
            f"cannot compare runs of different configurations "
            f"({baseline.config_digest[:12] or '<none>'} vs {mars.config_digest[:12] or '<none>'})"
        )
    ratio = mars.cas_per_act / baseline.cas_per_act if baseline.cas_per_act else 0.0
    return ImprovementReport(
        bandwidth_delta_pct=_delta_pct(mars.achieved_bandwidth, baseline.achieved_bandwidth),
        cas_per_act_delta_pct=_delta_pct(mars.cas_per_act, baseline.cas_per_act),
        cas_per_act_ratio=ratio,
        efficiency_delta_pct=_delta_pct(mars.bandwidth_efficiency, baseline.bandwidth_efficiency),
        channel_efficiency_delta_pct=tuple(
            _delta_pct(m, b)
            for m, b in zip(mars.channel_efficiency, baseline.channel_efficiency, strict=True)
        ),
    )
