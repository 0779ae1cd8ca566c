# ======================================================================================
# Copyright (©) 2025 marssim developers.
# CeCILL-B FREE SOFTWARE LICENSE AGREEMENT
# See full LICENSE agreement in the root directory.
# ======================================================================================
"""
Synthetic per-source request streams and the arbitration tree that merges them.

Sources emit post-cache miss streams directly. Each source walks its own page
range; inside a page the line order is ``sequential``, ``strided(k)`` or
``shuffled(seed)``. When ``requests_per_page`` exceeds the number of lines in a
page the order wraps around, so lines are revisited.

Streams are held column-wise in a `RequestStream` (numpy arrays) and yield
`MemoryRequest` tuples when iterated.

>>> spec = StreamSpec("texture", requests_per_page=4)
>>> [hex(r.addr) for r in generate_source(spec, source_id=0, seed=1)]
['0x0', '0x40', '0x80', '0xc0']
"""

__all__ = [
    "MERGE_TREE_PRESETS",
    "TRACE_COLUMNS",
    "IntraPageOrder",
    "MemoryRequest",
    "MergeTreeSpec",
    "RequestStream",
    "StreamKind",
    "StreamSpec",
    "check_disjoint",
    "generate_source",
    "generate_workload",
    "merge",
    "read_trace",
    "workload_preset",
    "write_trace",
]

import hashlib
import math
import re
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
import pandas as pd

from marssim.core.addressing import DEFAULT_ADDR_BITS
from marssim.core.addressing import DEFAULT_PAGE_OFFSET_BITS
from marssim.core.addressing import LINE_SIZE
from marssim.core.utils import ConfigError
from marssim.core.utils import MarsSimWarning
from marssim.core.utils import TraceError
from marssim.core.utils import debug_
from marssim.core.utils import open_source


# ======================================================================
# Request types
# ======================================================================
class StreamKind(str, Enum):
    """Graphics data stream a request belongs to."""

    TEXTURE = "texture"
    COLOR = "color"
    STENCIL = "stencil"
    DEPTH = "depth"
    HIZ = "hiz"


KIND_NAMES = [k.value for k in StreamKind]
KIND_CODES = {name: code for code, name in enumerate(KIND_NAMES)}


class MemoryRequest(NamedTuple):
    """One read or write of a single line."""

    seq: int
    addr: int
    is_write: bool
    stream_kind: str
    source_id: int
    size_bytes: int = LINE_SIZE


# ======================================================================
# Specifications
# ======================================================================
_ORDER_RE = re.compile(r"^\s*(sequential|strided|shuffled)\s*(?:\(\s*(\d+)\s*\))?\s*$")


@dataclass(frozen=True)
class IntraPageOrder:
    """
    Order of line offsets inside a page.

    Examples
    --------
    >>> IntraPageOrder.parse("shuffled(7)")
    IntraPageOrder(kind='shuffled', param=7)
    >>> str(IntraPageOrder.parse("strided"))
    'strided(8)'
    """

    kind: str = "sequential"
    param: int | None = None

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        m = _ORDER_RE.match(str(text))
        if m is None:
            raise ConfigError(
                f"intra_page_order must be sequential, strided(k) or shuffled(seed), got {text!r}"
            )
        kind, param = m.group(1), m.group(2)
        param = int(param) if param is not None else None
        if kind == "sequential" and param is not None:
            raise ConfigError("intra_page_order 'sequential' takes no parameter")
        if kind == "strided":
            param = 8 if param is None else param
            if param < 1:
                raise ConfigError("intra_page_order strided(k) needs k >= 1")
        return cls(kind, param)

    def __str__(self):
        if self.param is None:
            return self.kind
        return f"{self.kind}({self.param})"

    def line_offsets(self, n_pages, requests_per_page, lines_per_page, source_id, rng):
        """
        Return an ``(n_pages, requests_per_page)`` array of line indices.

        Parameters
        ----------
        n_pages, requests_per_page, lines_per_page : int
            Shape of the walk.
        source_id : int
            Mixed into the shuffle seed so sources do not share a permutation.
        rng : numpy.random.Generator
            Used for ``shuffled`` without an explicit seed.
        """
        L = lines_per_page
        if self.kind == "sequential":
            row = np.arange(requests_per_page) % L
            return np.tile(row, (n_pages, 1))

        if self.kind == "strided":
            k = min(self.param, L)
            perm = np.concatenate([np.arange(r, L, k) for r in range(k)])
            return np.tile(np.resize(perm, requests_per_page), (n_pages, 1))

        # shuffled: one fresh permutation per page (and per wrap)
        order_rng = rng if self.param is None else np.random.default_rng([self.param, source_id])
        reps = math.ceil(requests_per_page / L)
        base = np.tile(np.arange(L), (n_pages * reps, 1))
        perms = order_rng.permuted(base, axis=1).reshape(n_pages, reps * L)
        return perms[:, :requests_per_page]


@dataclass(frozen=True)
class StreamSpec:
    """
    Shape of the miss stream emitted by one source.

    Parameters
    ----------
    stream_kind : str
        One of ``texture``, ``color``, ``stencil``, ``depth``, ``hiz``.
    read_fraction : float
        Probability that a request is a read.
    base_page : int
        First page of source 0.
    pages_per_source : int
        Pages walked by each source.
    requests_per_page : int
        Requests issued to a page before moving on (may exceed the lines per page).
    page_stride : int
        Page distance between consecutive pages of a source.
    intra_page_order : str
        ``sequential``, ``strided(k)`` or ``shuffled(seed)``.
    source_spacing : int, optional
        Page distance between the first pages of consecutive source ids. Defaults
        to ``pages_per_source * page_stride + source_jitter_pages``.
    disjoint : bool
        Require that sources never share a page.
    base_jitter_pages : int
        Upper bound of a seed-drawn page offset shared by every source of a run.
    source_jitter_pages : int
        Upper bound of a seed-drawn page offset drawn separately for each source,
        inside the slack left by ``source_spacing``.
    """

    stream_kind: str = "texture"
    read_fraction: float = 1.0
    base_page: int = 0
    pages_per_source: int = 1
    requests_per_page: int = 64
    page_stride: int = 1
    intra_page_order: str = "sequential"
    source_spacing: int | None = None
    disjoint: bool = True
    base_jitter_pages: int = 0
    source_jitter_pages: int = 0

    def __post_init__(self):
        kind = self.stream_kind.value if isinstance(self.stream_kind, StreamKind) else str(self.stream_kind)
        if kind not in KIND_CODES:
            raise ConfigError(f"stream_kind must be one of {KIND_NAMES}, got {self.stream_kind!r}")
        object.__setattr__(self, "stream_kind", kind)
        object.__setattr__(self, "intra_page_order", str(IntraPageOrder.parse(self.intra_page_order)))
        if not 0.0 <= self.read_fraction <= 1.0:
            raise ConfigError(f"read_fraction must be in [0, 1], got {self.read_fraction}")
        for name in ("pages_per_source", "requests_per_page", "page_stride"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if min(self.base_page, self.base_jitter_pages, self.source_jitter_pages) < 0:
            raise ConfigError("base_page, base_jitter_pages and source_jitter_pages must be >= 0")
        if self.source_spacing is not None and self.source_spacing < 0:
            raise ConfigError(f"source_spacing must be >= 0, got {self.source_spacing}")
        if self.disjoint and self.spacing < self.extent:
            raise ConfigError(
                f"source_spacing={self.spacing} makes the page ranges of consecutive sources "
                f"overlap (needs >= pages_per_source * page_stride + source_jitter_pages = "
                f"{self.extent})"
            )

    @property
    def extent(self):
        """Pages a source may reach from its slot start, per-source jitter included."""
        return self.pages_per_source * self.page_stride + self.source_jitter_pages

    @property
    def spacing(self):
        if self.source_spacing is None:
            return self.extent
        return self.source_spacing

    @property
    def order(self):
        return IntraPageOrder.parse(self.intra_page_order)

    @property
    def requests_per_source(self):
        return self.pages_per_source * self.requests_per_page


MERGE_TREE_PRESETS = {
    "gpu24": (3, 8),
    "gpu40": (5, 8),
    "gpu64": (8, 8),
}


@dataclass(frozen=True)
class MergeTreeSpec:
    """
    Multi-level arbitration tree.

    ``fanouts`` is listed root first: ``(3, 8)`` is a root arbitrating 3 groups
    of 8 leaves each.
    """

    leaves: int = 24
    fanouts: tuple = (3, 8)
    arbitration: str = "round-robin"

    def __post_init__(self):
        fanouts = tuple(int(f) for f in self.fanouts)
        object.__setattr__(self, "fanouts", fanouts)
        if self.leaves < 1:
            raise ConfigError(f"merge_tree.leaves must be >= 1, got {self.leaves}")
        if any(f < 1 for f in fanouts):
            raise ConfigError(f"merge_tree.fanouts must all be >= 1, got {list(fanouts)}")
        if math.prod(fanouts) != self.leaves:
            raise ConfigError(
                f"merge_tree: product of fanouts {list(fanouts)} = {math.prod(fanouts)} "
                f"must equal leaves = {self.leaves}"
            )
        if self.arbitration not in ("round-robin", "fixed-priority"):
            raise ConfigError(
                f"merge_tree.arbitration must be 'round-robin' or 'fixed-priority', got {self.arbitration!r}"
            )

    @classmethod
    def preset(cls, name):
        try:
            fanouts = MERGE_TREE_PRESETS[name]
        except KeyError as e:
            raise ConfigError(
                f"Unknown merge tree preset {name!r}. Expected one of {sorted(MERGE_TREE_PRESETS)}"
            ) from e
        return cls(math.prod(fanouts), fanouts)

    @classmethod
    def for_leaves(cls, leaves, arbitration="round-robin"):
        """Tree of shader-core groups of 8 when possible, otherwise a single level."""
        fanouts = (leaves // 8, 8) if leaves % 8 == 0 and leaves > 8 else (leaves,)
        return cls(leaves, fanouts, arbitration)


# ======================================================================
# Columnar request stream
# ======================================================================
class RequestStream:
    """
    Ordered request stream stored as numpy columns.

    Parameters
    ----------
    addr : array_like
        Physical addresses.
    is_write : array_like
        Write flags.
    kind : array_like
        Stream kind codes (index into `StreamKind`).
    source : array_like
        Originating leaf index.
    seq : array_like, optional
        Arrival ordinals; defaults to ``0..N-1``.
    line_size : int, optional
        Request size in bytes.
    """

    def __init__(self, addr, is_write, kind, source, seq=None, line_size=LINE_SIZE):
        self.addr = np.asarray(addr, dtype=np.uint64)
        self.is_write = np.asarray(is_write, dtype=bool)
        self.kind = np.asarray(kind, dtype=np.uint8)
        self.source = np.asarray(source, dtype=np.int32)
        n = len(self.addr)
        self.seq = np.arange(n, dtype=np.int64) if seq is None else np.asarray(seq, dtype=np.int64)
        self.line_size = line_size
        if not (len(self.is_write) == len(self.kind) == len(self.source) == len(self.seq) == n):
            raise ValueError("RequestStream columns must have the same length")

    @classmethod
    def empty(cls, line_size=LINE_SIZE):
        return cls([], [], [], [], line_size=line_size)

    @classmethod
    def from_requests(cls, requests, line_size=LINE_SIZE):
        """Build a stream from an iterable of `MemoryRequest`, keeping their seq."""
        requests = list(requests)
        return cls(
            [r.addr for r in requests],
            [r.is_write for r in requests],
            [KIND_CODES[r.stream_kind] for r in requests],
            [r.source_id for r in requests],
            seq=[r.seq for r in requests],
            line_size=line_size,
        )

    def __len__(self):
        return len(self.addr)

    def __iter__(self):
        names = KIND_NAMES
        size = self.line_size
        for s, a, w, k, src in zip(
            self.seq.tolist(),
            self.addr.tolist(),
            self.is_write.tolist(),
            self.kind.tolist(),
            self.source.tolist(),
            strict=True,
        ):
            yield MemoryRequest(s, a, w, names[k], src, size)

    def __getitem__(self, i):
        return MemoryRequest(
            int(self.seq[i]),
            int(self.addr[i]),
            bool(self.is_write[i]),
            KIND_NAMES[int(self.kind[i])],
            int(self.source[i]),
            self.line_size,
        )

    def __repr__(self):
        return f"RequestStream({len(self)} requests, kinds={sorted(self.stream_kinds)})"

    def take(self, indices):
        """Return the sub-stream at ``indices`` (seq values are kept)."""
        indices = np.asarray(indices, dtype=np.int64)
        return RequestStream(
            self.addr[indices],
            self.is_write[indices],
            self.kind[indices],
            self.source[indices],
            seq=self.seq[indices],
            line_size=self.line_size,
        )

    def renumbered(self):
        """Return a copy whose seq is ``0..N-1`` in current order."""
        return RequestStream(
            self.addr, self.is_write, self.kind, self.source, line_size=self.line_size
        )

    @staticmethod
    def concatenate(streams):
        streams = list(streams)
        if not streams:
            return RequestStream.empty()
        return RequestStream(
            np.concatenate([s.addr for s in streams]),
            np.concatenate([s.is_write for s in streams]),
            np.concatenate([s.kind for s in streams]),
            np.concatenate([s.source for s in streams]),
            seq=np.concatenate([s.seq for s in streams]),
            line_size=streams[0].line_size,
        )

    def pages(self, page_offset_bits=DEFAULT_PAGE_OFFSET_BITS):
        """Page id of every request as an int64 array."""
        return (self.addr >> np.uint64(page_offset_bits)).astype(np.int64)

    @property
    def stream_kinds(self):
        return {KIND_NAMES[k] for k in np.unique(self.kind).tolist()}

    @property
    def n_writes(self):
        return int(np.count_nonzero(self.is_write))

    @property
    def n_reads(self):
        return len(self) - self.n_writes

    def digest(self):
        """SHA-256 over every column; equal digests mean identical streams."""
        h = hashlib.sha256()
        for col in (self.seq, self.addr, self.is_write, self.kind, self.source):
            h.update(np.ascontiguousarray(col).tobytes())
        return h.hexdigest()


# ======================================================================
# Generation
# ======================================================================
def _first_page(spec, source_id, seed):
    shared = own = 0
    if spec.base_jitter_pages:
        shared = int(np.random.default_rng(seed).integers(0, spec.base_jitter_pages + 1))
    if spec.source_jitter_pages:
        rng = np.random.default_rng([seed, source_id, KIND_CODES[spec.stream_kind]])
        own = int(rng.integers(0, spec.source_jitter_pages + 1))
    return spec.base_page + shared + source_id * spec.spacing + own


def generate_source(
    spec,
    source_id,
    seed,
    page_offset_bits=DEFAULT_PAGE_OFFSET_BITS,
    line_size=LINE_SIZE,
    addr_bits=DEFAULT_ADDR_BITS,
):
    """
    Generate the miss stream of one source.

    Parameters
    ----------
    spec : StreamSpec
        Stream shape.
    source_id : int
        Leaf index; offsets the page range by ``source_id * spec.spacing``
        plus the per-source jitter.
    seed : int
        Run seed (read/write draws, unseeded shuffles, shared and per-source jitter).
    page_offset_bits, line_size, addr_bits : int, optional
        Page size, request size and address width.

    Returns
    -------
    RequestStream
        ``pages_per_source * requests_per_page`` requests with local seq.

    Raises
    ------
    ConfigError
        If the page range reaches beyond the address width.
    """
    lines_per_page = (1 << page_offset_bits) // line_size
    first = _first_page(spec, source_id, seed)
    pages = first + np.arange(spec.pages_per_source, dtype=np.int64) * spec.page_stride
    last_addr = (int(pages[-1]) + 1) << page_offset_bits
    if last_addr > (1 << addr_bits):
        raise ConfigError(
            f"source {source_id} walks pages up to {int(pages[-1])}, beyond the "
            f"{addr_bits}-bit address width"
        )

    rng = np.random.default_rng([seed, source_id])
    offsets = spec.order.line_offsets(
        spec.pages_per_source, spec.requests_per_page, lines_per_page, source_id, rng
    )
    addr = ((pages[:, None] << page_offset_bits) + offsets * line_size).ravel()
    n = len(addr)
    is_write = rng.random(n) >= spec.read_fraction
    return RequestStream(
        addr,
        is_write,
        np.full(n, KIND_CODES[spec.stream_kind], dtype=np.uint8),
        np.full(n, source_id, dtype=np.int32),
        line_size=line_size,
    )


def check_disjoint(specs, leaves, page_offset_bits=DEFAULT_PAGE_OFFSET_BITS):
    """
    Verify that no two sources of a workload walk a common page.

    Leaf ``i`` uses ``specs[i % len(specs)]``. Each range is widened by its
    per-source jitter bound. Sources of one spec share the seed-drawn base jitter
    and shift together; ranges of different specs are also widened by their base
    jitter bound since the seed is not known here. Sources whose
    spec has ``disjoint=False`` are not checked.

    Raises
    ------
    ConfigError
        Naming the first pair of overlapping sources.
    """
    spans = []
    for i in range(leaves):
        k = i % len(specs)
        spec = specs[k]
        if not spec.disjoint:
            continue
        lo = spec.base_page + i * spec.spacing
        hi = lo + (spec.pages_per_source - 1) * spec.page_stride + spec.source_jitter_pages
        spans.append((lo, hi, k, spec.base_jitter_pages, i))
    for n, (lo0, hi0, k0, j0, i0) in enumerate(spans):
        for lo1, hi1, k1, j1, i1 in spans[n + 1 :]:
            w0, w1 = (0, 0) if k0 == k1 else (j0, j1)
            if lo1 <= hi0 + w0 and lo0 <= hi1 + w1:
                raise ConfigError(
                    f"page ranges of sources {i0} [{lo0}, {hi0}] and {i1} [{lo1}, {hi1}] overlap"
                )


def _arbitrate(children, arbitration):
    # children: index arrays in leaf order; returns the merged index array
    children = [c for c in children if len(c)]
    if not children:
        return np.empty(0, dtype=np.int64)
    if len(children) == 1:
        return children[0]
    idx = np.concatenate(children)
    if arbitration == "fixed-priority":
        return idx
    turn = np.concatenate([np.arange(len(c)) for c in children])
    child = np.concatenate([np.full(len(c), i) for i, c in enumerate(children)])
    return idx[np.lexsort((child, turn))]


def merge(tree, streams):
    """
    Merge per-source streams through the arbitration tree.

    Each node drains its children one request at a time, round-robin among the
    children that still hold requests (``fixed-priority`` always takes the
    lowest-index non-empty child). Output seq follows emission order.

    Parameters
    ----------
    tree : MergeTreeSpec
        The arbitration tree.
    streams : list of RequestStream
        One stream per leaf.

    Returns
    -------
    RequestStream

    Examples
    --------
    >>> a = RequestStream([0, 64], [0, 0], [0, 0], [0, 0])
    >>> b = RequestStream([4096, 4160], [0, 0], [0, 0], [1, 1])
    >>> [r.addr for r in merge(MergeTreeSpec(2, (2,)), [a, b])]
    [0, 4096, 64, 4160]
    """
    streams = list(streams)
    if len(streams) != tree.leaves:
        raise ConfigError(f"merge: tree has {tree.leaves} leaves but {len(streams)} streams were given")
    pool = RequestStream.concatenate(streams)
    bounds = np.cumsum([0] + [len(s) for s in streams])
    level = [np.arange(bounds[i], bounds[i + 1]) for i in range(len(streams))]
    for fanout in reversed(tree.fanouts):
        level = [
            _arbitrate(level[g : g + fanout], tree.arbitration)
            for g in range(0, len(level), fanout)
        ]
    return pool.take(level[0]).renumbered()


def generate_workload(
    specs,
    tree,
    seed,
    page_offset_bits=DEFAULT_PAGE_OFFSET_BITS,
    line_size=LINE_SIZE,
    addr_bits=DEFAULT_ADDR_BITS,
):
    """
    Generate every leaf stream of a workload and merge them.

    Returns
    -------
    tuple
        ``(sources, merged)``: the list of per-leaf `RequestStream` and the
        merged stream.
    """
    specs = list(specs)
    if not specs:
        raise ConfigError("a workload needs at least one StreamSpec")
    check_disjoint(specs, tree.leaves, page_offset_bits)
    sources = [
        generate_source(specs[i % len(specs)], i, seed, page_offset_bits, line_size, addr_bits)
        for i in range(tree.leaves)
    ]
    merged = merge(tree, sources)
    debug_(
        f"workload seed {seed}: {len(merged)} requests from {tree.leaves} sources, "
        f"{merged.n_reads} reads, {merged.n_writes} writes"
    )
    return sources, merged


def workload_preset(name, scale=1.0):
    """
    Return the stream specs and merge tree of a named workload.

    Presets come from the plugin manager: the built-in plugin serves ``WL1`` to
    ``WL5`` and ``LOCALITY``.

    Parameters
    ----------
    name : str
        Preset name.
    scale : float, optional
        Multiplies the number of pages walked by each source.

    Returns
    -------
    tuple
        ``(list of StreamSpec, MergeTreeSpec)``.

    Raises
    ------
    ConfigError
        For an unknown preset name or a non-positive scale.
    """
    from marssim.plugin.manager import workload_presets

    if scale <= 0:
        raise ConfigError(f"workload.scale must be > 0, got {scale}")
    presets = workload_presets()
    try:
        builder = presets[name]
    except KeyError as e:
        raise ConfigError(
            f"Unknown workload preset: {name!r}. Expected one of {sorted(presets)}"
        ) from e
    specs, tree = builder(scale)
    return list(specs), tree


# ======================================================================
# Trace files
# ======================================================================
TRACE_COLUMNS = ["seq", "addr_hex", "rw", "stream_kind", "source_id"]


def write_trace(stream, path):
    """
    Write a request trace.

    The file starts with the header line ``seq,addr_hex,rw,stream_kind,source_id``
    followed by one request per line, ``rw`` being ``R`` or ``W``.
    """
    df = pd.DataFrame(
        {
            "seq": stream.seq,
            "addr_hex": [f"0x{a:x}" for a in stream.addr.tolist()],
            "rw": np.where(stream.is_write, "W", "R"),
            "stream_kind": np.asarray(KIND_NAMES, dtype=object)[stream.kind],
            "source_id": stream.source,
        },
        columns=TRACE_COLUMNS,
    )
    df.to_csv(path, index=False, lineterminator="\n")


def read_trace(source, line_size=LINE_SIZE, addr_bits=DEFAULT_ADDR_BITS):
    """
    Read a request trace from a path, bytes content or URL.

    Returns
    -------
    RequestStream
        The requests in file order. A non-dense seq column is renumbered with a
        `MarsSimWarning`.

    Raises
    ------
    TraceError
        On a wrong header or malformed field, or an address that does not fit in
        ``addr_bits``.
    """
    fid, name = open_source(source, mode="r")
    with fid:
        try:
            df = pd.read_csv(fid, dtype=str, keep_default_na=False)
        except pd.errors.EmptyDataError as e:
            raise TraceError(f"{name or 'trace'}: empty trace file (header expected)") from e
    if list(df.columns) != TRACE_COLUMNS:
        raise TraceError(f"{name or 'trace'}: header must be {','.join(TRACE_COLUMNS)}, got {','.join(df.columns)}")
    try:
        seq = df["seq"].astype(np.int64).to_numpy()
        addr = np.array([int(a, 16) for a in df["addr_hex"]], dtype=np.uint64)
        source_id = df["source_id"].astype(np.int32).to_numpy()
    except (ValueError, OverflowError) as e:
        raise TraceError(f"{name or 'trace'}: malformed numeric field ({e})") from e
    too_wide = addr >> np.uint64(addr_bits) if addr_bits < 64 else np.zeros_like(addr)
    if too_wide.any():
        i = int(np.argmax(too_wide > 0))
        raise TraceError(
            f"{name or 'trace'}: address {df['addr_hex'].iloc[i]} does not fit in {addr_bits} bits (line {i + 2})"
        )
    rw = df["rw"].to_numpy()
    bad = ~np.isin(rw, ["R", "W"])
    if bad.any():
        raise TraceError(f"{name or 'trace'}: rw must be R or W (line {int(np.argmax(bad)) + 2})")
    kinds = df["stream_kind"].to_numpy()
    bad = ~np.isin(kinds, KIND_NAMES)
    if bad.any():
        raise TraceError(
            f"{name or 'trace'}: unknown stream_kind {kinds[np.argmax(bad)]!r} (line {int(np.argmax(bad)) + 2})"
        )
    kind = np.array([KIND_CODES[k] for k in kinds], dtype=np.uint8)
    stream = RequestStream(addr, rw == "W", kind, source_id, seq=seq, line_size=line_size)
    if not np.array_equal(seq, np.arange(len(seq))):
        warnings.warn(
            f"{name or 'trace'}: seq is not dense 0..N-1, requests renumbered in file order",
            MarsSimWarning,
            stacklevel=2,
        )
        stream = stream.renumbered()
    return stream
