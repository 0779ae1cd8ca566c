# ======================================================================================
# Copyright (©) 2025 marssim developers.
# CeCILL-B FREE SOFTWARE LICENSE AGREEMENT
# See full LICENSE agreement in the root directory.
# ======================================================================================
"""
Physical address decomposition.

Two views of the same address are kept apart on purpose:

- `page_id` is everything the reorder stage knows: the address with the page
  offset dropped.
- `decode` is the memory controller's view: channel, rank, bank, row and column
  gathered from bit positions listed in a `MemoryMap`.

Default map, from LSB upward: 6 burst-offset bits (64 B lines), 6 column bits
(bits 6-11, so a 4 KB page is exactly one row), 1 channel bit (bit 12, above
the page), 3 bank bits, 20 row bits; no rank bits.

>>> mmap = MemoryMap.preset("default")
>>> decode(0x2040, mmap)
DramCoordinate(channel=0, rank=0, bank=1, row=0, column=1)
"""

__all__ = [
    "DEFAULT_ADDR_BITS",
    "DEFAULT_PAGE_OFFSET_BITS",
    "LINE_SIZE",
    "MEMORY_MAP_PRESETS",
    "DramCoordinate",
    "MemoryMap",
    "decode",
    "decode_array",
    "encode",
    "page_id",
    "same_row",
]

from dataclasses import dataclass
from dataclasses import field
from typing import NamedTuple

import numpy as np

from marssim.core.utils import ConfigError

DEFAULT_ADDR_BITS = 36
DEFAULT_PAGE_OFFSET_BITS = 12
LINE_SIZE = 64

FIELDS = ("channel", "rank", "bank", "row", "column")


class DramCoordinate(NamedTuple):
    """DRAM device address of a request."""

    channel: int
    rank: int
    bank: int
    row: int
    column: int


def page_id(addr, page_offset_bits=DEFAULT_PAGE_OFFSET_BITS):
    """
    Return the physical page number of an address.

    Parameters
    ----------
    addr : int or numpy.ndarray
        Physical byte address(es).
    page_offset_bits : int, optional
        Number of page-offset bits, 12 for 4 KB pages.

    Returns
    -------
    int or numpy.ndarray
        ``addr >> page_offset_bits``.

    Examples
    --------
    >>> page_id(0x1FFF)
    1
    >>> hex(page_id(0x3F000))
    '0x3f'
    """
    return addr >> page_offset_bits


def _runs(bits):
    # Group ascending contiguous bit positions into (src_shift, mask, dst_shift).
    runs = []
    start = 0
    while start < len(bits):
        end = start + 1
        while end < len(bits) and bits[end] == bits[end - 1] + 1:
            end += 1
        runs.append((bits[start], (1 << (end - start)) - 1, start))
        start = end
    return tuple(runs)


@dataclass(frozen=True)
class MemoryMap:
    """
    Bit-field layout from physical address to DRAM coordinate.

    Each ``*_bits`` field lists address bit positions; the i-th listed position
    becomes bit i of the coordinate field. The low ``burst_offset_bits`` bits
    address bytes inside one burst and are not part of any coordinate.

    Raises
    ------
    ConfigError
        When lists overlap, reach into the burst offset, or do not cover the
        ``addr_bits`` address width exactly.
    """

    channel_bits: tuple = ()
    rank_bits: tuple = ()
    bank_bits: tuple = ()
    row_bits: tuple = ()
    column_bits: tuple = ()
    burst_offset_bits: int = 6
    addr_bits: int = DEFAULT_ADDR_BITS
    _field_runs: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        for name in FIELDS:
            bits = getattr(self, f"{name}_bits")
            try:
                bits = tuple(int(b) for b in bits)
            except (TypeError, ValueError) as e:
                raise ConfigError(
                    f"memory_map.{name}_bits must be a list of bit positions"
                ) from e
            object.__setattr__(self, f"{name}_bits", bits)
        self._validate()
        object.__setattr__(
            self,
            "_field_runs",
            {name: _runs(getattr(self, f"{name}_bits")) for name in FIELDS},
        )

    def _validate(self):
        if self.addr_bits < 1 or self.addr_bits > 64:
            raise ConfigError(f"memory_map.addr_bits must be in [1, 64], got {self.addr_bits}")
        if self.burst_offset_bits < 0 or self.burst_offset_bits >= self.addr_bits:
            raise ConfigError(
                f"memory_map.burst_offset_bits must be in [0, addr_bits), got {self.burst_offset_bits}"
            )
        seen = {}
        for name in FIELDS:
            for b in getattr(self, f"{name}_bits"):
                if b < self.burst_offset_bits or b >= self.addr_bits:
                    raise ConfigError(
                        f"memory_map.{name}_bits: bit {b} lies outside "
                        f"[{self.burst_offset_bits}, {self.addr_bits}) "
                        "(burst offset or beyond the address width)"
                    )
                if b in seen:
                    raise ConfigError(
                        f"memory_map bit lists must be disjoint: bit {b} is in both "
                        f"{seen[b]}_bits and {name}_bits"
                    )
                seen[b] = name
        missing = sorted(set(range(self.burst_offset_bits, self.addr_bits)) - set(seen))
        if missing:
            raise ConfigError(
                "memory_map bit lists plus burst_offset_bits must cover exactly "
                f"addr_bits={self.addr_bits}; unassigned bits: {missing}"
            )

    # ----------------------------------------------------------------------------------
    # Dimensions
    # ----------------------------------------------------------------------------------
    @property
    def channels(self):
        return 1 << len(self.channel_bits)

    @property
    def ranks(self):
        return 1 << len(self.rank_bits)

    @property
    def banks(self):
        return 1 << len(self.bank_bits)

    @property
    def rows(self):
        return 1 << len(self.row_bits)

    @property
    def columns(self):
        return 1 << len(self.column_bits)

    def check_dimensions(self, dram):
        """
        Verify that the map addresses exactly the configured DRAM organisation.

        Parameters
        ----------
        dram : DramConfig
            Any object with ``channels``, ``ranks_per_channel``, ``banks``, ``rows``
            and ``columns`` attributes.

        Raises
        ------
        ConfigError
            Naming the first dimension whose bit count does not match.
        """
        pairs = [
            ("channel", self.channels, dram.channels, "channels"),
            ("rank", self.ranks, dram.ranks_per_channel, "ranks_per_channel"),
            ("bank", self.banks, dram.banks, "banks"),
            ("row", self.rows, dram.rows, "rows"),
            ("column", self.columns, dram.columns, "columns"),
        ]
        for name, mapped, configured, key in pairs:
            if mapped != configured:
                raise ConfigError(
                    f"memory_map.{name}_bits addresses {mapped} {name}s "
                    f"but dram.{key} = {configured} (2^|{name}_bits| must match)"
                )

    # ----------------------------------------------------------------------------------
    # Construction helpers
    # ----------------------------------------------------------------------------------
    @classmethod
    def preset(cls, name="default"):
        """
        Return a named memory map.

        Parameters
        ----------
        name : str
            ``"default"`` (channel bit above the 4 KB page) or
            ``"channel_in_page"`` (channel bit 11, a page spans both channels).
        """
        try:
            kwargs = MEMORY_MAP_PRESETS[name]
        except KeyError as e:
            raise ConfigError(
                f"Unknown memory_map preset: {name!r}. Expected one of {sorted(MEMORY_MAP_PRESETS)}"
            ) from e
        return cls(**kwargs)

    @classmethod
    def from_dict(cls, data):
        """Build a map from a config table (``preset`` key or explicit lists)."""
        data = dict(data)
        allowed = {f"{n}_bits" for n in FIELDS} | {
            "burst_offset_bits",
            "addr_bits",
            "preset",
        }
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ConfigError(f"Unknown key(s) in [memory_map]: {unknown}")
        if "preset" in data:
            preset = data.pop("preset")
            if data:
                raise ConfigError(
                    "[memory_map] takes either 'preset' or explicit bit lists, not both"
                )
            return cls.preset(preset)
        return cls(**data)

    def to_dict(self):
        out = {f"{n}_bits": list(getattr(self, f"{n}_bits")) for n in FIELDS}
        out["burst_offset_bits"] = self.burst_offset_bits
        out["addr_bits"] = self.addr_bits
        return out


MEMORY_MAP_PRESETS = {
    "default": {
        "burst_offset_bits": 6,
        "column_bits": tuple(range(6, 12)),
        "channel_bits": (12,),
        "bank_bits": (13, 14, 15),
        "row_bits": tuple(range(16, 36)),
        "rank_bits": (),
        "addr_bits": 36,
    },
    "channel_in_page": {
        "burst_offset_bits": 6,
        "column_bits": (6, 7, 8, 9, 10, 12),
        "channel_bits": (11,),
        "bank_bits": (13, 14, 15),
        "row_bits": tuple(range(16, 36)),
        "rank_bits": (),
        "addr_bits": 36,
    },
}


# ======================================================================
# Decode / encode
# ======================================================================
def decode(addr, mmap):
    """
    Translate a physical address into a DRAM coordinate.

    Parameters
    ----------
    addr : int
        Physical byte address below ``2**mmap.addr_bits``.
    mmap : MemoryMap
        The memory map.

    Returns
    -------
    DramCoordinate

    Raises
    ------
    ConfigError
        If the address does not fit in ``mmap.addr_bits``.
    """
    if not 0 <= addr < 1 << mmap.addr_bits:
        raise ConfigError(
            f"address {addr:#x} does not fit memory_map.addr_bits={mmap.addr_bits}"
        )
    runs = mmap._field_runs
    values = []
    for name in FIELDS:
        value = 0
        for src, mask, dst in runs[name]:
            value |= ((addr >> src) & mask) << dst
        values.append(value)
    return DramCoordinate(*values)


def encode(coord, mmap, burst_offset=0):
    """
    Inverse of `decode`.

    Parameters
    ----------
    coord : DramCoordinate
        The device coordinate.
    mmap : MemoryMap
        The memory map.
    burst_offset : int, optional
        Byte offset inside the burst (low ``burst_offset_bits`` bits).

    Returns
    -------
    int
        The physical address.

    Examples
    --------
    >>> mmap = MemoryMap.preset("default")
    >>> hex(encode(DramCoordinate(1, 0, 0, 0, 0), mmap))
    '0x1000'
    """
    runs = mmap._field_runs
    addr = burst_offset & ((1 << mmap.burst_offset_bits) - 1)
    for name, value in zip(FIELDS, coord, strict=True):
        for src, mask, dst in runs[name]:
            addr |= ((value >> dst) & mask) << src
    return addr


def decode_array(addrs, mmap):
    """
    Vectorized `decode` over an array of addresses.

    Parameters
    ----------
    addrs : array_like
        Physical addresses.
    mmap : MemoryMap
        The memory map.

    Returns
    -------
    dict of numpy.ndarray
        One int64 array per coordinate field (``channel``, ``rank``, ``bank``,
        ``row``, ``column``).

    Raises
    ------
    ConfigError
        If any address does not fit in ``mmap.addr_bits``.
    """
    addrs = np.asarray(addrs, dtype=np.uint64)
    if mmap.addr_bits < 64 and addrs.size and int(addrs.max()) >> mmap.addr_bits:
        raise ConfigError(
            f"address {int(addrs.max()):#x} does not fit memory_map.addr_bits={mmap.addr_bits}"
        )
    out = {}
    for name in FIELDS:
        value = np.zeros(addrs.shape, dtype=np.uint64)
        for src, mask, dst in mmap._field_runs[name]:
            value |= ((addrs >> np.uint64(src)) & np.uint64(mask)) << np.uint64(dst)
        out[name] = value.astype(np.int64)
    return out


def same_row(a, b):
    """
    Return True when two coordinates address the same DRAM row.

    Examples
    --------
    >>> same_row(DramCoordinate(0, 0, 1, 5, 3), DramCoordinate(0, 0, 1, 5, 60))
    True
    >>> same_row(DramCoordinate(0, 0, 1, 5, 3), DramCoordinate(0, 0, 2, 5, 3))
    False
    """
    return a.channel == b.channel and a.rank == b.rank and a.bank == b.bank and a.row == b.row
