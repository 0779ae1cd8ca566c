# ======================================================================================
# Copyright (©) 2025 marssim developers.
# CeCILL-B FREE SOFTWARE LICENSE AGREEMENT
# See full LICENSE agreement in the root directory.
# ======================================================================================
"""
Open-page DRAM model behind a per-channel FR-FCFS controller.

Each channel owns a bounded pending queue, one command bus and one data bus.
Per cycle a channel issues at most one command:

1. a RD/WR for the oldest pending request whose bank is open on its row and
   ready, if the data bus is free;
2. otherwise a command on behalf of the oldest request: ACT if its bank is idle,
   PRE if the bank holds another row and no queued request still hits that row.

Timing follows ``t_rcd`` (ACT to CAS), ``t_rp`` (PRE to ACT) and ``t_cas`` (CAS to
data); a CAS holds the data bus for ``burst_length / 2`` cycles. All cycles are
memory-controller cycles.
"""

__all__ = [
    "COMMAND_COLUMNS",
    "BankState",
    "ChannelController",
    "CommandKind",
    "DramCommand",
    "DramConfig",
    "MemorySystem",
    "check_protocol",
    "commands_frame",
    "read_command_trace",
    "simulate",
    "simulate_pipeline",
    "write_command_trace",
]

import re
from collections import defaultdict
from dataclasses import asdict
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import pandas as pd

from marssim.core.addressing import MemoryMap
from marssim.core.addressing import decode
from marssim.core.addressing import decode_array
from marssim.core.mars import PassthroughStage
from marssim.core.mars import ReorderStage
from marssim.core.metrics import RunMetrics
from marssim.core.utils import ConfigError
from marssim.core.utils import SimulationError
from marssim.core.utils import TraceError
from marssim.core.utils import debug_
from marssim.core.utils import open_source


class CommandKind(str, Enum):
    ACT = "ACT"
    RD = "RD"
    WR = "WR"
    PRE = "PRE"


class DramCommand(NamedTuple):
    """
    One issued command.

    ``bank`` is the flat index ``rank * banks + bank``. For PRE, ``row`` is the
    row being closed; ``column`` and ``seq`` are None for ACT and PRE.
    """

    cycle: int
    channel: int
    bank: int
    kind: str
    row: int
    column: int | None = None
    seq: int | None = None


@dataclass(frozen=True)
class DramConfig:
    """
    DRAM organisation and timing (dual-channel LPDDR4-3200-like defaults).

    Parameters
    ----------
    channels, ranks_per_channel, banks, rows, columns : int
        Organisation; must match the memory map bit counts.
    t_cas, t_rcd, t_rp : int
        Timings in controller cycles.
    burst_length : int
        Beats per CAS (even; the data bus is busy ``burst_length / 2`` cycles).
    bus_bytes_per_beat : int
        Data bus width.
    pending_queue_depth : int
        Controller queue entries per channel.
    clock_mhz : float
        Controller clock, used only to report GB/s.
    """

    channels: int = 2
    ranks_per_channel: int = 1
    banks: int = 8
    rows: int = 1 << 20
    columns: int = 64
    t_cas: int = 15
    t_rcd: int = 15
    t_rp: int = 15
    burst_length: int = 8
    bus_bytes_per_beat: int = 2
    pending_queue_depth: int = 16
    clock_mhz: float = 1600.0

    def __post_init__(self):
        for name in ("channels", "ranks_per_channel", "banks", "rows", "columns", "pending_queue_depth"):
            if getattr(self, name) < 1:
                raise ConfigError(f"dram.{name} must be >= 1, got {getattr(self, name)}")
        for name in ("t_cas", "t_rcd", "t_rp"):
            if getattr(self, name) < 1:
                raise ConfigError(f"dram.{name}: all timing values must be >= 1, got {getattr(self, name)}")
        if self.burst_length < 2 or self.burst_length % 2:
            raise ConfigError(f"dram.burst_length must be even and >= 2, got {self.burst_length}")
        if self.bus_bytes_per_beat < 1 or self.clock_mhz <= 0:
            raise ConfigError("dram.bus_bytes_per_beat and dram.clock_mhz must be positive")

    @property
    def data_cycles(self):
        return self.burst_length // 2

    @property
    def bytes_per_cas(self):
        return self.burst_length * self.bus_bytes_per_beat

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        unknown = sorted(set(data) - set(cls.__dataclass_fields__))
        if unknown:
            raise ConfigError(f"Unknown key(s) in [dram]: {unknown}")
        return cls(**data)

    def to_dict(self):
        return asdict(self)


@dataclass
class BankState:
    open_row: int | None = None
    ready_at: int = 0


# ======================================================================
# Controller
# ======================================================================
class ChannelController:
    """
    FR-FCFS controller of one channel.

    Pending entries are ``(seq, bank, row, column, is_write)`` tuples kept in
    admission order.
    """

    def __init__(self, index, config, commands):
        self.index = index
        self.config = config
        self.banks = [BankState() for _ in range(config.ranks_per_channel * config.banks)]
        self.pending = []
        self.cas_ready_at = 0
        self.last_data_end = 0
        self.counts = dict.fromkeys(("ACT", "RD", "WR", "PRE"), 0)
        self._commands = commands

    @property
    def data_busy_cycles(self):
        return (self.counts["RD"] + self.counts["WR"]) * self.config.data_cycles

    def admit(self, req, coord):
        """Append a decoded request; False when the queue is full."""
        if len(self.pending) >= self.config.pending_queue_depth:
            return False
        bank = coord.rank * self.config.banks + coord.bank
        self.pending.append((req.seq, bank, coord.row, coord.column, req.is_write))
        return True

    def _issue(self, cycle, kind, bank, row, column=None, seq=None):
        cmd = DramCommand(cycle, self.index, bank, kind, row, column, seq)
        self._commands.append(cmd)
        self.counts[kind] += 1
        return cmd

    def schedule(self, cycle):
        """Issue at most one command at ``cycle``; return it or None."""
        pending = self.pending
        if not pending:
            return None
        banks = self.banks
        cfg = self.config

        if self.cas_ready_at <= cycle:
            for i, (seq, bank, row, column, is_write) in enumerate(pending):
                b = banks[bank]
                if b.open_row == row and b.ready_at <= cycle:
                    del pending[i]
                    b.ready_at = cycle + 1
                    self.cas_ready_at = cycle + cfg.data_cycles
                    self.last_data_end = max(self.last_data_end, cycle + cfg.t_cas + cfg.data_cycles)
                    return self._issue(cycle, "WR" if is_write else "RD", bank, row, column, seq)

        _, bank, row, _, _ = pending[0]
        b = banks[bank]
        if b.ready_at > cycle:
            return None
        if b.open_row is None:
            b.open_row = row
            b.ready_at = cycle + cfg.t_rcd
            return self._issue(cycle, "ACT", bank, row)
        if b.open_row != row:
            open_row = b.open_row
            if any(p[1] == bank and p[2] == open_row for p in pending):
                return None
            b.open_row = None
            b.ready_at = cycle + cfg.t_rp
            return self._issue(cycle, "PRE", bank, open_row)
        return None

    def next_event(self, cycle):
        """Earliest cycle after ``cycle`` at which a bank or the data bus frees up."""
        if not self.pending:
            return None
        times = [self.banks[p[1]].ready_at for p in self.pending]
        times.append(self.cas_ready_at)
        future = [t for t in times if t > cycle]
        return min(future) if future else None


class MemorySystem:
    """
    All channels of the DRAM; also the credit model seen by the front-end stage.

    Parameters
    ----------
    config : DramConfig, optional
        Organisation and timing.
    mmap : MemoryMap, optional
        Address decode; must match ``config``.
    """

    exhausted = False

    def __init__(self, config=None, mmap=None):
        self.config = config if config is not None else DramConfig()
        self.mmap = mmap if mmap is not None else MemoryMap.preset("default")
        self.mmap.check_dimensions(self.config)
        self.commands = []
        self.channels = [ChannelController(i, self.config, self.commands) for i in range(self.config.channels)]
        self.admitted = 0

    def try_admit(self, req, cycle):
        coord = decode(req.addr, self.mmap)
        if self.channels[coord.channel].admit(req, coord):
            self.admitted += 1
            return True
        return False

    def step(self, cycle):
        issued = False
        for ch in self.channels:
            if ch.schedule(cycle) is not None:
                issued = True
        return issued

    @property
    def idle(self):
        return all(not ch.pending for ch in self.channels)

    def next_event(self, cycle):
        events = [t for ch in self.channels if (t := ch.next_event(cycle)) is not None]
        return min(events) if events else None

    @property
    def total_cycles(self):
        return max((ch.last_data_end for ch in self.channels), default=0)

    def metrics(self, config_digest=""):
        """Collect the counters of a finished run into `RunMetrics`."""
        counts = {k: sum(ch.counts[k] for ch in self.channels) for k in ("ACT", "RD", "WR", "PRE")}
        cas = counts["RD"] + counts["WR"]
        return RunMetrics(
            act_count=counts["ACT"],
            cas_count=cas,
            pre_count=counts["PRE"],
            read_count=counts["RD"],
            write_count=counts["WR"],
            requests=self.admitted,
            total_cycles=self.total_cycles,
            data_busy_cycles=tuple(ch.data_busy_cycles for ch in self.channels),
            achieved_bytes=cas * self.config.bytes_per_cas,
            clock_mhz=self.config.clock_mhz,
            config_digest=config_digest,
        )


# ======================================================================
# Co-simulation
# ======================================================================
def simulate(stage, system, max_cycles=None, config_digest="", credits=None):
    """
    Run a front-end stage against the memory system until every request completes.

    Each cycle the stage ticks first (its forwards are admissions into the
    controller queues), then every channel schedules in index order. Cycles in
    which nothing can happen are skipped.

    Parameters
    ----------
    stage : ReorderStage or PassthroughStage
        Front end holding the input stream.
    system : MemorySystem
        The controller and DRAM.
    max_cycles : int, optional
        Safety bound.
    config_digest : str, optional
        Copied into the returned metrics.
    credits : credit model, optional
        Gate placed between the stage and the controller, e.g. a
        `DelayedCredits` wrapping ``system``. Defaults to ``system`` itself.

    Returns
    -------
    tuple
        ``(commands, RunMetrics)``.

    Raises
    ------
    SimulationError
        If no progress is possible or ``max_cycles`` is exceeded.
    """
    gate = system if credits is None else credits
    gate_event = getattr(gate, "next_event", None) if gate is not system else None
    cycle = 0
    while True:
        moved = stage.tick(cycle, gate)
        issued = system.step(cycle)
        if stage.done and system.idle:
            break
        if max_cycles is not None and cycle >= max_cycles:
            raise SimulationError(f"simulation exceeded {max_cycles} cycles")
        if moved or issued:
            cycle += 1
            continue
        events = [system.next_event(cycle), gate_event(cycle) if gate_event else None]
        events = [t for t in events if t is not None and t > cycle]
        if not events:
            raise SimulationError(
                f"deadlock at cycle {cycle}: {stage.buffered} buffered, "
                f"{sum(len(ch.pending) for ch in system.channels)} pending"
            )
        cycle = min(events)
    metrics = system.metrics(config_digest)
    debug_(
        f"{type(stage).__name__}: {metrics.requests} requests, {metrics.act_count} ACT, "
        f"{metrics.cas_count} CAS, {metrics.total_cycles} cycles"
    )
    return system.commands, metrics


def simulate_pipeline(
    stream,
    pipeline="mars",
    mars_config=None,
    dram_config=None,
    mmap=None,
    max_cycles=None,
    config_digest="",
    credits=None,
):
    """
    Build the front end for ``pipeline`` (``"mars"`` or ``"baseline"``) and simulate.

    ``credits`` is called with the new `MemorySystem` and must return the gate
    to place in front of it (see `simulate`).

    Returns
    -------
    tuple
        ``(commands, RunMetrics, stage)``; the stage gives access to the forwarded
        order and stall counters.

    Raises
    ------
    ConfigError
        For an unknown pipeline or an address beyond ``memory_map.addr_bits``.
    """
    system = MemorySystem(dram_config, mmap)
    # whole-stream address check before any cycle runs
    decode_array(stream.addr, system.mmap)
    if pipeline == "mars":
        stage = ReorderStage(stream, mars_config)
    elif pipeline == "baseline":
        stage = PassthroughStage(stream)
    else:
        raise ConfigError(f"pipeline must be 'baseline' or 'mars', got {pipeline!r}")
    gate = credits(system) if credits is not None else None
    commands, metrics = simulate(stage, system, max_cycles, config_digest, gate)
    return commands, metrics, stage


# ======================================================================
# Protocol check
# ======================================================================
_BANK_PROTOCOL = re.compile(r"^P?(AC+P)*AC+$")
_TOKENS = {"ACT": "A", "RD": "C", "WR": "C", "PRE": "P"}


def check_protocol(commands, config):
    """
    Check a command trace for protocol and timing violations.

    Per bank the sequence must read ``PRE? (ACT CAS+ PRE)* ACT CAS+`` with CAS to
    the open row only; gaps must respect ``t_rcd`` and ``t_rp``; per channel one
    command per cycle and CAS at least ``burst_length / 2`` cycles apart.

    Returns
    -------
    list of str
        Violations; empty for a legal trace.
    """
    errors = []
    per_bank = defaultdict(list)
    last_cycle = {}
    last_cas = {}
    for cmd in commands:
        ch = cmd.channel
        if last_cycle.get(ch) is not None and cmd.cycle <= last_cycle[ch]:
            errors.append(f"channel {ch}: two commands at or before cycle {cmd.cycle}")
        last_cycle[ch] = cmd.cycle
        if cmd.kind in ("RD", "WR"):
            if ch in last_cas and cmd.cycle - last_cas[ch] < config.data_cycles:
                errors.append(f"channel {ch}: data bus double-booked at cycle {cmd.cycle}")
            last_cas[ch] = cmd.cycle
        per_bank[(ch, cmd.bank)].append(cmd)

    for (ch, bank), cmds in sorted(per_bank.items()):
        where = f"channel {ch} bank {bank}"
        tokens = "".join(_TOKENS.get(c.kind, "?") for c in cmds)
        if not _BANK_PROTOCOL.match(tokens):
            errors.append(f"{where}: illegal command sequence {tokens}")
        open_row = None
        prev = None
        for c in cmds:
            if c.kind == "ACT":
                if prev is not None and prev.kind == "PRE" and c.cycle - prev.cycle < config.t_rp:
                    errors.append(f"{where}: ACT at {c.cycle} violates t_rp")
                open_row = c.row
            elif c.kind in ("RD", "WR"):
                if c.row != open_row:
                    errors.append(f"{where}: {c.kind} at {c.cycle} to row {c.row} while row {open_row} is open")
                if prev is not None and prev.kind == "ACT" and c.cycle - prev.cycle < config.t_rcd:
                    errors.append(f"{where}: {c.kind} at {c.cycle} violates t_rcd")
            elif c.kind == "PRE":
                if prev is not None and c.row != open_row:
                    errors.append(f"{where}: PRE at {c.cycle} closes row {c.row} but row {open_row} is open")
                open_row = None
            prev = c
    return errors


# ======================================================================
# Command trace files
# ======================================================================
COMMAND_COLUMNS = ["cycle", "channel", "bank", "kind", "row", "column", "seq"]


def commands_frame(commands):
    """Return the command trace as a DataFrame (nullable ``column`` and ``seq``)."""
    df = pd.DataFrame(list(commands), columns=COMMAND_COLUMNS)
    for name in ("cycle", "channel", "bank", "row"):
        df[name] = df[name].astype("int64")
    for name in ("column", "seq"):
        df[name] = df[name].astype("Int64")
    return df


def write_command_trace(commands, path):
    """Write ``cycle,channel,bank,kind,row,column,seq`` lines; ACT/PRE leave column and seq empty."""
    commands_frame(commands).to_csv(path, index=False, lineterminator="\n", na_rep="")


def read_command_trace(source):
    """
    Read a command trace from a path, bytes content or URL.

    Returns
    -------
    list of DramCommand

    Raises
    ------
    TraceError
        On a wrong header, unknown command kind or malformed number.
    """
    fid, name = open_source(source, mode="r")
    label = name or "command trace"
    with fid:
        try:
            df = pd.read_csv(fid, dtype=str, keep_default_na=False)
        except pd.errors.EmptyDataError as e:
            raise TraceError(f"{label}: empty file (header expected)") from e
    if list(df.columns) != COMMAND_COLUMNS:
        raise TraceError(f"{label}: header must be {','.join(COMMAND_COLUMNS)}")
    bad = ~df["kind"].isin(_TOKENS)
    if bad.any():
        raise TraceError(f"{label}: unknown command kind {df['kind'][bad].iloc[0]!r}")

    def _opt(v):
        return int(v) if v != "" else None

    try:
        return [
            DramCommand(int(r.cycle), int(r.channel), int(r.bank), r.kind, int(r.row), _opt(r.column), _opt(r.seq))
            for r in df.itertuples(index=False)
        ]
    except ValueError as e:
        raise TraceError(f"{label}: malformed numeric field ({e})") from e
