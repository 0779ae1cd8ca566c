# ======================================================================================
# Copyright (©) 2025 marssim developers.
# CeCILL-B FREE SOFTWARE LICENSE AGREEMENT
# See full LICENSE agreement in the root directory.
# ======================================================================================
"""
Page-grouping reorder stage placed between the request sources and the memory controller.

Three structures make up the state:

- a request queue of ``capacity`` slots with an occupancy bitmap and one ``next``
  link per slot, so each page's requests form a chronological chain;
- a set-associative page table (``sets`` x ``ways``) whose entries hold the
  head and tail slot of a page chain;
- a FIFO of table entries in the order their pages first arrived.

Forwarding always drains the oldest page first. Only page numbers are used, the
stage knows nothing of channels, banks or rows.

>>> from marssim.core.traffic import MemoryRequest
>>> state = MarsState(MarsConfig(capacity=8, sets=4, ways=2))
>>> for seq, addr in enumerate([0x0000, 0x1000, 0x0040]):
...     _ = state.try_insert(MemoryRequest(seq, addr, False, "texture", 0))
>>> [hex(state.forward().addr) for _ in range(3)]
['0x0', '0x40', '0x1000']
"""

__all__ = [
    "DelayedCredits",
    "MarsConfig",
    "MarsState",
    "NoCredits",
    "PassthroughStage",
    "PeriodicCredits",
    "PhyPageEntry",
    "RandomCredits",
    "ReorderStage",
    "StallReason",
    "UnlimitedCredits",
    "baseline_passthrough",
    "run_reorder",
    "run_stage",
]

from collections import Counter
from collections import deque
from dataclasses import asdict
from dataclasses import dataclass
from enum import Enum

import numpy as np

from marssim.core.addressing import DEFAULT_PAGE_OFFSET_BITS
from marssim.core.traffic import RequestStream
from marssim.core.utils import ConfigError
from marssim.core.utils import SimulationError
from marssim.core.utils import debug_


class StallReason(str, Enum):
    """Why an insertion was refused. A stall leaves the state unchanged."""

    QUEUE_FULL = "queue_full"
    PAGE_DRAINING = "page_draining"
    SET_CONFLICT = "set_conflict"
    ORDER_Q_FULL = "order_q_full"


# ======================================================================
# Configuration
# ======================================================================
@dataclass(frozen=True)
class MarsConfig:
    """
    Geometry and rates of the reorder stage.

    Parameters
    ----------
    capacity : int
        Request queue slots (``Q``).
    sets, ways : int
        Page table geometry.
    insert_rate, forward_rate : int
        Insertions and forwards attempted per tick.
    drain_cap : int, optional
        Maximum consecutive forwards from one page before it is sent to the back
        of the page FIFO. None means unlimited.
    page_offset_bits : int
        Page size used to group requests.
    order_q_capacity : int, optional
        Page FIFO capacity, at most ``sets * ways`` (the default).
    """

    capacity: int = 512
    sets: int = 64
    ways: int = 2
    insert_rate: int = 1
    forward_rate: int = 1
    drain_cap: int | None = None
    page_offset_bits: int = DEFAULT_PAGE_OFFSET_BITS
    order_q_capacity: int | None = None

    def __post_init__(self):
        for name in ("capacity", "sets", "ways", "insert_rate", "forward_rate"):
            if getattr(self, name) < 1:
                raise ConfigError(f"mars.{name} must be >= 1, got {getattr(self, name)}")
        if self.drain_cap is not None and self.drain_cap < 1:
            raise ConfigError(f"mars.drain_cap must be >= 1 or unset, got {self.drain_cap}")
        if self.order_q_capacity is not None and not 1 <= self.order_q_capacity <= self.entries:
            raise ConfigError(
                f"mars.order_q_capacity must be in [1, sets*ways={self.entries}], got {self.order_q_capacity}"
            )

    @property
    def entries(self):
        return self.sets * self.ways

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        unknown = sorted(set(data) - set(cls.__dataclass_fields__))
        if unknown:
            raise ConfigError(f"Unknown key(s) in [mars]: {unknown}")
        return cls(**data)

    def to_dict(self):
        return asdict(self)


# ======================================================================
# State
# ======================================================================
@dataclass
class PhyPageEntry:
    """Page table entry: one chronological chain of queued requests."""

    page: int
    head: int
    tail: int
    count: int
    set_index: int
    way: int
    draining: bool = False
    streak: int = 0


class MarsState:
    """
    Mutable reorder state.

    Parameters
    ----------
    config : MarsConfig, optional
        Geometry; keyword arguments build one when omitted.
    """

    def __init__(self, config=None, **kwargs):
        self.config = config if config is not None else MarsConfig(**kwargs)
        cfg = self.config
        self.slots = [None] * cfg.capacity
        self._next = [-1] * cfg.capacity
        self._occ = 0
        self._full = (1 << cfg.capacity) - 1
        self.table = [[None] * cfg.ways for _ in range(cfg.sets)]
        self.order_q = deque()
        self._order_cap = cfg.order_q_capacity or cfg.entries
        self._shift = cfg.page_offset_bits

    def __len__(self):
        return self._occ.bit_count()

    @property
    def live(self):
        return len(self)

    @property
    def n_entries(self):
        return len(self.order_q)

    def _free_slot(self):
        inv = ~self._occ & self._full
        if not inv:
            return None
        return (inv & -inv).bit_length() - 1

    def _lookup(self, page):
        for e in self.table[page % self.config.sets]:
            if e is not None and e.page == page:
                return e
        return None

    # ----------------------------------------------------------------------------------
    # Operations
    # ----------------------------------------------------------------------------------
    def try_insert(self, req):
        """
        Insert a request.

        Returns
        -------
        StallReason or None
            None when accepted. On a stall nothing is modified.
        """
        slot = self._free_slot()
        if slot is None:
            return StallReason.QUEUE_FULL

        page = req.addr >> self._shift
        entry = self._lookup(page)
        if entry is not None:
            if entry.draining:
                return StallReason.PAGE_DRAINING
            self._next[entry.tail] = slot
            entry.tail = slot
            entry.count += 1
        else:
            set_index = page % self.config.sets
            ways = self.table[set_index]
            try:
                way = ways.index(None)
            except ValueError:
                return StallReason.SET_CONFLICT
            if len(self.order_q) >= self._order_cap:
                return StallReason.ORDER_Q_FULL
            entry = PhyPageEntry(page, slot, slot, 1, set_index, way)
            ways[way] = entry
            self.order_q.append(entry)

        self.slots[slot] = req
        self._next[slot] = -1
        self._occ |= 1 << slot
        return None

    def peek(self):
        """Return the request `forward` would return, without removing it."""
        if not self.order_q:
            return None
        return self.slots[self.order_q[0].head]

    def forward(self):
        """
        Remove and return the oldest request of the oldest page, or None when empty.
        """
        if not self.order_q:
            return None
        entry = self.order_q[0]
        slot = entry.head
        req = self.slots[slot]
        nxt = self._next[slot]
        self.slots[slot] = None
        self._next[slot] = -1
        self._occ &= ~(1 << slot)

        entry.count -= 1
        entry.draining = True
        entry.streak += 1
        if entry.count == 0:
            self.table[entry.set_index][entry.way] = None
            self.order_q.popleft()
        else:
            entry.head = nxt
            cap = self.config.drain_cap
            if cap is not None and entry.streak >= cap:
                self.order_q.popleft()
                entry.draining = False
                entry.streak = 0
                self.order_q.append(entry)
        return req

    # ----------------------------------------------------------------------------------
    # Inspection
    # ----------------------------------------------------------------------------------
    def _chain(self, entry, limit):
        slots = []
        slot = entry.head
        while slot != -1 and len(slots) <= limit:
            slots.append(slot)
            slot = self._next[slot]
        return slots

    def snapshot(self):
        """
        Text dump of the state.

        The first line is ``mars capacity=<Q> live=<n> entries=<e>``; then one line
        per page in FIFO order::

            page=<page> set=<s> way=<w> count=<c> draining=<0|1> chain=<slot,slot,...>
        """
        lines = [f"mars capacity={self.config.capacity} live={self.live} entries={self.n_entries}"]
        for e in self.order_q:
            chain = ",".join(str(s) for s in self._chain(e, self.config.capacity))
            lines.append(
                f"page={e.page} set={e.set_index} way={e.way} count={e.count} "
                f"draining={int(e.draining)} chain={chain}"
            )
        return "\n".join(lines) + "\n"

    def check(self):
        """
        Verify the structural invariants.

        Returns
        -------
        list of str
            One message per violation; empty when the state is consistent.
        """
        cfg = self.config
        errors = []
        valid = [e for ways in self.table for e in ways if e is not None]
        if len(valid) > cfg.entries:
            errors.append(f"{len(valid)} valid entries exceed sets*ways={cfg.entries}")
        if len({e.page for e in valid}) != len(valid):
            errors.append("a page has more than one valid entry")
        if sorted(map(id, self.order_q)) != sorted(map(id, valid)):
            errors.append("page FIFO does not hold every valid entry exactly once")

        seen = set()
        total = 0
        for e in valid:
            if e.set_index != e.page % cfg.sets or self.table[e.set_index][e.way] is not e:
                errors.append(f"page {e.page} is not stored at set {e.page % cfg.sets}")
            if e.count < 1:
                errors.append(f"page {e.page} has count {e.count}")
            chain = self._chain(e, cfg.capacity)
            if len(chain) != e.count or not chain or chain[-1] != e.tail:
                errors.append(f"page {e.page}: chain of {len(chain)} slots, count {e.count}, tail {e.tail}")
            seqs = []
            for s in chain:
                if s in seen:
                    errors.append(f"slot {s} is reachable from two chains")
                seen.add(s)
                if not (self._occ >> s) & 1 or self.slots[s] is None:
                    errors.append(f"slot {s} in page {e.page} chain is not occupied")
                    continue
                if self.slots[s].addr >> self._shift != e.page:
                    errors.append(f"slot {s} holds a request of another page than {e.page}")
                seqs.append(self.slots[s].seq)
            if seqs != sorted(seqs):
                errors.append(f"page {e.page} chain is not in arrival order")
            total += e.count

        if total != self.live:
            errors.append(f"sum of counts {total} != occupied slots {self.live}")
        if self.live > cfg.capacity:
            errors.append(f"{self.live} live requests exceed capacity {cfg.capacity}")
        return errors


# ======================================================================
# Downstream credit models
# ======================================================================
class UnlimitedCredits:
    """Downstream that accepts every request."""

    exhausted = False

    def try_admit(self, req, cycle):
        return True


class NoCredits:
    """Downstream that never accepts anything."""

    exhausted = True

    def try_admit(self, req, cycle):
        return False


class PeriodicCredits:
    """Accepts only on cycles that are a multiple of ``period``."""

    exhausted = False

    def __init__(self, period):
        if period < 1:
            raise ConfigError(f"PeriodicCredits period must be >= 1, got {period}")
        self.period = period

    def try_admit(self, req, cycle):
        return cycle % self.period == 0


class RandomCredits:
    """Refuses each offer with probability ``stall_probability`` (seeded)."""

    exhausted = False

    def __init__(self, stall_probability, seed=0):
        if not 0.0 <= stall_probability < 1.0:
            raise ConfigError(f"stall_probability must be in [0, 1), got {stall_probability}")
        self.stall_probability = stall_probability
        self._rng = np.random.default_rng(seed)

    def try_admit(self, req, cycle):
        return self._rng.random() >= self.stall_probability


class DelayedCredits:
    """Refuses everything before cycle ``delay``, then defers to ``inner``."""

    def __init__(self, inner, delay):
        self.inner = inner
        self.delay = delay

    @property
    def exhausted(self):
        return self.inner.exhausted

    def try_admit(self, req, cycle):
        if cycle < self.delay:
            return False
        return self.inner.try_admit(req, cycle)

    def next_event(self, cycle):
        if cycle < self.delay:
            return self.delay
        inner = getattr(self.inner, "next_event", None)
        return inner(cycle) if inner is not None else None


# ======================================================================
# Stages
# ======================================================================
class _Stage:
    """Per-tick front end: pull from the input, push downstream through credits."""

    insert_rate = 1
    forward_rate = 1

    def __init__(self, stream):
        self._input = list(stream)
        self._pos = 0
        self.output = []
        self.stalls = Counter()
        self.credit_refusals = 0

    @property
    def accepted(self):
        return self._pos

    @property
    def buffered(self):
        raise NotImplementedError

    @property
    def done(self):
        return self._pos == len(self._input) and self.buffered == 0

    def _offer(self, req):
        raise NotImplementedError

    def _peek(self):
        raise NotImplementedError

    def _pop(self):
        raise NotImplementedError

    def tick(self, cycle, credits):
        """
        Run one tick: inserts first, then forwards.

        Returns
        -------
        bool
            True if any request moved.
        """
        progress = False
        n = len(self._input)
        for _ in range(self.insert_rate):
            if self._pos >= n:
                break
            reason = self._offer(self._input[self._pos])
            if reason is not None:
                self.stalls[reason.value] += 1
                break
            self._pos += 1
            progress = True

        for _ in range(self.forward_rate):
            req = self._peek()
            if req is None:
                break
            if not credits.try_admit(req, cycle):
                self.credit_refusals += 1
                break
            self._pop()
            self.output.append(req)
            progress = True
        return progress

    def output_stream(self):
        return RequestStream.from_requests(self.output)


class ReorderStage(_Stage):
    """Front end with the page-grouping reorder state."""

    def __init__(self, stream, config=None):
        super().__init__(stream)
        self.state = MarsState(config)
        self.insert_rate = self.state.config.insert_rate
        self.forward_rate = self.state.config.forward_rate

    @property
    def buffered(self):
        return self.state.live

    def _offer(self, req):
        return self.state.try_insert(req)

    def _peek(self):
        return self.state.peek()

    def _pop(self):
        return self.state.forward()


class PassthroughStage(_Stage):
    """In-order front end: a FIFO of ``capacity`` slots (one by default)."""

    def __init__(self, stream, capacity=1):
        super().__init__(stream)
        self.capacity = capacity
        self._fifo = deque()

    @property
    def buffered(self):
        return len(self._fifo)

    def _offer(self, req):
        if len(self._fifo) >= self.capacity:
            return StallReason.QUEUE_FULL
        self._fifo.append(req)
        return None

    def _peek(self):
        return self._fifo[0] if self._fifo else None

    def _pop(self):
        return self._fifo.popleft()


def run_stage(stage, credits=None, max_ticks=None):
    """
    Tick a stage until it is done.

    The loop also stops after an idle tick when the credit model is exhausted.

    Raises
    ------
    SimulationError
        When ``max_ticks`` elapse before the stage finishes.
    """
    credits = credits if credits is not None else UnlimitedCredits()
    cycle = 0
    while not stage.done:
        if max_ticks is not None and cycle >= max_ticks:
            raise SimulationError(f"stage not drained after {max_ticks} ticks ({stage.buffered} buffered)")
        progress = stage.tick(cycle, credits)
        cycle += 1
        if not progress and credits.exhausted:
            break
    debug_(
        f"{type(stage).__name__}: {len(stage.output)} forwarded in {cycle} ticks, "
        f"stalls={dict(stage.stalls)}, credit refusals={stage.credit_refusals}"
    )
    return stage


def run_reorder(stream, config=None, credits=None, max_ticks=None):
    """
    Pass a stream through the reorder stage.

    Parameters
    ----------
    stream : RequestStream or iterable of MemoryRequest
        Input in arrival order.
    config : MarsConfig, optional
        Stage geometry (defaults: 512 slots, 64 sets x 2 ways).
    credits : credit model, optional
        Downstream acceptance; unlimited by default.
    max_ticks : int, optional
        Safety bound on the number of ticks.

    Returns
    -------
    RequestStream
        The forwarded requests, keeping their input seq.
    """
    stage = run_stage(ReorderStage(stream, config), credits, max_ticks)
    return stage.output_stream()


def baseline_passthrough(stream, credits=None, max_ticks=None):
    """Identity on order, with the same credit gating as `run_reorder`."""
    stage = run_stage(PassthroughStage(stream), credits, max_ticks)
    return stage.output_stream()
