# ======================================================================================
# Copyright (©) 2025 marssim developers.
# CeCILL-B FREE SOFTWARE LICENSE AGREEMENT
# See full LICENSE agreement in the root directory.
# ======================================================================================
# ruff: noqa: S101

import numpy as np
import pytest
from conftest import page_stream

from marssim.core.mars import DelayedCredits
from marssim.core.mars import MarsConfig
from marssim.core.mars import MarsState
from marssim.core.mars import NoCredits
from marssim.core.mars import PassthroughStage
from marssim.core.mars import PeriodicCredits
from marssim.core.mars import RandomCredits
from marssim.core.mars import ReorderStage
from marssim.core.mars import StallReason
from marssim.core.mars import UnlimitedCredits
from marssim.core.mars import baseline_passthrough
from marssim.core.mars import run_reorder
from marssim.core.mars import run_stage
from marssim.core.metrics import mean_run_length
from marssim.core.traffic import MemoryRequest
from marssim.core.utils import ConfigError
from marssim.core.utils import SimulationError


def _req(seq, page, line=0):
    return MemoryRequest(seq, (page << 12) + 64 * line, False, "texture", 0)


def _round_robin(n_pages, per_page):
    return page_stream([p for _ in range(per_page) for p in range(n_pages)])


class TestMarsConfig:
    """Tests for reorder stage configuration."""

    def test_defaults(self):
        """Test the default queue and table sizes."""
        cfg = MarsConfig()
        assert (cfg.capacity, cfg.sets, cfg.ways, cfg.entries) == (512, 64, 2, 128)

    @pytest.mark.parametrize(
        ("kwargs", "match"),
        [
            ({"capacity": 0}, "capacity"),
            ({"ways": 0}, "ways"),
            ({"drain_cap": 0}, "drain_cap"),
            ({"sets": 2, "ways": 2, "order_q_capacity": 5}, "order_q_capacity"),
        ],
    )
    def test_invalid(self, kwargs, match):
        """Test rejection of invalid values."""
        with pytest.raises(ConfigError, match=match):
            MarsConfig(**kwargs)

    def test_from_dict(self):
        """Test construction from a config table."""
        assert MarsConfig.from_dict({"capacity": 64}).capacity == 64
        with pytest.raises(ConfigError, match="Unknown key"):
            MarsConfig.from_dict({"size": 64})


class TestMarsState:
    """Tests for the queue and page table state machine."""

    def test_groups_pages_in_arrival_order(self):
        """Test that pages drain in arrival order."""
        state = MarsState(capacity=8, sets=4, ways=2)
        for seq, page in enumerate([1, 2, 1, 3, 2, 1]):
            assert state.try_insert(_req(seq, page)) is None
        out = [state.forward().seq for _ in range(6)]
        assert out == [0, 2, 5, 1, 4, 3]
        assert state.forward() is None
        assert state.live == 0

    def test_snapshot(self):
        """Test the state snapshot."""
        state = MarsState(capacity=4, sets=4, ways=2)
        state.try_insert(_req(0, 0))
        state.try_insert(_req(1, 1))
        state.try_insert(_req(2, 1, line=1))
        assert state.forward().seq == 0
        state.try_insert(_req(3, 2))
        assert state.snapshot() == (
            "mars capacity=4 live=3 entries=2\n"
            "page=1 set=1 way=0 count=2 draining=0 chain=1,2\n"
            "page=2 set=2 way=0 count=1 draining=0 chain=0\n"
        )
        assert state.check() == []

    def test_snapshot_marks_draining_page(self):
        """Test that the snapshot flags the draining page."""
        state = MarsState(capacity=4, sets=4, ways=2)
        state.try_insert(_req(0, 5))
        state.try_insert(_req(1, 5, line=1))
        state.forward()
        assert state.snapshot().splitlines()[1] == "page=5 set=1 way=0 count=1 draining=1 chain=1"

    def test_peek(self):
        """Test looking at the next request without removing it."""
        state = MarsState(capacity=4, sets=4, ways=2)
        assert state.peek() is None
        state.try_insert(_req(0, 3))
        assert state.peek().seq == 0
        assert state.live == 1

    def test_queue_full(self):
        """Test the stall on a full request queue."""
        state = MarsState(capacity=2, sets=4, ways=2)
        state.try_insert(_req(0, 0))
        state.try_insert(_req(1, 0))
        before = state.snapshot()
        assert state.try_insert(_req(2, 0)) is StallReason.QUEUE_FULL
        assert state.snapshot() == before

    def test_page_draining(self):
        """Test the stall on a request for the draining page."""
        state = MarsState(capacity=4, sets=4, ways=2)
        state.try_insert(_req(0, 0))
        state.try_insert(_req(1, 0))
        state.forward()
        before = state.snapshot()
        assert state.try_insert(_req(2, 0)) is StallReason.PAGE_DRAINING
        assert state.snapshot() == before
        state.forward()
        assert state.try_insert(_req(2, 0)) is None

    def test_set_conflict(self):
        """Test the stall on a full page table set."""
        state = MarsState(capacity=8, sets=4, ways=1)
        state.try_insert(_req(0, 0))
        assert state.try_insert(_req(1, 4)) is StallReason.SET_CONFLICT
        assert state.try_insert(_req(1, 5)) is None

    def test_order_queue_full(self):
        """Test the stall on a full page order queue."""
        state = MarsState(capacity=8, sets=4, ways=2, order_q_capacity=1)
        state.try_insert(_req(0, 0))
        assert state.try_insert(_req(1, 1)) is StallReason.ORDER_Q_FULL
        assert state.try_insert(_req(1, 0)) is None

    def test_lowest_free_slot_is_reused(self):
        """Test that freed queue slots are reused lowest first."""
        state = MarsState(capacity=4, sets=4, ways=2)
        for seq, page in enumerate([0, 1, 2]):
            state.try_insert(_req(seq, page))
        state.forward()
        state.try_insert(_req(3, 3))
        assert state.slots[0].seq == 3

    def test_drain_cap_rotates_pages(self):
        """Test that the drain cap moves on to the next page."""
        state = MarsState(capacity=8, sets=4, ways=2, drain_cap=2)
        for seq, page in enumerate([0, 0, 0, 1]):
            state.try_insert(_req(seq, page))
        assert [state.forward().seq for _ in range(4)] == [0, 1, 3, 2]

    def test_drain_cap_reopens_page(self):
        """Test that a capped page reopens at the back of the order."""
        state = MarsState(capacity=8, sets=4, ways=2, drain_cap=1)
        state.try_insert(_req(0, 0))
        state.try_insert(_req(1, 0))
        state.forward()
        assert state.try_insert(_req(2, 0)) is None
        assert [state.forward().seq for _ in range(2)] == [1, 2]

    def test_invariants_hold_under_random_traffic(self):
        """Test the state invariants under random traffic."""
        rng = np.random.default_rng(0)
        state = MarsState(capacity=16, sets=4, ways=2)
        seq = 0
        for _ in range(2000):
            if rng.random() < 0.6:
                if state.try_insert(_req(seq, int(rng.integers(0, 12)))) is None:
                    seq += 1
            else:
                state.forward()
            assert state.check() == []


class TestCredits:
    """Tests for downstream credit models."""

    def test_models(self):
        """Test each credit model."""
        req = _req(0, 0)
        assert UnlimitedCredits().try_admit(req, 7)
        assert not NoCredits().try_admit(req, 7)
        periodic = PeriodicCredits(4)
        assert [periodic.try_admit(req, c) for c in range(5)] == [True, False, False, False, True]
        delayed = DelayedCredits(UnlimitedCredits(), 3)
        assert [delayed.try_admit(req, c) for c in range(5)] == [False, False, False, True, True]
        assert delayed.next_event(1) == 3
        assert delayed.next_event(4) is None

    def test_random_is_seeded(self):
        """Test that random credits follow their seed."""
        a = RandomCredits(0.5, seed=4)
        b = RandomCredits(0.5, seed=4)
        req = _req(0, 0)
        assert [a.try_admit(req, c) for c in range(50)] == [b.try_admit(req, c) for c in range(50)]

    @pytest.mark.parametrize("p", [-0.1, 1.0])
    def test_random_probability_range(self, p):
        """Test rejection of a probability outside [0, 1]."""
        with pytest.raises(ConfigError, match="stall_probability"):
            RandomCredits(p)


class TestStages:
    """Tests for the pipeline stages."""

    def test_unlimited_downstream_keeps_order(self):
        """Test that an unthrottled stage keeps arrival order."""
        stream = _round_robin(8, 4)
        out = run_reorder(stream, MarsConfig())
        assert out.seq.tolist() == list(range(len(stream)))

    def test_delayed_downstream_groups_pages(self):
        """With 512 requests buffered before the first forward, pages drain whole."""
        stream = _round_robin(8, 64)
        assert mean_run_length(stream) == 1.0
        out = run_reorder(stream, MarsConfig(), DelayedCredits(UnlimitedCredits(), 512))
        assert mean_run_length(out) == 64.0
        assert sorted(out.seq.tolist()) == list(range(512))

    def test_per_page_order_is_kept(self):
        """Test that requests of one page keep their order."""
        stream = _round_robin(6, 20)
        out = run_reorder(stream, MarsConfig(capacity=32, sets=4, ways=2), RandomCredits(0.7, seed=2))
        pages = out.pages()
        for p in range(6):
            seqs = out.seq[pages == p].tolist()
            assert seqs == sorted(seqs)

    def test_no_credits_fills_queue(self):
        """Test that a blocked downstream fills the queue."""
        stage = run_stage(ReorderStage(page_stream([0] * 10), MarsConfig(capacity=4)), NoCredits())
        assert stage.accepted == 4
        assert stage.output == []
        assert stage.stalls["queue_full"] == 1
        assert stage.credit_refusals > 0

    def test_single_slot_matches_passthrough(self):
        """Test that a one-slot stage matches the passthrough."""
        stream = _round_robin(5, 6)
        credits = PeriodicCredits(3)
        a = run_reorder(stream, MarsConfig(capacity=1), credits)
        b = baseline_passthrough(stream, credits)
        assert a.seq.tolist() == b.seq.tolist() == list(range(len(stream)))

    def test_passthrough_capacity(self):
        """Test the passthrough stage capacity."""
        stage = run_stage(PassthroughStage(page_stream([0, 1, 2]), capacity=2), NoCredits())
        assert stage.accepted == 2

    def test_empty_stream(self):
        """Test an empty input stream."""
        assert len(run_reorder(page_stream([]))) == 0

    def test_max_ticks(self):
        """Test the tick limit."""
        with pytest.raises(SimulationError, match="not drained after 10 ticks"):
            run_reorder(_round_robin(4, 8), MarsConfig(), PeriodicCredits(1000), max_ticks=10)
