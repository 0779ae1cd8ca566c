# ======================================================================================
# Copyright (©) 2025 marssim developers.
# CeCILL-B FREE SOFTWARE LICENSE AGREEMENT
# See full LICENSE agreement in the root directory.
# ======================================================================================
# ruff: noqa: S101

import pytest
from conftest import dram_addr
from conftest import stream_of

from marssim.core.dram import DramCommand
from marssim.core.dram import DramConfig
from marssim.core.dram import MemorySystem
from marssim.core.dram import check_protocol
from marssim.core.dram import commands_frame
from marssim.core.dram import read_command_trace
from marssim.core.dram import simulate
from marssim.core.dram import simulate_pipeline
from marssim.core.dram import write_command_trace
from marssim.core.mars import DelayedCredits
from marssim.core.mars import MarsConfig
from marssim.core.mars import NoCredits
from marssim.core.mars import PassthroughStage
from marssim.core.metrics import cas_per_act_from_trace
from marssim.core.traffic import RequestStream
from marssim.core.traffic import generate_workload
from marssim.core.traffic import workload_preset
from marssim.core.utils import ConfigError
from marssim.core.utils import SimulationError
from marssim.core.utils import TraceError

GOLDEN = [
    DramCommand(0, 0, 0, "ACT", 1),
    DramCommand(15, 0, 0, "RD", 1, 0, 0),
    DramCommand(19, 0, 0, "RD", 1, 2, 2),
    DramCommand(20, 0, 0, "PRE", 1),
    DramCommand(35, 0, 0, "ACT", 2),
    DramCommand(50, 0, 0, "RD", 2, 1, 1),
    DramCommand(54, 0, 0, "RD", 2, 3, 3),
]

GOLDEN_CSV = """\
cycle,channel,bank,kind,row,column,seq
0,0,0,ACT,1,,
15,0,0,RD,1,0,0
19,0,0,RD,1,2,2
20,0,0,PRE,1,,
35,0,0,ACT,2,,
50,0,0,RD,2,1,1
54,0,0,RD,2,3,3
"""


def _two_row_stream():
    return stream_of([dram_addr(row=1, column=0), dram_addr(row=2, column=1), dram_addr(row=1, column=2), dram_addr(row=2, column=3)])


def _thrash_stream(rows=8, per_row=4):
    return stream_of([dram_addr(bank=0, row=r, column=i) for i in range(per_row) for r in range(rows)])


class TestDramConfig:
    """Tests for DRAM configuration."""

    def test_defaults(self):
        """Test the default timing and organisation."""
        cfg = DramConfig()
        assert (cfg.channels, cfg.banks, cfg.t_cas, cfg.t_rcd, cfg.t_rp) == (2, 8, 15, 15, 15)
        assert cfg.data_cycles == 4
        assert cfg.bytes_per_cas == 16

    @pytest.mark.parametrize(
        ("kwargs", "match"),
        [
            ({"burst_length": 7}, "burst_length"),
            ({"t_rp": 0}, "timing"),
            ({"pending_queue_depth": 0}, "pending_queue_depth"),
            ({"clock_mhz": 0}, "positive"),
        ],
    )
    def test_invalid(self, kwargs, match):
        """Test rejection of invalid values."""
        with pytest.raises(ConfigError, match=match):
            DramConfig(**kwargs)

    def test_from_dict(self):
        """Test construction from a config table."""
        assert DramConfig.from_dict({"t_cas": 11}).t_cas == 11
        with pytest.raises(ConfigError, match="Unknown key"):
            DramConfig.from_dict({"tcas": 11})


class TestController:
    """Tests for the FR-FCFS controller."""

    def test_golden_trace(self):
        """Row hits are served before the older miss; the row closes once no hit is queued."""
        commands, metrics, _ = simulate_pipeline(_two_row_stream(), "baseline")
        assert commands == GOLDEN
        assert metrics.total_cycles == 73
        assert (metrics.act_count, metrics.cas_count, metrics.pre_count) == (2, 4, 1)
        assert metrics.cas_per_act == 2.0
        assert metrics.data_busy_cycles == (16, 0)
        assert metrics.achieved_bytes == 64
        assert check_protocol(commands, DramConfig()) == []

    def test_golden_trace_file(self, tmp_path):
        """Test the golden trace written to a file."""
        commands, _, _ = simulate_pipeline(_two_row_stream(), "baseline")
        path = tmp_path / "commands.csv"
        write_command_trace(commands, path)
        assert path.read_text() == GOLDEN_CSV

    def test_single_request(self):
        """Test the timing of one read."""
        commands, metrics, _ = simulate_pipeline(stream_of([dram_addr(bank=3, row=7)]), "baseline")
        assert [(c.cycle, c.kind) for c in commands] == [(0, "ACT"), (15, "RD")]
        assert metrics.total_cycles == 34

    def test_write_request(self):
        """Test the command of one write."""
        commands, metrics, _ = simulate_pipeline(stream_of([dram_addr(row=1)], writes=[True]), "baseline")
        assert commands[-1].kind == "WR"
        assert (metrics.read_count, metrics.write_count) == (0, 1)

    def test_one_row_needs_one_activation(self):
        """Test that one row needs a single activation."""
        stream = stream_of([dram_addr(bank=2, row=3, column=i) for i in range(32)])
        commands, metrics, _ = simulate_pipeline(stream, "baseline")
        assert (metrics.act_count, metrics.cas_count, metrics.pre_count) == (1, 32, 0)
        assert check_protocol(commands, DramConfig()) == []

    def test_channels_run_in_parallel(self):
        """Test that the two channels work in parallel."""
        stream = stream_of([dram_addr(channel=0, row=1), dram_addr(channel=1, row=1)])
        commands, metrics, _ = simulate_pipeline(stream, "baseline")
        assert [(c.cycle, c.channel, c.kind) for c in commands if c.kind == "ACT"] == [(0, 0, "ACT"), (1, 1, "ACT")]
        assert metrics.data_busy_cycles == (4, 4)
        assert metrics.total_cycles == 35

    def test_shallow_queue_thrashes_rows(self):
        """Test row thrashing with a shallow pending queue."""
        shallow = DramConfig(pending_queue_depth=2)
        _, deep, _ = simulate_pipeline(_thrash_stream(), "baseline")
        commands, metrics, _ = simulate_pipeline(_thrash_stream(), "baseline", dram_config=shallow)
        assert metrics.act_count >= 16
        assert metrics.act_count > deep.act_count
        assert metrics.achieved_bandwidth < deep.achieved_bandwidth
        assert check_protocol(commands, shallow) == []

    def test_reorder_stage_saves_activations(self):
        """Test that the reorder stage saves activations."""
        cfg = DramConfig(pending_queue_depth=2)
        _, base, _ = simulate_pipeline(_thrash_stream(), "baseline", dram_config=cfg)
        commands, mars, stage = simulate_pipeline(_thrash_stream(), "mars", MarsConfig(), cfg)
        assert mars.act_count <= 16 < base.act_count
        assert mars.cas_per_act > base.cas_per_act
        assert mars.total_cycles < base.total_cycles
        assert mars.cas_count == base.cas_count == 32
        assert check_protocol(commands, cfg) == []
        assert sorted(stage.output_stream().seq.tolist()) == list(range(32))

    def test_single_slot_reorder_equals_baseline(self):
        """Test that a one-slot stage matches the baseline."""
        specs, tree = workload_preset("WL5", 0.02)
        _, merged = generate_workload(specs, tree, seed=1)
        base, _, _ = simulate_pipeline(merged, "baseline")
        mars, _, _ = simulate_pipeline(merged, "mars", MarsConfig(capacity=1))
        assert mars == base

    def test_empty_stream(self):
        """Test an empty stream."""
        commands, metrics, _ = simulate_pipeline(RequestStream.empty(), "mars")
        assert commands == []
        assert metrics.total_cycles == 0
        assert metrics.cas_per_act == 0.0
        assert metrics.bandwidth_efficiency == 0.0

    def test_delayed_gate_shifts_time(self):
        """Test that a delayed gate shifts every command."""
        stream = stream_of([dram_addr(row=4)])
        commands, metrics, _ = simulate_pipeline(
            stream, "baseline", credits=lambda system: DelayedCredits(system, 100)
        )
        assert [(c.cycle, c.kind) for c in commands] == [(100, "ACT"), (115, "RD")]
        assert metrics.total_cycles == 134

    def test_unknown_pipeline(self):
        """Test an unknown pipeline name."""
        with pytest.raises(ConfigError, match="pipeline"):
            simulate_pipeline(RequestStream.empty(), "fifo")

    def test_address_beyond_map_width(self):
        """Test that a request above the 36-bit map is rejected before simulation."""
        stream = stream_of([dram_addr(row=1), 1 << 36])
        with pytest.raises(ConfigError, match="addr_bits=36"):
            simulate_pipeline(stream, "mars")

    def test_map_mismatch(self):
        """Test a memory map that does not fit the DRAM."""
        with pytest.raises(ConfigError, match="dram.channels"):
            MemorySystem(DramConfig(channels=4))

    def test_max_cycles(self):
        """Test the cycle limit."""
        with pytest.raises(SimulationError, match="exceeded 5 cycles"):
            simulate_pipeline(_two_row_stream(), "baseline", max_cycles=5)

    def test_deadlock(self):
        """Test detection of a stalled pipeline."""
        system = MemorySystem()
        with pytest.raises(SimulationError, match="deadlock"):
            simulate(PassthroughStage(_two_row_stream()), system, credits=NoCredits())


class TestProtocolCheck:
    """Tests for the DRAM timing checker."""

    cfg = DramConfig()

    @pytest.mark.parametrize(
        ("commands", "match"),
        [
            ([DramCommand(0, 0, 0, "RD", 1, 0, 0)], "illegal command sequence C"),
            ([DramCommand(0, 0, 0, "ACT", 1), DramCommand(5, 0, 0, "RD", 1, 0, 0)], "violates t_rcd"),
            (
                [
                    DramCommand(0, 0, 0, "ACT", 1),
                    DramCommand(15, 0, 0, "RD", 1, 0, 0),
                    DramCommand(16, 0, 0, "PRE", 1),
                    DramCommand(20, 0, 0, "ACT", 2),
                ],
                "violates t_rp",
            ),
            ([DramCommand(0, 0, 0, "ACT", 1), DramCommand(15, 0, 0, "RD", 2, 0, 0)], "while row 1 is open"),
            (
                [
                    DramCommand(0, 0, 0, "ACT", 1),
                    DramCommand(1, 0, 1, "ACT", 1),
                    DramCommand(15, 0, 0, "RD", 1, 0, 0),
                    DramCommand(16, 0, 1, "RD", 1, 0, 1),
                ],
                "double-booked",
            ),
            ([DramCommand(0, 0, 0, "ACT", 1), DramCommand(0, 0, 1, "ACT", 1)], "two commands"),
        ],
    )
    def test_violations(self, commands, match):
        """Test each timing violation."""
        errors = check_protocol(commands, self.cfg)
        assert any(match in e for e in errors), errors

    def test_channels_are_independent(self):
        """Test that timing is checked per channel."""
        commands = [
            DramCommand(0, 0, 0, "ACT", 1),
            DramCommand(0, 1, 0, "ACT", 1),
            DramCommand(15, 0, 0, "RD", 1, 0, 0),
            DramCommand(15, 1, 0, "RD", 1, 0, 1),
        ]
        assert check_protocol(commands, self.cfg) == []


class TestCommandTrace:
    """Tests for DRAM command trace files."""

    def test_round_trip(self, tmp_path):
        """Test writing and reading back a command trace."""
        commands, metrics, _ = simulate_pipeline(_thrash_stream(), "mars", dram_config=DramConfig(pending_queue_depth=2))
        path = tmp_path / "mars.csv"
        write_command_trace(commands, path)
        loaded = read_command_trace(path)
        assert loaded == commands
        assert cas_per_act_from_trace(loaded) == metrics.cas_per_act
        assert cas_per_act_from_trace(commands_frame(commands)) == metrics.cas_per_act

    def test_read_from_bytes(self):
        """Test reading a command trace from bytes."""
        commands = read_command_trace(GOLDEN_CSV.encode())
        assert commands == GOLDEN

    @pytest.mark.parametrize(
        ("content", "match"),
        [
            (b"cycle,channel,bank,cmd,row,column,seq\n", "header"),
            (b"cycle,channel,bank,kind,row,column,seq\n0,0,0,REF,1,,\n", "unknown command kind"),
            (b"cycle,channel,bank,kind,row,column,seq\nx,0,0,ACT,1,,\n", "malformed"),
        ],
    )
    def test_invalid(self, content, match):
        """Test rejection of invalid values."""
        with pytest.raises(TraceError, match=match):
            read_command_trace(content)
