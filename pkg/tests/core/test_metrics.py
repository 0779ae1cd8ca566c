# ======================================================================================
# Copyright (©) 2025 marssim developers.
# CeCILL-B FREE SOFTWARE LICENSE AGREEMENT
# See full LICENSE agreement in the root directory.
# ======================================================================================
# ruff: noqa: S101

import numpy as np
import pytest
from conftest import page_stream

from marssim.core.metrics import REFERENCE_POINTS
from marssim.core.metrics import RunMetrics
from marssim.core.metrics import best_grouping_locality
from marssim.core.metrics import cas_per_act_from_trace
from marssim.core.metrics import compare
from marssim.core.metrics import group_by_page
from marssim.core.metrics import locality
from marssim.core.metrics import mean_run_length
from marssim.core.utils import ConfigError
from marssim.core.utils import ConfigMismatchError


def _metrics(act=10, cas=40, cycles=1000, busy=(160, 160), digest="abc"):
    return RunMetrics(
        act_count=act,
        cas_count=cas,
        pre_count=max(act - 1, 0),
        read_count=cas,
        write_count=0,
        requests=cas,
        total_cycles=cycles,
        data_busy_cycles=busy,
        achieved_bytes=cas * 16,
        config_digest=digest,
    )


class TestLocality:
    """Tests for windowed page locality."""

    def test_windows(self):
        """Test locality over several windows."""
        series = locality([1, 1, 2, 2, 1, 3, 4, 5], window_size=4)
        assert series.values.tolist() == [2.0, 1.0]
        assert series.lengths.tolist() == [4, 4]
        assert series.mean == 1.5

    def test_trailing_window_is_weighted(self):
        """Test the weight of the short trailing window."""
        series = locality([1, 1, 1, 1, 2, 3], window_size=4)
        assert series.values.tolist() == [4.0, 1.0]
        assert series.mean == pytest.approx((4 * 4 + 1 * 2) / 6)

    def test_window_larger_than_stream(self):
        """Test a window longer than the stream."""
        assert locality([7, 7, 8], window_size=100).mean == 1.5

    def test_empty(self):
        """Test an empty stream."""
        series = locality([], window_size=4)
        assert len(series) == 0
        assert series.mean is None

    def test_bounds(self):
        """Test that locality stays within its bounds."""
        pages = np.random.default_rng(0).integers(0, 50, 1000)
        for w in (1, 16, 128):
            values = locality(pages, w).values
            assert values.min() >= 1.0
            assert values.max() <= w

    def test_request_stream_input(self):
        """Test a RequestStream as input."""
        stream = page_stream([3, 3, 4, 4], line=1)
        assert locality(stream, 2).mean == 2.0

    def test_invalid_window(self):
        """Test rejection of a non-positive window."""
        with pytest.raises(ConfigError, match="window_size"):
            locality([1, 2], 0)


class TestGrouping:
    """Tests for page grouping."""

    def test_mean_run_length(self):
        """Test the mean same-page run length."""
        assert mean_run_length([1, 1, 2, 2, 2, 1]) == 2.0
        assert mean_run_length([]) == 0.0

    def test_group_by_page_stream(self):
        """Test the stable page grouping of a stream."""
        stream = page_stream([2, 1, 2, 3, 1])
        grouped = group_by_page(stream)
        assert grouped.seq.tolist() == [0, 2, 1, 4, 3]

    def test_grouping_never_lowers_locality(self):
        """Test that grouping does not lower locality."""
        pages = np.random.default_rng(1).integers(0, 20, 400)
        grouped = group_by_page(pages)
        for w in (8, 32, 128):
            assert locality(grouped, w).mean >= locality(pages, w).mean - 1e-12

    def test_grouping_is_not_always_optimal(self):
        """Arrival-order grouping can split a page across a window boundary."""
        pages = [1, 2, 2, 3]
        assert locality(group_by_page(pages), 2).mean == 1.0
        best, order = best_grouping_locality(pages, 2)
        assert best == 1.5
        assert locality(order, 2).mean == 1.5

    def test_best_grouping_limit(self):
        """Test the best locality reachable by grouping."""
        with pytest.raises(ConfigError, match="limited to 10"):
            best_grouping_locality(range(11), 4)
        assert best_grouping_locality([], 4) == (None, ())


class TestRunMetrics:
    """Tests for per-run DRAM metrics."""

    def test_ratios(self):
        """Test the derived ratios."""
        m = _metrics()
        assert m.cas_per_act == 4.0
        assert m.channels == 2
        assert m.channel_efficiency == (0.16, 0.16)
        assert m.bandwidth_efficiency == pytest.approx(0.16)
        assert m.achieved_bandwidth == pytest.approx(0.64)
        assert m.achieved_gbps == pytest.approx(0.64 * 1.6)

    def test_zero_counts(self):
        """Test the ratios of an empty run."""
        m = _metrics(act=0, cas=0, cycles=0, busy=(0, 0))
        assert m.cas_per_act == 0.0
        assert m.bandwidth_efficiency == 0.0
        assert m.achieved_bandwidth == 0.0

    def test_dict_round_trip(self):
        """Test conversion to and from a dict."""
        m = _metrics()
        data = m.to_dict()
        assert data["cas_per_act"] == 4.0
        assert data["data_busy_cycles"] == [160, 160]
        assert RunMetrics.from_dict(data) == m

    def test_cas_per_act_from_commands(self):
        """Test CAS per activation computed from a command trace."""
        class Cmd:
            def __init__(self, kind):
                self.kind = kind

        commands = [Cmd(k) for k in ("ACT", "RD", "RD", "WR", "PRE", "ACT", "RD")]
        assert cas_per_act_from_trace(commands) == 2.0
        assert cas_per_act_from_trace([]) == 0.0


class TestCompare:
    """Tests for comparing two runs."""

    def test_improvement(self):
        """Test the deltas of an improved run."""
        base = _metrics(act=20, cas=40, cycles=1000)
        mars = _metrics(act=10, cas=40, cycles=800, busy=(160, 160))
        rep = compare(base, mars)
        assert rep.cas_per_act_ratio == 2.0
        assert rep.cas_per_act_delta_pct == pytest.approx(100.0)
        assert rep.bandwidth_delta_pct == pytest.approx(25.0)
        assert rep.efficiency_delta_pct == pytest.approx(25.0)
        assert rep.channel_efficiency_delta_pct == pytest.approx((25.0, 25.0))
        assert rep.annotations == REFERENCE_POINTS

    def test_identical_runs(self):
        """Test the deltas of identical runs."""
        rep = compare(_metrics(), _metrics())
        assert rep.cas_per_act_delta_pct == 0.0
        assert rep.bandwidth_delta_pct == 0.0

    def test_config_mismatch(self):
        """Test comparing runs of different configurations."""
        with pytest.raises(ConfigMismatchError, match="different configurations"):
            compare(_metrics(digest="a" * 64), _metrics(digest="b" * 64))

    def test_report_dict(self):
        """Test the comparison as a dict."""
        data = compare(_metrics(), _metrics()).to_dict()
        assert isinstance(data["channel_efficiency_delta_pct"], list)
        assert data["annotations"]["cas_per_act_improvement_pct"] == 69.0
