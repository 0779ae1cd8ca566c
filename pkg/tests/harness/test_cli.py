# ======================================================================================
# Copyright (©) 2025 marssim developers.
# CeCILL-B FREE SOFTWARE LICENSE AGREEMENT
# See full LICENSE agreement in the root directory.
# ======================================================================================
# ruff: noqa: S101

import logging

import pytest

from marssim.core.traffic import generate_workload
from marssim.core.traffic import workload_preset
from marssim.core.traffic import write_trace
from marssim.core.utils import logger
from marssim.harness.cli import main

TINY = """\
name = "tiny"
seeds = [1]
window_sizes = [128]

[workload]
name = "WL1"
scale = 0.03125
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.toml"
    path.write_text(TINY)
    return path


class TestCommands:
    """Tests for the command line subcommands."""

    def test_validate(self, tiny_config, capsys):
        """Test that validate prints the resolved configuration."""
        assert main(["validate", str(tiny_config)]) == 0
        assert capsys.readouterr().out.startswith("tiny: ok (config ")

    def test_run(self, tiny_config, output_root, capsys):
        """Test a run from the command line."""
        assert main(["-q", "run", str(tiny_config)]) == 0
        out = capsys.readouterr().out
        assert out.startswith("tiny seed 1: CAS/ACT x")
        assert (output_root / "results" / "tiny" / "record.json").exists()
        assert (output_root / "results" / "tiny" / "summary.csv").exists()

    def test_run_then_report(self, tiny_config, tmp_path, capsys):
        """Test a report over the output of a run."""
        out_dir = tmp_path / "out"
        assert main(["-q", "run", str(tiny_config), "--output", str(out_dir)]) == 0
        capsys.readouterr()
        assert main(["-q", "report", str(out_dir), "--output", str(tmp_path / "rep")]) == 0
        assert "tiny" in capsys.readouterr().out
        assert (tmp_path / "rep" / "cas_per_act_improvement.csv").exists()

    def test_sweep(self, tiny_config, output_root, capsys):
        """Test a parameter sweep from the command line."""
        assert main(["-q", "sweep", str(tiny_config), "--param", "Q", "--values", "1,512"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("Q=1, baseline CAS/ACT ")
        assert lines[1].startswith("Q=512, ")
        assert (output_root / "results" / "tiny_sweep_Q.csv").exists()

    def test_locality(self, tmp_path, capsys):
        """Test locality of an exported trace."""
        specs, tree = workload_preset("WL1", 1 / 32)
        sources, _ = generate_workload(specs, tree, seed=1)
        path = tmp_path / "source0.csv"
        write_trace(sources[0], path)
        assert main(["locality", str(path), "--window", "32,96"]) == 0
        assert capsys.readouterr().out == "window_size,locality\n32,32\n96,96\n"

    def test_verbosity(self, tiny_config):
        """Test the logging verbosity flags."""
        main(["-v", "validate", str(tiny_config)])
        assert logger.level == logging.DEBUG
        main(["-q", "validate", str(tiny_config)])
        assert logger.level == logging.WARNING


class TestExitCodes:
    """Tests for the exit code of each error class."""

    def test_config_error(self, tmp_path, capsys):
        """Test the exit code of an invalid configuration."""
        path = tmp_path / "bad.toml"
        path.write_text("seeds = [1, 1]\n")
        assert main(["validate", str(path)]) == 2
        assert capsys.readouterr().err.startswith("ConfigError: seeds must be distinct")

    def test_missing_config(self, tmp_path, capsys):
        """Test the exit code of a missing configuration file."""
        assert main(["run", str(tmp_path / "none.toml")]) == 2
        assert "ConfigError" in capsys.readouterr().err

    def test_trace_error(self, tmp_path, capsys):
        """Test the exit code of a malformed trace."""
        path = tmp_path / "trace.csv"
        path.write_text("seq,addr,rw\n")
        assert main(["locality", str(path)]) == 3
        assert capsys.readouterr().err.startswith("TraceError: ")

    def test_report_without_records(self, tmp_path):
        """Test a report over a directory without records."""
        assert main(["report", str(tmp_path)]) == 3

    def test_unknown_sweep_parameter(self, tiny_config, capsys):
        """Test a sweep over an unknown parameter."""
        assert main(["sweep", str(tiny_config), "--param", "t_cas", "--values", "11"]) == 2
        assert "Unknown sweep parameter" in capsys.readouterr().err

    def test_usage_error(self):
        """Test the exit code of a command line usage error."""
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2
