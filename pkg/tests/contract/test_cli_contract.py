"""
Contract tests for the vsc command line.

Verifies exit codes, artifact file names, CSV headers and JSON documents
against the documented command surface. Commands run in-process through
click's CliRunner with a small-budget configuration.
"""

import csv
import json

import pytest
from click.testing import CliRunner

from vsc.config import save_run_config
from vsc.main import cli
from vsc.models.schemas import SCHEMA_VERSION

from tests.conftest import quick_run_config

pytestmark = pytest.mark.slow


def header(path):
    with path.open(newline="") as fh:
        return next(csv.reader(fh))


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    return save_run_config(quick_run_config(), tmp_path_factory.mktemp("config") / "quick.json")


@pytest.fixture(scope="module")
def synth_out(runner, config_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    result = runner.invoke(cli, ["synth", "--config", str(config_file), "--out", str(out)])
    assert result.exit_code == 0, result.output
    return out


class TestSynthContract:
    """Contract tests for 'vsc synth'"""

    def test_artifacts(self, synth_out):
        """Test that synth writes the schedule, design points, gain curves and manifest"""
        for name in ("schedule.json", "design_points.json", "gains_vs_stiffness.csv", "manifest.json"):
            assert (synth_out / name).is_file(), name

    def test_schedule_document(self, synth_out):
        """Test the required schedule fields"""
        schedule = json.loads((synth_out / "schedule.json").read_text())
        assert schedule["schema_version"] == SCHEMA_VERSION
        assert schedule["gain_names"] == ["K_b10", "K_b20"]
        assert len(schedule["coefficients"]) == 2
        assert all(len(row) == 3 for row in schedule["coefficients"])
        assert schedule["normalization"]["scale"] == 1.0
        assert len(schedule["design_points"]) == 3

    def test_gain_curves_header(self, synth_out):
        """Test the gains_vs_stiffness.csv columns"""
        assert header(synth_out / "gains_vs_stiffness.csv") == ["Zd", "kind", "K_b10", "K_b20"]

    def test_manifest(self, synth_out):
        """Test that the manifest records the command, seed, versions and artifacts"""
        document = manifest(synth_out)
        assert document["command"] == "synth"
        assert document["seed"] == 3
        assert document["exit_code"] == 0
        assert "schedule.json" in document["artifacts"]
        assert "manifest.json" not in document["artifacts"]
        assert {"vsc", "numpy", "scipy"} <= set(document["versions"])
        assert "timings" not in document
        assert "timings.json" in document["artifacts"]
        timings = json.loads((synth_out / "timings.json").read_text())
        assert timings["synthesis"] >= 0.0

    def test_byte_identical_rerun(self, runner, config_file, synth_out, tmp_path):
        """Test that the same seed reproduces schedule.json and manifest.json byte for byte"""
        result = runner.invoke(cli, ["synth", "--config", str(config_file), "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "schedule.json").read_bytes() == (synth_out / "schedule.json").read_bytes()
        assert (tmp_path / "manifest.json").read_bytes() == (synth_out / "manifest.json").read_bytes()

    def test_bad_config_suffix(self, runner, tmp_path):
        """Test that an unsupported config format exits with code 1"""
        path = tmp_path / "run.yaml"
        path.write_text("seed: 1\n")
        result = runner.invoke(cli, ["synth", "--config", str(path), "--out", str(tmp_path / "out")])
        assert result.exit_code == 1
        assert "unsupported config format" in result.output


class TestVerifyContract:
    """Contract tests for 'vsc verify'"""

    def test_outputs(self, runner, config_file, synth_out, tmp_path):
        """Test verification artifacts and a gate-consistent exit code"""
        schedule = synth_out / "schedule.json"
        result = runner.invoke(
            cli, ["verify", "--schedule", str(schedule), "--config", str(config_file), "--out", str(tmp_path), "--zd", "2.0"]
        )
        assert result.exit_code in (0, 2), result.output
        assert header(tmp_path / "verify_design.csv") == [
            "Zd", "evaluated_Zd", "clamped", "stable", "constraint", "achieved", "bound", "margin", "passed"
        ]
        summary = json.loads((tmp_path / "verify_summary.json").read_text())
        assert summary["design"]["count"] == 3
        assert summary["design"]["violations"] == 0
        assert summary["off_design"]["count"] == 4
        assert summary["passed"] == (result.exit_code == 0)
        assert manifest(tmp_path)["exit_code"] == result.exit_code

    def test_missing_schedule(self, runner, tmp_path):
        """Test that an unreadable schedule exits with code 1"""
        result = runner.invoke(cli, ["verify", "--schedule", str(tmp_path / "absent.json"), "--out", str(tmp_path)])
        assert result.exit_code == 1


class TestSimulateContract:
    """Contract tests for 'vsc simulate'"""

    def test_scheduled(self, runner, config_file, synth_out, tmp_path):
        """Test the trace, energy and metrics files of a scheduled run"""
        schedule = synth_out / "schedule.json"
        result = runner.invoke(
            cli, ["simulate", "--schedule", str(schedule), "--config", str(config_file), "--out", str(tmp_path)]
        )
        assert result.exit_code in (0, 2), result.output
        assert header(tmp_path / "trace_scheduled.csv") == [
            "t", "Zd", "phi_h", "tau_d", "tau_h", "e", "u_pre_sat", "u", "d", "n"
        ]
        assert header(tmp_path / "energy_scheduled.csv") == ["t", "W"]
        assert header(tmp_path / "metrics.csv") == ["method", "ME", "SSE", "MCO", "SNR"]
        with (tmp_path / "trace_scheduled.csv").open() as fh:
            assert sum(1 for _ in fh) == 1 + 1001

    def test_fixed_needs_stiffness(self, runner, synth_out, tmp_path):
        """Test that the fixed method without --zd is a usage error"""
        result = runner.invoke(
            cli, ["simulate", "--schedule", str(synth_out / "schedule.json"), "--method", "fixed", "--out", str(tmp_path)]
        )
        assert result.exit_code == 2
        assert "--zd" in result.output
        assert not (tmp_path / "manifest.json").exists()


class TestCompareContract:
    """Contract tests for 'vsc compare'"""

    def test_outputs(self, runner, config_file, synth_out, tmp_path):
        """Test the comparison document and both traces"""
        schedule = synth_out / "schedule.json"
        result = runner.invoke(
            cli, ["compare", "--schedule", str(schedule), "--config", str(config_file), "--out", str(tmp_path)]
        )
        assert result.exit_code in (0, 2), result.output
        for name in ("trace_scheduled.csv", "trace_pid.csv", "metrics.csv", "pid_baseline.json", "comparison.json"):
            assert (tmp_path / name).is_file(), name
        comparison = json.loads((tmp_path / "comparison.json").read_text())
        assert set(comparison["metrics"]) == {"scheduled", "pid"}
        assert set(comparison["winners"]) == {"me", "sse", "mco", "snr"}
        assert isinstance(comparison["pid_feasible"], bool)
        assert set(comparison["orderings"]) == {"sse_below_pid", "mco_below_pid", "mco_below_saturation", "snr_above_pid"}
        assert comparison["failed_orderings"] == [k for k, held in comparison["orderings"].items() if not held]
        assert comparison["passed"] == (result.exit_code == 0)
        assert manifest(tmp_path)["exit_code"] == result.exit_code

    def test_rerun_is_identical(self, runner, config_file, synth_out, tmp_path):
        """Test that the same seed reproduces comparison.json and the exit code"""
        schedule = synth_out / "schedule.json"
        runs = []
        for name in ("first", "second"):
            out = tmp_path / name
            result = runner.invoke(
                cli, ["compare", "--schedule", str(schedule), "--config", str(config_file), "--out", str(out)]
            )
            assert result.exit_code in (0, 2), result.output
            runs.append((result.exit_code, (out / "comparison.json").read_bytes()))
        assert runs[0] == runs[1]


class TestSweepContract:
    """Contract tests for 'vsc sweep-freq'"""

    def test_outputs(self, runner, config_file, synth_out, tmp_path):
        """Test one CSV per constraint and stiffness"""
        schedule = synth_out / "schedule.json"
        result = runner.invoke(
            cli,
            ["sweep-freq", "--schedule", str(schedule), "--config", str(config_file), "--out", str(tmp_path), "--zd", "0.6"],
        )
        assert result.exit_code == 0, result.output
        for name in ("error", "control", "disturbance", "noise", "passivity"):
            assert header(tmp_path / f"freq_{name}_Zd0.6.csv") == ["omega", "magnitude", "bound", "in_band"]
        summary = json.loads((tmp_path / "sweep_summary.json").read_text())
        assert summary["sweeps"][0]["zd"] == 0.6


class TestCliSurface:
    """Contract tests for the command group"""

    def test_commands_registered(self, runner):
        """Test that every subcommand is listed in --help"""
        result = runner.invoke(cli, ["--help"])
        assert result.exit_code == 0
        for command in ("synth", "verify", "simulate", "compare", "sweep-freq"):
            assert command in result.output

    def test_version(self, runner):
        """Test the version option"""
        result = runner.invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert "vsc" in result.output
