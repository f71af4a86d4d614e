"""Unit tests for run-config files and seed derivation"""

import math
from pathlib import Path

import pytest
from pydantic import ValidationError

from vsc.config import load_run_config, resolve_run_config, save_run_config, stage_seed
from vsc.errors import ConfigError
from vsc.models.schemas import RunConfig, SimScenario

DEFAULT_TOML = Path(__file__).resolve().parents[2] / "configs" / "default.toml"


class TestRunConfigFiles:
    """Test suite for loading and saving run configurations"""

    def test_default_toml_matches_defaults(self):
        """Test that the shipped TOML spells out the built-in defaults"""
        config = load_run_config(DEFAULT_TOML)
        defaults = RunConfig()
        assert config.plant == defaults.plant
        assert config.template == defaults.template
        assert config.synthesis == defaults.synthesis
        assert config.verify == defaults.verify
        assert config.pid == defaults.pid
        assert config.constraints.omega_e == pytest.approx(12 * math.pi)
        assert config.constraints.omega_n == pytest.approx(40 * math.pi)
        assert config.scenario.disturbance.bandwidth == pytest.approx(20 * math.pi)
        assert config.weight.omega is None

    def test_json_round_trip(self, quick_config, tmp_path):
        """Test that a saved config loads back equal"""
        path = save_run_config(quick_config, tmp_path / "nested" / "run.json")
        assert load_run_config(path) == quick_config

    def test_unsupported_suffix(self, tmp_path):
        """Test that only .json and .toml files are accepted"""
        path = tmp_path / "run.yaml"
        path.write_text("seed: 1\n")
        with pytest.raises(ConfigError):
            load_run_config(path)

    def test_missing_file(self, tmp_path):
        """Test that an unreadable file raises ConfigError"""
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "absent.toml")

    def test_malformed_toml(self, tmp_path):
        """Test that a TOML syntax error raises ConfigError"""
        path = tmp_path / "run.toml"
        path.write_text("seed = \n")
        with pytest.raises(ConfigError):
            load_run_config(path)

    def test_unknown_key(self, tmp_path):
        """Test that an unknown setting fails validation"""
        path = tmp_path / "run.toml"
        path.write_text("seed = 1\n[plant]\nspring = 2.0\n")
        with pytest.raises(ValidationError):
            load_run_config(path)

    def test_invalid_value(self, tmp_path):
        """Test that a non-positive stiffness fails validation"""
        path = tmp_path / "run.json"
        path.write_text('{"plant": {"k_s": -1.0}}')
        with pytest.raises(ValidationError):
            load_run_config(path)

    def test_seed_override(self):
        """Test that an explicit seed replaces the config seed"""
        assert resolve_run_config(None, seed=7).seed == 7


class TestSchemas:
    """Test suite for scenario and template validation"""

    def test_segments_must_start_at_zero(self):
        """Test that the first stiffness segment starts at t=0"""
        with pytest.raises(ValidationError):
            SimScenario(segments=[{"start": 1.0, "zd": 0.5}])

    def test_segments_must_be_ordered(self):
        """Test that segment starts strictly increase"""
        with pytest.raises(ValidationError):
            SimScenario(segments=[{"start": 0.0, "zd": 0.5}, {"start": 2.0, "zd": 0.3}, {"start": 2.0, "zd": 0.4}])

    def test_improper_template(self):
        """Test that num_order > den_order is rejected"""
        with pytest.raises(ValidationError):
            RunConfig(template={"den_order": 0, "num_order": 1})

    def test_chirp_band(self):
        """Test that a chirp motion needs f0 < f1"""
        with pytest.raises(ValidationError):
            RunConfig(scenario={"motion": {"kind": "chirp", "f0": 5.0, "f1": 5.0}})


class TestStageSeeds:
    """Test suite for per-stage seed derivation"""

    def test_deterministic(self):
        """Test that the same seed and stage always give the same value"""
        assert stage_seed(3, "scenario") == stage_seed(3, "scenario")

    def test_distinct_per_stage_and_seed(self):
        """Test that stages and top-level seeds are decorrelated"""
        values = {stage_seed(s, stage) for s in (0, 1) for stage in ("scenario", "pid", "design-point-0")}
        assert len(values) == 6

    def test_fits_32_bits(self):
        """Test that derived seeds are valid 32-bit generator seeds"""
        assert 0 <= stage_seed(2**40, "refine") < 2**32
