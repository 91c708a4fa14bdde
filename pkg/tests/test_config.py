"""Tests for YAML experiment configuration."""

import pytest
import yaml

from elasticity_imaging.config import (
    ConfigError,
    ExperimentConfig,
    from_dict,
    load_config,
    save_config,
)
from elasticity_imaging.constants import DEFAULT_CONTRAST_SWEEP, DEFAULT_NOISE_SWEEP


class TestLoadConfig:
    """Test loading and validation."""

    def test_defaults(self):
        config = load_config()
        assert config == ExperimentConfig()
        assert config.method == "statistical"
        assert config.solver.lam is None
        assert config.noise.delta_lateral == 0.09
        assert config.noise.delta_axial == 0.03

    def test_file_overrides(self, temp_dir):
        path = temp_dir / "experiment.yaml"
        path.write_text(
            "mesh:\n  target_nodes: 100\n"
            "solver:\n  lambda: 1e-3\n  method: baseline\n  acceleration: fista\n"
            "noise:\n  seeds: [1, 2]\n"
        )
        config = load_config(str(path))
        assert config.mesh.target_nodes == 100
        assert config.solver.lam == pytest.approx(1e-3)
        assert config.solver.acceleration == "fista"
        assert config.method == "baseline"
        assert config.noise.seeds == [1, 2]

    def test_empty_file(self, temp_dir):
        path = temp_dir / "empty.yaml"
        path.write_text("")
        assert load_config(str(path)) == ExperimentConfig()

    @pytest.mark.parametrize(
        "data",
        [
            {"meshes": {}},
            {"mesh": {"nodes": 10}},
            {"mesh": {"target_nodes": "many"}},
            {"mesh": {"target_nodes": 10.5}},
            {"output": {"render": "yes"}},
            {"phantom": {"center": [0.5]}},
            {"phantom": {"poisson_ratio": 0.5}},
            {"solver": {"outer_iters": 0}},
            {"solver": {"method": "magic"}},
            {"solver": {"lambda_grid": []}},
            {"sweep": {"axis": "time"}},
            {"sweep": {"axis": "noise", "values": [0.01, 1.0]}},
            {"sweep": {"axis": "contrast", "values": [30e3, -1.0]}},
            {"noise": {"seeds": []}},
            {"output": {"color_scale": [1.0, 0.0]}},
        ],
    )
    def test_invalid(self, data):
        with pytest.raises(ConfigError):
            from_dict(data)

    def test_invalid_yaml(self, temp_dir):
        path = temp_dir / "bad.yaml"
        path.write_text("mesh: [unclosed\n")
        with pytest.raises(ConfigError, match="Invalid YAML"):
            load_config(str(path))

    def test_not_a_mapping(self, temp_dir):
        path = temp_dir / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_missing_file(self, temp_dir):
        with pytest.raises(ConfigError):
            load_config(str(temp_dir / "missing.yaml"))


class TestResolvedConfig:
    """Test the resolved form written next to results."""

    def test_saved_config_reloads_identically(self, tiny_config, temp_dir):
        path = save_config(tiny_config, str(temp_dir))
        assert load_config(path) == tiny_config

    def test_resolved_fills_defaults(self):
        resolved = ExperimentConfig().resolved()
        assert resolved["solver"]["lambda"] is None
        assert resolved["sweep"]["values"] == DEFAULT_NOISE_SWEEP
        yaml.safe_dump(resolved)

    def test_contrast_sweep_defaults(self):
        config = from_dict({"sweep": {"axis": "contrast"}})
        assert config.sweep.resolved_values() == DEFAULT_CONTRAST_SWEEP

    def test_overrides(self):
        config = ExperimentConfig().with_overrides(
            seed=7, workers=2, method="baseline", directory="elsewhere"
        )
        assert config.noise.seeds == [7]
        assert config.sweep.workers == 2
        assert config.method == "baseline"
        assert config.output.directory == "elsewhere"

    def test_invalid_overrides(self):
        with pytest.raises(ConfigError):
            ExperimentConfig().with_overrides(workers=0)
        with pytest.raises(ConfigError):
            ExperimentConfig().with_overrides(method="other")
