from pathlib import Path

import pytest
import yaml

from rl_active_learning.config import (
    ExperimentConfig, apply_overrides, load_config_from_env, load_experiment_config,
    save_experiment_config, to_flat_dict,
)
from rl_active_learning.exceptions import ConfigurationError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


class TestDefaults:
    def test_single_image_experiment(self):
        config = ExperimentConfig()
        assert config.total_interactions == 12000
        assert (config.exploration, config.conversion) == (4000, 4000)
        assert config.env.budget == 800
        assert config.env.state_space == 27
        assert config.env.action_space == 2
        assert config.agent.hidden_units == (24, 12)
        assert config.agent.gamma == 0.9
        assert config.agent.target_sync == 10
        assert not config.env.reward_shaping

    def test_derived_dimensions(self):
        config = ExperimentConfig()
        config.env.mode = "exp2_sample"
        assert (config.env.state_space, config.env.action_space) == (35, 6)
        config.env.mode = "exp3_bundle"
        assert config.env.images_per_slot == 5


class TestOverrides:
    def test_experiment_file_keys(self):
        config = apply_overrides(ExperimentConfig(), {
            "budget": 400,
            "agentHiddenUnits": [48, 24],
            "rewardShaping": "true",
            "greedParameterRange": [1.0, 0.1],
            "agentLearningRateRange": [0.01, 0.0001],
        })
        assert config.env.budget == 400
        assert config.agent.hidden_units == (48, 24)
        assert config.env.reward_shaping is True
        assert (config.agent.tau_start, config.agent.tau_end) == (1.0, 0.1)
        assert config.agent.lr_end == 0.0001

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError, match="Unknown configuration key"):
            apply_overrides(ExperimentConfig(), {"learningRate": 0.1})

    def test_bad_range(self):
        with pytest.raises(ConfigurationError):
            apply_overrides(ExperimentConfig(), {"greedParameterRange": [1.0]})

    def test_bad_value(self):
        with pytest.raises(ConfigurationError):
            apply_overrides(ExperimentConfig(), {"budget": "many"})

    @pytest.mark.parametrize("values", [
        {"mode": "exp4"},
        {"budget": 0},
        {"exploration": 9000, "conversion": 9000},
        {"leakyReluSlope": 1.5},
        {"f1Alpha": 1.0},
        {"dataset": "cifar"},
    ])
    def test_validation(self, values):
        with pytest.raises(ConfigurationError):
            apply_overrides(ExperimentConfig(), values)


class TestFiles:
    @pytest.mark.parametrize("name", ["exp1", "exp2", "exp3", "desk"])
    def test_shipped_presets_load(self, name):
        config = load_experiment_config(CONFIG_DIR / f"{name}.yaml")
        assert config.name == name

    def test_bundle_preset(self):
        config = load_experiment_config(CONFIG_DIR / "exp3.yaml")
        assert config.env.mode == "exp3_bundle"
        assert config.env.reward_scale == 40.0
        assert config.env.subgame_length == 50
        assert config.total_interactions == 8000

    def test_name_defaults_to_file_stem(self, tmp_path):
        (tmp_path / "trial.yaml").write_text("budget: 50\n")
        assert load_experiment_config(tmp_path / "trial.yaml").name == "trial"

    def test_save_and_reload(self, tmp_path):
        config = apply_overrides(ExperimentConfig(), {"mode": "exp2_sample", "agentHiddenUnits": [48, 24]})
        save_experiment_config(config, tmp_path / "saved.yaml")
        stored = yaml.safe_load((tmp_path / "saved.yaml").read_text())
        assert stored["agentHiddenUnits"] == [48, 24]
        assert to_flat_dict(load_experiment_config(tmp_path / "saved.yaml")) == to_flat_dict(config)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_experiment_config(tmp_path / "absent.yaml")

    def test_malformed_yaml(self, tmp_path):
        (tmp_path / "bad.yaml").write_text("budget: [1, 2\n")
        with pytest.raises(ConfigurationError):
            load_experiment_config(tmp_path / "bad.yaml")

    def test_non_mapping(self, tmp_path):
        (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
        with pytest.raises(ConfigurationError):
            load_experiment_config(tmp_path / "list.yaml")


class TestEnvironmentOverrides:
    def test_variables(self, monkeypatch):
        monkeypatch.setenv("ALRL_DATA_DIR", "/data/mnist")
        monkeypatch.setenv("ALRL_WORKERS", "4")
        monkeypatch.setenv("ALRL_DEBUG", "1")
        config = load_config_from_env(ExperimentConfig())
        assert config.data.data_dir == "/data/mnist"
        assert config.workers == 4
        assert config.debug and config.verbose_logging

    def test_bad_worker_count_is_ignored(self, monkeypatch):
        monkeypatch.setenv("ALRL_WORKERS", "lots")
        assert load_config_from_env(ExperimentConfig()).workers == 1
