"""
Configuration settings for the RL-driven active learning system
"""

import os
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import yaml

from ..exceptions import ConfigurationError

logger = logging.getLogger(__name__)

ENV_MODES = ("exp1_single", "exp2_sample", "exp3_bundle")


@dataclass
class ClassifierConfig:
    """Image classification (IC) model settings"""
    conv1_filters: int = 64
    conv1_kernel: int = 3
    conv1_stride: int = 3
    conv2_filters: int = 32
    conv2_kernel: int = 3
    conv2_stride: int = 1
    dense_units: int = 24
    learning_rate: float = 0.05
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 1
    predict_batch_size: int = 1024


@dataclass
class EnvConfig:
    """Active learning environment settings"""
    mode: str = "exp1_single"
    budget: int = 800
    initial_points_per_class: int = 5
    reward_shaping: bool = False
    max_interactions_per_game: int = 1200
    sample_size: int = 5
    bundle_size: int = 5
    subgame_length: int = 50
    reward_scale: float = 1.0
    f1_alpha: float = 0.7
    validation_size: int = 1000

    @property
    def n_slots(self) -> int:
        return 1 if self.mode == "exp1_single" else self.sample_size

    @property
    def images_per_slot(self) -> int:
        return self.bundle_size if self.mode == "exp3_bundle" else 1

    @property
    def action_space(self) -> int:
        return self.n_slots + 1

    @property
    def state_space(self) -> int:
        return 2 * self.n_slots + 24 + 1


@dataclass
class AgentConfig:
    """Double-DQN agent settings"""
    hidden_units: Tuple[int, ...] = (24, 12)
    batchnorm: bool = True
    leaky_alpha: float = 0.3
    l2: float = 0.001
    gamma: float = 0.9
    target_sync: int = 10
    batch_size: int = 64
    memory_max_length: int = 1000
    tau_start: float = 1.0
    tau_end: float = 0.2
    lr_start: float = 0.001
    lr_end: float = 0.00001


@dataclass
class BaselineConfig:
    """Baseline sampling strategy settings"""
    initial_threshold: float = 0.8
    threshold_decay: float = 0.05
    sample_size: int = 5
    extra_strategies: Tuple[str, ...] = ()


@dataclass
class DataConfig:
    """Dataset source settings"""
    dataset: str = "mnist"  # "mnist" or "synthetic"
    data_dir: str = "data"
    synthetic_samples: int = 6000
    synthetic_validation: int = 2000
    synthetic_classes: int = 10
    synthetic_image_size: int = 8
    synthetic_noise: float = 0.35


@dataclass
class ExperimentConfig:
    """Main experiment configuration."""
    # Global settings
    name: str = "exp1"
    seed: int = 0
    total_interactions: int = 12000
    exploration: int = 4000
    conversion: int = 4000
    eval_runs: int = 15
    eval_every_games: int = 10
    smoothing_window: int = 10
    table_checkpoints: Tuple[int, ...] = (100, 400, 800)
    table_window: int = 10
    workers: int = 1
    output_dir: str = "output"
    debug: bool = False
    verbose_logging: bool = False

    def __post_init__(self):
        """Initialize nested configurations."""
        self.classifier = ClassifierConfig()
        self.env = EnvConfig()
        self.agent = AgentConfig()
        self.baseline = BaselineConfig()
        self.data = DataConfig()

    def validate(self) -> "ExperimentConfig":
        """Check cross-field invariants, raising ConfigurationError on violation"""
        env = self.env
        if env.mode not in ENV_MODES:
            raise ConfigurationError(f"Unknown environment mode {env.mode!r}; expected one of {ENV_MODES}")
        if env.budget <= 0:
            raise ConfigurationError(f"budget must be positive, got {env.budget}")
        if env.sample_size < 1:
            raise ConfigurationError(f"sampleSize must be >= 1, got {env.sample_size}")
        if env.bundle_size < 1:
            raise ConfigurationError(f"imagesToBundle must be >= 1, got {env.bundle_size}")
        if not 0.0 <= env.f1_alpha < 1.0:
            raise ConfigurationError(f"f1Alpha must be in [0, 1), got {env.f1_alpha}")
        if self.exploration + self.conversion > self.total_interactions:
            raise ConfigurationError(
                f"exploration ({self.exploration}) + conversion ({self.conversion}) "
                f"exceeds minTrainingInteractions ({self.total_interactions})"
            )
        if not 0.0 < self.agent.leaky_alpha < 1.0:
            raise ConfigurationError(f"leaky ReLU slope must be in (0, 1), got {self.agent.leaky_alpha}")
        if self.agent.tau_end <= 0:
            raise ConfigurationError("greedParameterRange must stay positive")
        if self.data.dataset not in ("mnist", "synthetic"):
            raise ConfigurationError(f"Unknown dataset {self.data.dataset!r}")
        return self


# Experiment-file keys -> (section, attribute). Section None = top level.
_KEY_MAP: Dict[str, Tuple[Optional[str], str]] = {
    # General parameters
    "name": (None, "name"),
    "seed": (None, "seed"),
    "minTrainingInteractions": (None, "total_interactions"),
    "exploration": (None, "exploration"),
    "conversion": (None, "conversion"),
    "evaluationRuns": (None, "eval_runs"),
    "evaluationEveryGames": (None, "eval_every_games"),
    "smoothingWindow": (None, "smoothing_window"),
    "tableCheckpoints": (None, "table_checkpoints"),
    "tableWindow": (None, "table_window"),
    "workers": (None, "workers"),
    "outputDir": (None, "output_dir"),
    # Image classifier
    "icModelMaxEpochs": ("classifier", "max_epochs"),
    "earlyStoppingPatience": ("classifier", "patience"),
    "icLearningRate": ("classifier", "learning_rate"),
    "icBatchSize": ("classifier", "batch_size"),
    "icConv1Filters": ("classifier", "conv1_filters"),
    "icConv1Stride": ("classifier", "conv1_stride"),
    "icConv2Filters": ("classifier", "conv2_filters"),
    "icDenseUnits": ("classifier", "dense_units"),
    # Environment
    "mode": ("env", "mode"),
    "budget": ("env", "budget"),
    "initialPointsPerClass": ("env", "initial_points_per_class"),
    "rewardShaping": ("env", "reward_shaping"),
    "maxInteractionPerGame": ("env", "max_interactions_per_game"),
    "sampleSize": ("env", "sample_size"),
    "imagesToBundle": ("env", "bundle_size"),
    "subGameLength": ("env", "subgame_length"),
    "rewardScaling": ("env", "reward_scale"),
    "f1Alpha": ("env", "f1_alpha"),
    "validationSize": ("env", "validation_size"),
    # Agent
    "agentHiddenUnits": ("agent", "hidden_units"),
    "agentBatchNorm": ("agent", "batchnorm"),
    "leakyReluSlope": ("agent", "leaky_alpha"),
    "l2Regularization": ("agent", "l2"),
    "gamma": ("agent", "gamma"),
    "targetNetworkUpdateRate": ("agent", "target_sync"),
    "agentBatchSize": ("agent", "batch_size"),
    "memoryMaxLength": ("agent", "memory_max_length"),
    # Baselines
    "baselineInitialThreshold": ("baseline", "initial_threshold"),
    "baselineThresholdDecay": ("baseline", "threshold_decay"),
    "baselineSampleSize": ("baseline", "sample_size"),
    "baselineExtraStrategies": ("baseline", "extra_strategies"),
    # Data
    "dataset": ("data", "dataset"),
    "dataDir": ("data", "data_dir"),
    "syntheticSamples": ("data", "synthetic_samples"),
    "syntheticValidation": ("data", "synthetic_validation"),
    "syntheticClasses": ("data", "synthetic_classes"),
    "syntheticImageSize": ("data", "synthetic_image_size"),
    "syntheticNoise": ("data", "synthetic_noise"),
}

# Range-valued keys expand into two attributes
_RANGE_KEYS: Dict[str, Tuple[str, str]] = {
    "greedParameterRange": ("tau_start", "tau_end"),
    "agentLearningRateRange": ("lr_start", "lr_end"),
}


def _coerce(current: Any, value: Any, key: str) -> Any:
    """Coerce a YAML value to the type of the dataclass default it replaces"""
    try:
        if isinstance(current, bool):
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
        if isinstance(current, tuple):
            if isinstance(value, (list, tuple)):
                return tuple(value)
            return (value,)
        if isinstance(current, int):
            return int(value)
        if isinstance(current, float):
            return float(value)
        return type(current)(value)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"Invalid value for {key}: {value!r} ({e})")


def apply_overrides(config: ExperimentConfig, values: Dict[str, Any]) -> ExperimentConfig:
    """
    Apply a flat mapping of experiment-file keys onto a config

    Args:
        config: Configuration to update in place
        values: Flat key-value mapping (e.g. parsed YAML)

    Returns:
        The same config, validated
    """
    for key, value in values.items():
        if key in _RANGE_KEYS:
            if not isinstance(value, (list, tuple)) or len(value) != 2:
                raise ConfigurationError(f"{key} expects a [start, end] pair, got {value!r}")
            start_attr, end_attr = _RANGE_KEYS[key]
            setattr(config.agent, start_attr, float(value[0]))
            setattr(config.agent, end_attr, float(value[1]))
            continue
        if key not in _KEY_MAP:
            raise ConfigurationError(f"Unknown configuration key: {key}")
        section, attr = _KEY_MAP[key]
        target = config if section is None else getattr(config, section)
        setattr(target, attr, _coerce(getattr(target, attr), value, key))
    return config.validate()


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Load an experiment configuration from a flat YAML file

    Args:
        path: Path to YAML file with experiment-file keys

    Returns:
        Validated ExperimentConfig (environment overrides applied on top)
    """
    path = Path(path)
    try:
        with open(path, "r") as f:
            values = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigurationError(f"Cannot read config file {path}: {e}")
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Malformed YAML in {path}: {e}")

    if not isinstance(values, dict):
        raise ConfigurationError(f"Config file {path} must contain a flat key-value mapping")

    config = ExperimentConfig()
    config.name = path.stem
    apply_overrides(config, values)
    load_config_from_env(config)
    logger.info(f"Loaded experiment config {config.name} from {path}")
    return config


def to_flat_dict(config: ExperimentConfig) -> Dict[str, Any]:
    """Flat view keyed like an experiment file; the inverse of apply_overrides"""
    values: Dict[str, Any] = {}
    for key, (section, attr) in _KEY_MAP.items():
        target = config if section is None else getattr(config, section)
        values[key] = getattr(target, attr)
    for key, (start_attr, end_attr) in _RANGE_KEYS.items():
        values[key] = [getattr(config.agent, start_attr), getattr(config.agent, end_attr)]
    return values


def save_experiment_config(config: ExperimentConfig, path: Union[str, Path]) -> None:
    """Write the resolved configuration as a flat YAML file that load_experiment_config reads back"""
    try:
        with open(path, "w") as f:
            yaml.safe_dump(_plain(to_flat_dict(config)), f, default_flow_style=False, sort_keys=False)
    except OSError as e:
        raise OSError(f"Cannot write config file {path}: {e}") from e


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


# Global configuration instance
CONFIG = ExperimentConfig()


# Environment-based configuration overrides
def load_config_from_env(config: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Load configuration overrides from environment variables"""
    config = config or CONFIG

    if os.getenv("ALRL_DEBUG"):
        config.debug = True
        config.verbose_logging = True

    if os.getenv("ALRL_DATA_DIR"):
        config.data.data_dir = os.getenv("ALRL_DATA_DIR")

    if os.getenv("ALRL_OUTPUT_DIR"):
        config.output_dir = os.getenv("ALRL_OUTPUT_DIR")

    if os.getenv("ALRL_WORKERS"):
        try:
            config.workers = max(1, int(os.getenv("ALRL_WORKERS")))
        except ValueError:
            logger.warning(f"Ignoring non-integer ALRL_WORKERS={os.getenv('ALRL_WORKERS')!r}")

    return config


# Load environment-based config on import
load_config_from_env()
