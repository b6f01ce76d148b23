"""
Configuration package for the RL-driven active learning system
"""

from .settings import (
    CONFIG,
    ENV_MODES,
    ExperimentConfig,
    ClassifierConfig,
    EnvConfig,
    AgentConfig,
    BaselineConfig,
    DataConfig,
    apply_overrides,
    load_experiment_config,
    save_experiment_config,
    to_flat_dict,
    load_config_from_env,
)

__all__ = [
    'CONFIG',
    'ENV_MODES',
    'ExperimentConfig',
    'ClassifierConfig',
    'EnvConfig',
    'AgentConfig',
    'BaselineConfig',
    'DataConfig',
    'apply_overrides',
    'load_experiment_config',
    'save_experiment_config',
    'to_flat_dict',
    'load_config_from_env',
]
