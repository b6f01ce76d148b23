"""
RL-driven Active Learning

Learns an active learning sampling policy with a Double-DQN agent that plays
a Gym-style labeling game around a small image classifier, and compares it
against uncertainty-sampling baselines.

Features:
- Minimal float64 numpy neural-network engine (dense, conv2d, batchnorm)
- MNIST IDX reader and synthetic mini-digits
- Active learning environment in single-image, sample and bundle modes
- Double-DQN agent with softmax-greedy policy and experience replay
- Random and BvsSB baselines, evaluation curves and Q-value diagnostics

Version: 1.0.0
"""

from .core import ActiveLearningExperiment, ALEnvironment, DDQNAgent, ICModel, DataPool
from .config import CONFIG

__version__ = "1.0.0"

__all__ = [
    'ActiveLearningExperiment',
    'ALEnvironment',
    'DDQNAgent',
    'ICModel',
    'DataPool',
    'CONFIG',
]
