"""
Core package: network engine, data, classifier, sampling, environment, agent and experiment driver
"""

from .network import Network, Layer, GradientSet, forward, backward, sgd_step, he_uniform_init, softmax
from .datasets import Dataset, ValidationSplit, parse_idx, serialize_idx, load_mnist, make_synthetic_digits
from .data_pool import DataPool
from .classifier import ICModel, F1Tracker, EarlyStopping, macro_f1
from .sampling import (UncertaintyScores, ThresholdPolicy, Decision, score, select_variant1,
                       select_variant2, select_random, select_most_informative)
from .environment import ALEnvironment
from .agent import DDQNAgent, ReplayBuffer, Transition, GreedSchedule, LearningRateSchedule
from .visualizer import ResultsVisualizer
from .experiment import ActiveLearningExperiment, EvalCurve, TrainingResult, diagnose_q_correlation

__all__ = [
    'Network',
    'Layer',
    'GradientSet',
    'forward',
    'backward',
    'sgd_step',
    'he_uniform_init',
    'softmax',
    'Dataset',
    'ValidationSplit',
    'parse_idx',
    'serialize_idx',
    'load_mnist',
    'make_synthetic_digits',
    'DataPool',
    'ICModel',
    'F1Tracker',
    'EarlyStopping',
    'macro_f1',
    'UncertaintyScores',
    'ThresholdPolicy',
    'Decision',
    'score',
    'select_variant1',
    'select_variant2',
    'select_random',
    'select_most_informative',
    'ALEnvironment',
    'DDQNAgent',
    'ReplayBuffer',
    'Transition',
    'GreedSchedule',
    'LearningRateSchedule',
    'ResultsVisualizer',
    'ActiveLearningExperiment',
    'EvalCurve',
    'TrainingResult',
    'diagnose_q_correlation',
]
