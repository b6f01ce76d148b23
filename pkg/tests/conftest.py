"""
Shared fixtures: seeded generators, tiny datasets and stand-in classifiers
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from rl_active_learning.config import ExperimentConfig
from rl_active_learning.core.datasets import Dataset, build_validation_split, make_synthetic_digits
from rl_active_learning.core.network import softmax


class StubClassifier:
    """Fast classifier stand-in: uniform predictions, F1 driven by the labeled-set size"""

    def __init__(self, n_classes=10, f1_fn=None, probs_fn=None):
        self.n_classes = n_classes
        self.f1_fn = f1_fn or (lambda n_labeled: min(1.0, n_labeled / 200.0))
        self.probs_fn = probs_fn
        self.fit_calls = 0
        self.n_labeled = 0

    def reinitialize(self, rng):
        self.fit_calls = 0
        self.n_labeled = 0

    def fit(self, pool, reduced_val, rng):
        assert pool.n_labeled > 0
        self.fit_calls += 1
        self.n_labeled = pool.n_labeled
        return self

    def predict_proba(self, images):
        if self.probs_fn is not None:
            return self.probs_fn(images)
        return np.full((len(images), self.n_classes), 1.0 / self.n_classes)

    def macro_f1(self, data):
        return float(self.f1_fn(self.n_labeled))

    def extract_metrics(self):
        return np.linspace(0.0, 1.0, 24)


class LookupModel:
    """Returns a fixed prediction row per datapoint id; ids are encoded in pixel (0, 0)"""

    SCALE = 10000.0

    def __init__(self, table):
        self.table = np.asarray(table, dtype=np.float64)

    def predict_proba(self, images):
        ids = np.rint(images[:, 0, 0, 0] * self.SCALE).astype(int)
        return self.table[ids]


def id_encoded_dataset(n, n_classes=3, size=4):
    """Dataset whose images carry their own index for LookupModel"""
    images = np.zeros((n, 1, size, size))
    images[:, 0, 0, 0] = np.arange(n) / LookupModel.SCALE
    return Dataset(images, np.arange(n) % n_classes, n_classes)


def content_probs(n_classes):
    """Prediction rows that depend only on image content"""
    def probs(images):
        logits = np.zeros((len(images), n_classes))
        logits[:, 0] = images.reshape(len(images), -1).sum(axis=1)
        return softmax(logits)
    return probs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_digits():
    """300 synthetic 8x8 digits over 10 classes plus a 100-image reduced validation set"""
    gen = np.random.default_rng(0)
    train, _ = make_synthetic_digits(300, 10, 8, 0.35, gen)
    full_val, _ = make_synthetic_digits(200, 10, 8, 0.35, gen)
    return train, build_validation_split(full_val, 100, gen)


@pytest.fixture
def stub_factory():
    return lambda: StubClassifier(n_classes=10)


@pytest.fixture
def small_config():
    """Settings sized for unit tests on tiny_digits"""
    config = ExperimentConfig()
    config.name = "unit"
    config.total_interactions = 60
    config.exploration = 20
    config.conversion = 20
    config.eval_runs = 2
    config.eval_every_games = 2
    config.table_checkpoints = (5, 10, 20)
    config.table_window = 2
    config.smoothing_window = 3

    config.env.mode = "exp1_single"
    config.env.budget = 20
    config.env.max_interactions_per_game = 30
    config.env.validation_size = 100

    config.classifier.conv1_filters = 4
    config.classifier.conv1_stride = 1
    config.classifier.conv2_filters = 4
    config.classifier.dense_units = 8
    config.classifier.max_epochs = 3

    config.agent.batch_size = 8
    config.agent.memory_max_length = 100

    config.data.dataset = "synthetic"
    return config.validate()
