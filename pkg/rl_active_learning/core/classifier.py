"""
Image classification (IC) model trained inside the active learning environment
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from .data_pool import DataPool
from .datasets import Dataset
from .network import (Network, backward, conv2d_layer, dense_layer, flatten_layer,
                      forward, sgd_step)
from ..config.settings import CONFIG, ClassifierConfig
from ..exceptions import ConfigurationError
from ..utils.checkpoint import load_tensors, save_tensors

logger = logging.getLogger(__name__)

METRICS_PER_TENSOR = ("mean", "std", "norm")


def macro_f1(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> float:
    """
    Unweighted mean of per-class F1 over all n_classes

    A class that is never predicted, or never present, scores 0.

    Args:
        y_true: True labels
        y_pred: Predicted labels
        n_classes: Number of classes C

    Returns:
        Macro F1 in [0, 1]
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if len(y_true) == 0:
        raise ConfigurationError("macro_f1 needs at least one sample")
    if y_true.shape != y_pred.shape:
        raise ConfigurationError(f"Label shapes differ: {y_true.shape} vs {y_pred.shape}")

    confusion = np.bincount(y_true * n_classes + y_pred, minlength=n_classes * n_classes)
    confusion = confusion.reshape(n_classes, n_classes)
    tp = np.diag(confusion).astype(np.float64)
    denom = confusion.sum(axis=0) + confusion.sum(axis=1)
    per_class = np.divide(2.0 * tp, denom, out=np.zeros(n_classes), where=denom > 0)
    return float(per_class.mean())


@dataclass
class F1Tracker:
    """Exponential moving average of the raw F1 score"""
    alpha: float = 0.7
    current: float = 0.0
    initialized: bool = False

    def update(self, raw: float) -> float:
        if not 0.0 <= raw <= 1.0:
            raise ConfigurationError(f"F1 must lie in [0, 1], got {raw}")
        if not self.initialized:
            self.current = float(raw)
            self.initialized = True
        else:
            self.current = self.alpha * self.current + (1.0 - self.alpha) * float(raw)
        return self.current

    def reset(self) -> None:
        self.current = 0.0
        self.initialized = False


class EarlyStopping:
    """Stop once validation loss fails to improve for `patience` epochs; keeps the best parameters"""

    def __init__(self, patience: int = 1):
        if patience < 1:
            raise ConfigurationError(f"patience must be >= 1, got {patience}")
        self.patience = patience
        self.best_loss = np.inf
        self.best_state: Optional[Dict[str, np.ndarray]] = None
        self.best_epoch = 0
        self.bad_epochs = 0

    def update(self, epoch: int, loss: float, state: Dict[str, np.ndarray]) -> bool:
        """Record one epoch; returns True when training should stop"""
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_state = {k: v.copy() for k, v in state.items()}
            self.best_epoch = epoch
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience


class ICModel:
    """Conv2D -> Conv2D -> Flatten -> Dense -> Dense(softmax) image classifier"""

    def __init__(self, input_shape: Tuple[int, int, int], n_classes: int,
                 config: Optional[ClassifierConfig] = None,
                 rng: Optional[np.random.Generator] = None):
        """
        Build the classifier with freshly initialized parameters

        Args:
            input_shape: Per-image shape (channels, height, width)
            n_classes: Number of output classes
            config: Classifier settings (defaults from CONFIG)
            rng: Random generator for initialization
        """
        self.config = config or CONFIG.classifier
        self.input_shape = tuple(input_shape)
        self.n_classes = n_classes
        self.net: Optional[Network] = None
        self.last_fit_epochs = 0
        self.last_val_loss = float("nan")
        self.reinitialize(rng or np.random.default_rng())

        logger.debug(f"Initialized ICModel: input {self.input_shape}, {n_classes} classes, "
                     f"{self.net.n_parameters} parameters")

    def reinitialize(self, rng: np.random.Generator) -> None:
        """Fresh He-uniform parameters (hard reset)"""
        cfg = self.config
        channels = self.input_shape[0]
        layers = [
            conv2d_layer(channels, cfg.conv1_filters, cfg.conv1_kernel, cfg.conv1_stride, rng,
                         activation="relu", name="conv1"),
            conv2d_layer(cfg.conv1_filters, cfg.conv2_filters, cfg.conv2_kernel, cfg.conv2_stride, rng,
                         activation="relu", name="conv2"),
            flatten_layer(),
        ]
        flat_shape = Network(layers, loss="cross_entropy").output_shape(self.input_shape)
        layers.append(dense_layer(flat_shape[0], cfg.dense_units, rng, activation="relu", name="dense"))
        layers.append(dense_layer(cfg.dense_units, self.n_classes, rng, activation="softmax", name="out"))
        self.net = Network(layers, loss="cross_entropy")

    def _one_hot(self, labels: np.ndarray) -> np.ndarray:
        return np.eye(self.n_classes)[labels]

    def fit(self, pool: DataPool, reduced_val: Dataset, rng: np.random.Generator) -> "ICModel":
        """
        Train on the labeled set, warm-started from the current parameters

        Args:
            pool: Pool whose labeled set is the training data
            reduced_val: Validation set for early stopping
            rng: Random generator for minibatch shuffling

        Returns:
            The model, holding the parameters of the last epoch before the stop trigger
        """
        if pool.n_labeled == 0:
            raise ConfigurationError("Cannot fit the classifier on an empty labeled set")

        train = pool.labeled_dataset()
        targets = self._one_hot(train.labels)
        batch_size = self.config.batch_size
        stopper = EarlyStopping(self.config.patience)

        epoch = 0
        for epoch in range(1, self.config.max_epochs + 1):
            order = rng.permutation(len(train))
            for start in range(0, len(order), batch_size):
                batch = order[start:start + batch_size]
                grads = backward(self.net, train.images[batch], targets[batch])
                sgd_step(self.net, grads, self.config.learning_rate)

            val_loss = self.validation_loss(reduced_val)
            if stopper.update(epoch, val_loss, self.net.state_tensors()):
                break

        if stopper.best_state is not None:
            self.net.load_state_tensors(stopper.best_state)
        self.last_fit_epochs = epoch
        self.last_val_loss = stopper.best_loss
        logger.debug(f"Fit on {len(train)} images: {epoch} epochs, best val loss "
                     f"{stopper.best_loss:.4f} at epoch {stopper.best_epoch}")
        return self

    def predict_proba(self, images: np.ndarray) -> np.ndarray:
        """Class probabilities [N, C], evaluated in batches"""
        step = self.config.predict_batch_size
        if len(images) == 0:
            return np.zeros((0, self.n_classes))
        return np.concatenate([forward(self.net, images[i:i + step]) for i in range(0, len(images), step)])

    def predict(self, images: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(images), axis=1)

    def validation_loss(self, data: Dataset) -> float:
        """Mean cross-entropy on a dataset"""
        probs = np.clip(self.predict_proba(data.images), 1e-12, 1.0)
        return float(-np.mean(np.log(probs[np.arange(len(data)), data.labels])))

    def macro_f1(self, data: Dataset) -> float:
        return macro_f1(data.labels, self.predict(data.images), self.n_classes)

    def accuracy(self, data: Dataset) -> float:
        return float(np.mean(self.predict(data.images) == data.labels))

    def extract_metrics(self) -> np.ndarray:
        """
        Mean, population std and L2 norm of every parameter tensor

        Order: conv1.W, conv1.b, conv2.W, conv2.b, dense.W, dense.b, out.W, out.b;
        three values each, 24 in total.
        """
        values = []
        for _, tensor in self.net.parameters():
            values.extend((tensor.mean(), tensor.std(), np.linalg.norm(tensor.ravel())))
        return np.asarray(values, dtype=np.float64)

    def save(self, path: Union[str, Path]) -> None:
        save_tensors(self.net.state_tensors(), path)
        logger.info(f"Saved classifier checkpoint to {path}")

    def load(self, path: Union[str, Path]) -> "ICModel":
        self.net.load_state_tensors(load_tensors(path))
        logger.info(f"Loaded classifier checkpoint from {path}")
        return self
