"""
Active learning environment with a Gym-style reset/step interface

State layout (fixed for the lifetime of an environment):

    [entropy_0, margin_0, ..., entropy_{s-1}, margin_{s-1}]   per-slot scores
    [24 classifier metrics]                                   mean/std/norm per parameter tensor
    [tracked F1]

Exp1 shows one image (s=1, 27 values); exp2 shows s images; exp3 shows s
bundles whose scores are averaged over the bundle (both 35 values for s=5).
Action a < s labels slot a; action s labels nothing.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .classifier import F1Tracker, ICModel
from .data_pool import DataPool
from .datasets import Dataset
from .sampling import score_batch
from ..config.settings import CONFIG, ClassifierConfig, EnvConfig
from ..exceptions import ConfigurationError, NumericError, PoolExhaustedError

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["interaction", "action", "reward", "labeled", "raw_f1", "tracked_f1"]


class ALEnvironment:
    """Active learning game around an image classifier"""

    def __init__(self, train: Dataset, reduced_val: Dataset,
                 config: Optional[EnvConfig] = None,
                 classifier_config: Optional[ClassifierConfig] = None,
                 model: Optional[Any] = None,
                 seed: Union[int, Sequence[int], None] = 0):
        """
        Initialize the environment; call reset() before stepping

        Args:
            train: Dataset backing the labeled/unlabeled pool
            reduced_val: Validation set for rewards and early stopping
            config: Environment settings (defaults from CONFIG)
            classifier_config: Classifier settings when no model is injected
            model: Optional classifier exposing reinitialize/fit/predict_proba/macro_f1/extract_metrics
            seed: Seed of the environment's random generator
        """
        self.config = config or CONFIG.env
        if self.config.mode not in ("exp1_single", "exp2_sample", "exp3_bundle"):
            raise ConfigurationError(f"Unknown environment mode {self.config.mode!r}")
        if self.config.budget <= 0:
            raise ConfigurationError(f"budget must be positive, got {self.config.budget}")

        self.train = train
        self.reduced_val = reduced_val
        self.rng = np.random.default_rng(seed)
        self.pool = DataPool(train)
        self.model = model if model is not None else ICModel(
            train.image_shape, train.n_classes, classifier_config or CONFIG.classifier, self.rng)
        self.tracker = F1Tracker(self.config.f1_alpha)

        self.n_slots = self.config.n_slots
        self.images_per_slot = self.config.images_per_slot
        self.slots: List[List[int]] = []

        self.initial_f1 = 0.0
        self.reward_baseline = 0.0
        self.raw_f1 = 0.0
        self.images_added = 0
        self.added_since_soft_reset = 0
        self.interactions = 0
        self.subgames_completed = 0
        self.done = True
        self.truncated = False
        self.exhausted = False
        self.curve: List[float] = []
        self.trace: List[Dict[str, float]] = []

        logger.debug(f"Initialized ALEnvironment: mode={self.config.mode}, budget={self.config.budget}, "
                     f"state {self.state_space}, actions {self.action_space}")

    @property
    def action_space(self) -> int:
        return self.n_slots + 1

    @property
    def no_label_action(self) -> int:
        return self.n_slots

    @property
    def state_space(self) -> int:
        return 2 * self.n_slots + len(self.model.extract_metrics()) + 1

    @property
    def tracked_f1(self) -> float:
        return self.tracker.current

    # ------------------------------------------------------------------ resets

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        """
        Hard reset: new seed set, fresh classifier fitted on it, new candidates

        Args:
            seed: Optional reseed of the environment generator

        Returns:
            Initial state vector
        """
        if seed is not None:
            self.rng = np.random.default_rng(seed)

        self.pool.reset()
        self.pool.build_seed_set(self.config.initial_points_per_class, self.rng)
        self.model.reinitialize(self.rng)
        self.model.fit(self.pool, self.reduced_val, self.rng)

        self.tracker.reset()
        self.raw_f1 = self.model.macro_f1(self.reduced_val)
        self.tracker.update(self.raw_f1)
        self.initial_f1 = self.reward_baseline = self.tracker.current

        self.images_added = 0
        self.added_since_soft_reset = 0
        self.interactions = 0
        self.subgames_completed = 0
        self.done = False
        self.truncated = False
        self.exhausted = False
        self.curve = []
        self.trace = []

        self.slots = []
        for _ in range(self.n_slots):
            slot = self._draw_slot()
            if slot is None:
                raise PoolExhaustedError(
                    f"Not enough unlabeled datapoints to fill {self.n_slots} slots of {self.images_per_slot}")
            self.slots.append(slot)

        logger.debug(f"Hard reset: |L|={self.pool.n_labeled}, initial tracked F1 {self.initial_f1:.4f}")
        return self.build_state()

    def soft_reset(self) -> None:
        """Start a new sub-game: keep L and the classifier, rebaseline the reward"""
        self.initial_f1 = self.reward_baseline = self.tracker.current
        self.added_since_soft_reset = 0
        self.subgames_completed += 1
        logger.debug(f"Soft reset #{self.subgames_completed}: |L|={self.pool.n_labeled}, "
                     f"tracked F1 {self.tracker.current:.4f}")

    # ------------------------------------------------------------------ helpers

    def _draw_slot(self) -> Optional[List[int]]:
        on_display = [idx for slot in self.slots for idx in slot]
        try:
            return self.pool.draw_candidates(self.images_per_slot, self.rng, exclude=on_display)
        except PoolExhaustedError:
            return None

    def _train_and_track(self) -> float:
        self.model.fit(self.pool, self.reduced_val, self.rng)
        self.raw_f1 = self.model.macro_f1(self.reduced_val)
        return self.tracker.update(self.raw_f1)

    def _generate_reward(self) -> float:
        """Improvement since the last generated reward, scaled"""
        reward = (self.tracker.current - self.reward_baseline) * self.config.reward_scale
        self.reward_baseline = self.tracker.current
        return reward

    def _budget_reached(self) -> bool:
        if self.config.mode == "exp3_bundle":
            return self.pool.n_labeled - self.pool.seed_size > self.config.budget
        return self.images_added >= self.config.budget

    def add_images(self, ids: Sequence[int]) -> float:
        """
        Label ids directly, refit and track F1 (used by the baseline strategies)

        Args:
            ids: Unlabeled datapoint ids

        Returns:
            Tracked F1 after training
        """
        self.pool.label_many(ids)
        tracked = self._train_and_track()
        self.images_added += len(ids)
        self.added_since_soft_reset += len(ids)
        self.curve.extend([tracked] * len(ids))
        return tracked

    # ------------------------------------------------------------------ step

    def step(self, action: int) -> Tuple[np.ndarray, float, bool, Dict[str, Any]]:
        """
        Apply one action

        Args:
            action: Slot index to label, or no_label_action

        Returns:
            (state, reward, done, info)
        """
        if self.done:
            raise ConfigurationError("Episode is finished; call reset() first")
        if not isinstance(action, (int, np.integer)) or not 0 <= int(action) < self.action_space:
            raise ConfigurationError(f"Action {action!r} outside [0, {self.action_space})")
        action = int(action)
        self.interactions += 1

        if action < self.n_slots:
            self.add_images(self.slots[action])
            consumed = self.slots[action]
            self.slots[action] = []
            refill = self._draw_slot()
            if refill is None:
                # terminal state only: the slot keeps its now-labeled ids
                self.slots[action] = consumed
                self.exhausted = True
            else:
                self.slots[action] = refill
        else:
            j = int(self.rng.integers(self.n_slots))
            replacement = self._draw_slot()
            if replacement is None:
                self.exhausted = True
            else:
                self.slots[j] = replacement

        subgame_end = (self.config.mode == "exp3_bundle"
                       and self.added_since_soft_reset >= self.config.subgame_length)
        budget_done = self._budget_reached()
        self.truncated = (not budget_done and not self.exhausted
                          and self.interactions >= self.config.max_interactions_per_game)
        self.done = budget_done or self.exhausted or self.truncated

        reward = 0.0
        if self.config.reward_shaping:
            reward += self._generate_reward()
        if subgame_end or self.done:
            reward += self._generate_reward()
        if subgame_end and not self.done:
            self.soft_reset()

        state = self.build_state()
        info = {
            'raw_f1': self.raw_f1,
            'tracked_f1': self.tracker.current,
            'labeled': self.pool.n_labeled,
            'added_images': self.images_added,
            'interaction': self.interactions,
            'subgame_end': subgame_end,
            'truncated': self.truncated,
            'exhausted': self.exhausted,
        }
        self.trace.append({
            'interaction': self.interactions,
            'action': action,
            'reward': reward,
            'labeled': self.pool.n_labeled,
            'raw_f1': self.raw_f1,
            'tracked_f1': self.tracker.current,
        })

        if self.done:
            logger.debug(f"Game over after {self.interactions} interactions: {self.images_added} images added, "
                         f"tracked F1 {self.tracker.current:.4f}"
                         f"{' (truncated)' if self.truncated else ''}{' (pool exhausted)' if self.exhausted else ''}")
        return state, reward, self.done, info

    # ------------------------------------------------------------------ state

    def build_state(self) -> np.ndarray:
        """Per-slot [entropy, margin] (bundle means), classifier metrics, tracked F1"""
        ids = [idx for slot in self.slots for idx in slot]
        if len(self.slots) != self.n_slots or not ids:
            raise ConfigurationError("Slots are not populated; call reset() first")

        probs = self.model.predict_proba(self.train.images[ids])
        _, margin, entropy = score_batch(probs)

        slot_features = []
        start = 0
        for slot in self.slots:
            stop = start + len(slot)
            slot_features.extend((entropy[start:stop].mean(), margin[start:stop].mean()))
            start = stop

        state = np.concatenate([
            np.asarray(slot_features, dtype=np.float64),
            self.model.extract_metrics(),
            [self.tracker.current],
        ])
        if not np.all(np.isfinite(state)):
            raise NumericError("Non-finite state vector", {"interaction": self.interactions})
        return state

    # ------------------------------------------------------------------ trace

    def trace_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.trace, columns=TRACE_COLUMNS)

    def save_trace(self, path: Union[str, Path]) -> None:
        try:
            self.trace_frame().to_csv(path, index=False)
        except OSError as e:
            raise OSError(f"Cannot write episode trace {path}: {e}") from e
