"""
Labeled / unlabeled pool management
"""

import logging
from typing import Dict, Iterable, List, Optional

import numpy as np

from .datasets import Dataset
from ..exceptions import ConfigurationError, PoolExhaustedError, PoolStateError

logger = logging.getLogger(__name__)


class DataPool:
    """Tracks which datapoint ids are labeled (L) and which are not (U)"""

    def __init__(self, dataset: Dataset):
        """
        Initialize pool with every datapoint unlabeled

        Args:
            dataset: Dataset whose indices serve as datapoint ids
        """
        self.dataset = dataset
        self.labeled_ids: List[int] = []
        self._labeled_set = set()
        # U as a list plus position index: O(1) membership, removal and uniform draws
        self._unlabeled: List[int] = []
        self._position: Dict[int, int] = {}
        self.seed_size = 0
        self.reset()

        logger.debug(f"Initialized DataPool with {len(dataset)} datapoints")

    def reset(self) -> None:
        """Move every datapoint back to U, in id order"""
        self.labeled_ids = []
        self._labeled_set = set()
        self._unlabeled = list(range(len(self.dataset)))
        self._position = {idx: idx for idx in self._unlabeled}
        self.seed_size = 0

    @property
    def n_labeled(self) -> int:
        return len(self.labeled_ids)

    @property
    def n_unlabeled(self) -> int:
        return len(self._unlabeled)

    @property
    def unlabeled_ids(self) -> List[int]:
        """U in ascending id order"""
        return sorted(self._unlabeled)

    def is_unlabeled(self, idx: int) -> bool:
        return idx in self._position

    def label(self, idx: int) -> "DataPool":
        """
        Move one id from U to L, appending to L

        Args:
            idx: Datapoint id currently in U

        Returns:
            The pool itself
        """
        idx = int(idx)
        pos = self._position.pop(idx, None)
        if pos is None:
            where = "already labeled" if idx in self._labeled_set else "not in the pool"
            raise PoolStateError(f"Datapoint {idx} cannot be labeled: {where}")

        last = self._unlabeled.pop()
        if last != idx:
            self._unlabeled[pos] = last
            self._position[last] = pos

        self.labeled_ids.append(idx)
        self._labeled_set.add(idx)
        return self

    def label_many(self, ids: Iterable[int]) -> "DataPool":
        for idx in ids:
            self.label(idx)
        return self

    def draw_candidates(self, k: int, rng: np.random.Generator,
                        exclude: Optional[Iterable[int]] = None) -> List[int]:
        """
        Draw k distinct ids from U uniformly without replacement; U is unchanged

        Args:
            k: Number of ids to draw
            rng: Random generator
            exclude: Ids that must not be returned (e.g. ids already on display)

        Returns:
            List of k ids
        """
        excluded = {int(i) for i in exclude if int(i) in self._position} if exclude else set()
        available = len(self._unlabeled) - len(excluded)
        if k > available:
            raise PoolExhaustedError(f"Requested {k} candidates but only {available} unlabeled datapoints remain")
        if k <= 0:
            return []

        # Oversample by the excluded count, then filter: still uniform over U minus exclude
        picks = rng.choice(len(self._unlabeled), size=k + len(excluded), replace=False)
        drawn = [self._unlabeled[p] for p in picks if self._unlabeled[p] not in excluded]
        return drawn[:k]

    def build_seed_set(self, per_class: int, rng: np.random.Generator) -> "DataPool":
        """
        Label exactly per_class random ids of every class

        Args:
            per_class: Images per class to move from U to L
            rng: Random generator

        Returns:
            The pool itself
        """
        if per_class < 0:
            raise ConfigurationError(f"per_class must be >= 0, got {per_class}")
        if per_class == 0:
            return self

        unlabeled = np.array(self.unlabeled_ids, dtype=np.int64)
        labels = self.dataset.labels[unlabeled]
        chosen = []
        for cls in range(self.dataset.n_classes):
            members = unlabeled[labels == cls]
            if len(members) < per_class:
                raise ConfigurationError(
                    f"Class {cls} has {len(members)} unlabeled datapoints, seed set needs {per_class}")
            chosen.extend(rng.choice(members, size=per_class, replace=False).tolist())

        self.label_many(chosen)
        self.seed_size = self.n_labeled
        logger.debug(f"Seed set: {per_class} per class, |L|={self.n_labeled}")
        return self

    def labeled_dataset(self) -> Dataset:
        return self.dataset.subset(self.labeled_ids)

    def get_pool_statistics(self) -> Dict[str, int]:
        """
        Summarize the pool

        Returns:
            Dictionary with pool sizes and per-class labeled counts
        """
        labeled_labels = self.dataset.labels[self.labeled_ids] if self.labeled_ids else np.array([], dtype=np.int64)
        counts = np.bincount(labeled_labels, minlength=self.dataset.n_classes)
        return {
            'labeled': self.n_labeled,
            'unlabeled': self.n_unlabeled,
            'seed_size': self.seed_size,
            'added': self.n_labeled - self.seed_size,
            'labeled_per_class': counts.tolist(),
        }
