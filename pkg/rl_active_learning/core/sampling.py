"""
Uncertainty scores and baseline sampling strategies
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import entr

from .data_pool import DataPool
from .datasets import Dataset
from ..exceptions import ConfigurationError, DistributionError, PoolExhaustedError

logger = logging.getLogger(__name__)

STRATEGIES = ("least_confident", "bvssb", "entropy")
DISTRIBUTION_TOLERANCE = 1e-6


@dataclass(frozen=True)
class UncertaintyScores:
    least_confident: float
    margin: float
    entropy: float

    def informativeness(self, strategy: str) -> float:
        """Larger means more informative under the given strategy"""
        if strategy == "least_confident":
            return self.least_confident
        if strategy == "bvssb":
            return 1.0 - self.margin
        if strategy == "entropy":
            return self.entropy
        raise ConfigurationError(f"Unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def score(p: Sequence[float]) -> UncertaintyScores:
    """
    Least-confident, best-vs-second-best margin and entropy of one distribution

    Args:
        p: Probability vector over C >= 2 classes

    Returns:
        UncertaintyScores (entropy uses the natural log, 0 ln 0 = 0)
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or len(p) < 2:
        raise DistributionError(f"Expected a probability vector of length >= 2, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < -DISTRIBUTION_TOLERANCE):
        raise DistributionError(f"Probabilities must be finite and non-negative: {p}")
    if abs(p.sum() - 1.0) > DISTRIBUTION_TOLERANCE:
        raise DistributionError(f"Probabilities sum to {p.sum():.9f}, not 1")

    lc, margin, ent = score_batch(p[None, :])
    return UncertaintyScores(float(lc[0]), float(margin[0]), float(ent[0]))


def score_batch(probs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized scores for prediction rows [N, C]: (least_confident, margin, entropy)"""
    probs = np.clip(np.asarray(probs, dtype=np.float64), 0.0, 1.0)
    top2 = np.partition(probs, -2, axis=1)[:, -2:]
    least_confident = 1.0 - top2[:, 1]
    margin = top2[:, 1] - top2[:, 0]
    entropy = entr(probs).sum(axis=1)
    return least_confident, margin, entropy


def choose_most_informative(probs: np.ndarray, ids: Sequence[int], strategy: str = "bvssb") -> int:
    """
    Pick the id whose prediction row is most informative; ties go to the lowest id

    Args:
        probs: Prediction rows aligned with ids
        ids: Candidate datapoint ids
        strategy: One of STRATEGIES

    Returns:
        Selected id
    """
    ids = np.asarray(ids, dtype=np.int64)
    if len(ids) == 0:
        raise PoolExhaustedError("No candidates to choose from")
    least_confident, margin, entropy = score_batch(probs)
    if strategy == "bvssb":
        key = margin
    elif strategy == "least_confident":
        key = -least_confident
    elif strategy == "entropy":
        key = -entropy
    else:
        raise ConfigurationError(f"Unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    # lexsort sorts by the last key first
    return int(ids[np.lexsort((ids, key))[0]])


def select_most_informative(pool: DataPool, model, strategy: str = "bvssb") -> int:
    """Full-pool uncertainty sampling: score every unlabeled datapoint"""
    if pool.n_unlabeled == 0:
        raise PoolExhaustedError("Unlabeled pool is empty")
    ids = pool.unlabeled_ids
    probs = model.predict_proba(pool.dataset.images[ids])
    return choose_most_informative(probs, ids, strategy)


def select_variant1(pool: DataPool, model) -> int:
    """BvsSB over the whole unlabeled pool"""
    return select_most_informative(pool, model, "bvssb")


def select_random(pool: DataPool, rng: np.random.Generator) -> int:
    if pool.n_unlabeled == 0:
        raise PoolExhaustedError("Unlabeled pool is empty")
    return pool.draw_candidates(1, rng)[0]


@dataclass
class ThresholdPolicy:
    """Adaptive BvsSB threshold: lowered on every skip, restored on every add"""
    initial_threshold: float = 0.8
    decay: float = 0.05
    sample_size: int = 5
    skips: int = field(default=0)

    @property
    def threshold(self) -> float:
        # rounding keeps 0.8 - 16 * 0.05 at exactly 0
        return max(0.0, round(self.initial_threshold - self.decay * self.skips, 12))

    def record_skip(self) -> None:
        self.skips += 1

    def reset(self) -> None:
        self.skips = 0


@dataclass(frozen=True)
class Decision:
    add: bool
    id: Optional[int]
    informativeness: float
    threshold: float


def decide_variant2(policy: ThresholdPolicy, probs: np.ndarray, candidates: Sequence[int]) -> Decision:
    """Threshold rule on precomputed prediction rows; updates the policy"""
    if len(candidates) != policy.sample_size:
        raise ConfigurationError(
            f"Expected {policy.sample_size} candidates, got {len(candidates)}")
    best = choose_most_informative(probs, candidates, "bvssb")
    row = list(candidates).index(best)
    _, margin, _ = score_batch(probs[row:row + 1])
    informativeness = 1.0 - float(margin[0])
    threshold = policy.threshold

    if informativeness >= threshold:
        policy.reset()
        return Decision(True, best, informativeness, threshold)
    policy.record_skip()
    return Decision(False, None, informativeness, threshold)


def select_variant2(policy: ThresholdPolicy, candidates: Sequence[int], model, dataset: Dataset) -> Decision:
    """
    BvsSB with a decaying threshold over a small stream of candidates

    Args:
        policy: Threshold state, updated in place
        candidates: Exactly policy.sample_size ids
        model: Classifier with predict_proba
        dataset: Dataset the ids index into

    Returns:
        Decision to add the most informative candidate or skip the sample
    """
    probs = model.predict_proba(dataset.images[list(candidates)])
    return decide_variant2(policy, probs, candidates)
