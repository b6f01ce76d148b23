"""
Static SVG figures for evaluation curves, training progress and Q diagnostics
"""

import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FEATURE_NAMES = {0: "entropy", 1: "BvsSB margin"}


class ResultsVisualizer:
    """Renders experiment outputs to vector graphics"""

    def __init__(self, fmt: str = "svg", dpi: int = 100):
        """
        Initialize the visualizer

        Args:
            fmt: Output format passed to savefig
            dpi: Resolution for raster fallbacks
        """
        self.fmt = fmt
        self.dpi = dpi

    def _save(self, fig, path: Union[str, Path]) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format=self.fmt, dpi=self.dpi, bbox_inches="tight")
        except OSError as e:
            raise OSError(f"Cannot write figure {path}: {e}") from e
        finally:
            plt.close(fig)
        logger.info(f"Saved figure {path}")
        return path

    def plot_curves(self, curves: Dict[str, object], path: Union[str, Path],
                    checkpoints: Optional[Sequence[int]] = None, title: str = "F1-Score vs added images") -> Path:
        """Smoothed mean F1 curve per strategy"""
        fig, ax = plt.subplots(figsize=(8, 5))
        for name, curve in curves.items():
            ax.plot(curve.x, curve.smoothed, label=name, linewidth=1.5)
        for x in checkpoints or ():
            ax.axvline(x, color="grey", linestyle=":", linewidth=0.8)
        ax.set_xlabel("Number of added images")
        ax.set_ylabel("F1-Score (smoothed)")
        ax.set_title(title)
        ax.grid(alpha=0.3)
        ax.legend()
        return self._save(fig, path)

    def plot_training_progress(self, log: pd.DataFrame, path: Union[str, Path]) -> Path:
        """
        Cumulated loss and reward within each game, with a dotted line at every game boundary

        Args:
            log: Training log (interaction, game, loss, reward, tau, lr)
            path: Output file
        """
        fig, (ax_loss, ax_reward) = plt.subplots(2, 1, figsize=(10, 6), sharex=True)
        cumulated = log.groupby("game")[["loss", "reward"]].cumsum()

        ax_loss.plot(log["interaction"], cumulated["loss"], color="tab:red", linewidth=0.8)
        ax_reward.plot(log["interaction"], cumulated["reward"], color="tab:blue", linewidth=0.8)

        boundaries = log.groupby("game")["interaction"].max().to_numpy()[:-1]
        for ax in (ax_loss, ax_reward):
            for x in boundaries:
                ax.axvline(x, color="grey", linestyle=":", linewidth=0.6)
        ax_loss.set_ylabel("Cumulated loss")
        ax_reward.set_ylabel("Cumulated reward")
        ax_reward.set_xlabel("Interaction")
        ax_loss.set_title("Training progress")
        return self._save(fig, path)

    def plot_reward_histogram(self, rewards: Sequence[float], reward_scale: float,
                              path: Union[str, Path], bins: int = 40) -> Path:
        """Distribution of non-zero rewards before and after scaling"""
        scaled = np.asarray(rewards, dtype=np.float64)
        scaled = scaled[scaled != 0]
        unscaled = scaled / reward_scale if reward_scale else scaled

        fig, (ax_raw, ax_scaled) = plt.subplots(1, 2, figsize=(10, 4))
        ax_raw.hist(unscaled, bins=bins, color="tab:grey")
        ax_raw.set_title("Unscaled rewards")
        ax_scaled.hist(scaled, bins=bins, color="tab:blue")
        ax_scaled.set_title(f"Scaled rewards (x{reward_scale:g})")
        for ax in (ax_raw, ax_scaled):
            ax.set_xlabel("Reward")
            ax.set_ylabel("Count")
        return self._save(fig, path)

    def plot_q_sweeps(self, sweep: pd.DataFrame, path: Union[str, Path]) -> Path:
        """Q of each slot's label action against that slot's entropy and margin features"""
        slots = sorted(sweep["slot"].unique())
        fig, axes = plt.subplots(2, len(slots), figsize=(3.2 * len(slots), 6), squeeze=False)
        for col, slot in enumerate(slots):
            for row, feature in enumerate(("entropy", "margin")):
                ax = axes[row][col]
                part = sweep[(sweep["slot"] == slot) & (sweep["feature"] == feature)]
                for _, sample in part.groupby("sample"):
                    ax.plot(sample["feature_value"], sample["q_value"], color="tab:blue", alpha=0.3, linewidth=0.8)
                ax.set_title(f"slot {slot}: {FEATURE_NAMES[row]}", fontsize=9)
                ax.set_xlabel("feature value", fontsize=8)
                if col == 0:
                    ax.set_ylabel("Q(label slot)", fontsize=8)
        fig.tight_layout()
        return self._save(fig, path)
