"""
CSV emission and readers for evaluation curves, training logs and comparison tables
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, Sequence, Union

import numpy as np
import pandas as pd

from ..exceptions import ConfigurationError

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ["run", "x", "f1_raw", "f1_smoothed"]
TRAINING_LOG_COLUMNS = ["interaction", "game", "loss", "reward", "tau", "lr"]
MEAN_RUN = -1

PathLike = Union[str, Path]


def smooth(values: Sequence[float], window: int) -> np.ndarray:
    """Centered moving average; windows are truncated at the series edges"""
    series = pd.Series(np.asarray(values, dtype=np.float64))
    return series.rolling(window, min_periods=1, center=True).mean().to_numpy()


def _write_csv(frame: pd.DataFrame, path: PathLike, **kwargs) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, **kwargs)
    except OSError as e:
        raise OSError(f"Cannot write {path}: {e}") from e
    logger.info(f"Wrote {path}")
    return path


def _read_csv(path: PathLike, columns: Iterable[str]) -> pd.DataFrame:
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except OSError as e:
        raise OSError(f"Cannot read {path}: {e}") from e
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ConfigurationError(f"{path} is missing columns {missing}")
    return frame


def curve_frame(curve) -> pd.DataFrame:
    """One row per (run, x) plus the mean curve under run -1"""
    frames = []
    for run in range(curve.raw.shape[0]):
        frames.append(pd.DataFrame({
            "run": run,
            "x": curve.x,
            "f1_raw": curve.raw[run],
            "f1_smoothed": smooth(curve.raw[run], curve.smoothing_window),
        }))
    frames.append(pd.DataFrame({"run": MEAN_RUN, "x": curve.x, "f1_raw": curve.mean, "f1_smoothed": curve.smoothed}))
    return pd.concat(frames, ignore_index=True)[CURVE_COLUMNS]


def write_curves(curve, path: PathLike) -> Path:
    return _write_csv(curve_frame(curve), path)


def read_curves(path: PathLike) -> pd.DataFrame:
    return _read_csv(path, CURVE_COLUMNS)


def write_training_log(log: pd.DataFrame, path: PathLike) -> Path:
    return _write_csv(log[TRAINING_LOG_COLUMNS], path)


def read_training_log(path: PathLike) -> pd.DataFrame:
    return _read_csv(path, TRAINING_LOG_COLUMNS)


def comparison_table(curves: Dict[str, object], checkpoints: Sequence[int], window: int = 10) -> pd.DataFrame:
    """
    Smoothed mean F1 of every strategy averaged in [x - window, x + window] around each checkpoint

    Args:
        curves: Strategy name -> EvalCurve
        checkpoints: Numbers of added images to report
        window: Half-width of the averaging window

    Returns:
        DataFrame with a strategy column and one f1@x column per checkpoint
    """
    rows = []
    for name, curve in curves.items():
        row = {"strategy": name}
        for x in checkpoints:
            row[f"f1@{x}"] = curve.checkpoint_value(x, window)
        rows.append(row)
    return pd.DataFrame(rows, columns=["strategy"] + [f"f1@{x}" for x in checkpoints])


def write_table(table: pd.DataFrame, csv_path: PathLike, text_path: PathLike = None) -> Path:
    """CSV with two decimals, plus an aligned text rendering when text_path is given"""
    path = _write_csv(table, csv_path, float_format="%.2f")
    if text_path is not None:
        text_path = Path(text_path)
        try:
            text_path.write_text(table.to_string(index=False, float_format=lambda v: f"{v:.2f}") + "\n")
        except OSError as e:
            raise OSError(f"Cannot write {text_path}: {e}") from e
        logger.info(f"Wrote {text_path}")
    return path


def read_table(path: PathLike) -> pd.DataFrame:
    return _read_csv(path, ["strategy"])
