"""
Experiment driver: agent training, evaluation protocol, baselines and Q diagnostics
"""

import copy
import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from .agent import DDQNAgent, GreedSchedule, LearningRateSchedule, ReplayBuffer, Transition
from .datasets import Dataset, ValidationSplit, load_datasets
from .environment import ALEnvironment
from .sampling import ThresholdPolicy, select_most_informative, select_random, select_variant2
from .visualizer import ResultsVisualizer
from ..config.settings import CONFIG, EnvConfig, ExperimentConfig, save_experiment_config
from ..exceptions import ConfigurationError, NumericError, PoolExhaustedError
from ..utils.helpers import PerformanceTimer, ensure_directory_exists
from ..utils import results

logger = logging.getLogger(__name__)

EXTRA_STRATEGY_NAMES = {"least_confident": "LeastConfident", "entropy": "Entropy", "bvssb": "BvsSB1"}

PlayFn = Callable[[ALEnvironment, np.random.Generator], None]


@dataclass
class EvalCurve:
    """Tracked F1 after each added image (1..budget) for every evaluation run"""
    strategy: str
    raw: np.ndarray
    truncated: List[bool] = field(default_factory=list)
    smoothing_window: int = 10

    @property
    def budget(self) -> int:
        return self.raw.shape[1]

    @property
    def x(self) -> np.ndarray:
        return np.arange(1, self.budget + 1)

    @property
    def mean(self) -> np.ndarray:
        return self.raw.mean(axis=0)

    @property
    def smoothed(self) -> np.ndarray:
        return results.smooth(self.mean, self.smoothing_window)

    def checkpoint_value(self, x: int, window: int = 10) -> float:
        """Mean of the smoothed curve over [x - window, x + window], clipped to the domain"""
        lo, hi = max(1, x - window), min(self.budget, x + window)
        if lo > hi:
            return float("nan")
        return float(self.smoothed[lo - 1:hi].mean())


@dataclass
class TrainingResult:
    agent: DDQNAgent
    best_agent: DDQNAgent
    buffer: ReplayBuffer
    log: pd.DataFrame
    games: pd.DataFrame
    best_eval_reward: float
    best_checkpoint: Optional[Path] = None
    reward_trend: Optional[float] = None

    @property
    def transitions_recorded(self) -> int:
        return len(self.log)


def _has_spread(spread, scale):
    """Spread above rounding noise relative to the magnitude of the values"""
    return np.asarray(spread) > 1e-12 * np.maximum(1.0, np.abs(scale))


def feature_statistics(states: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and population standard deviation of stored states"""
    states = np.asarray(states, dtype=np.float64)
    return states.mean(axis=0), states.std(axis=0)


def diagnose_q_correlation(agent: DDQNAgent, buffer: ReplayBuffer, rng: np.random.Generator,
                           n_samples: int = 20, n_points: int = 25) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Sweep each slot's entropy and margin feature and record Q of that slot's label action

    Base states are drawn with every feature uniform in mu +/- 2 sigma of the
    replay memory; one feature at a time is then swept across the same range.

    Args:
        agent: Agent to inspect
        buffer: Replay memory providing the state distribution
        rng: Random generator for the base states
        n_samples: Number of base states
        n_points: Points per sweep (one point for a constant feature)

    Returns:
        (sweep table, correlation summary)
    """
    if len(buffer) == 0:
        raise ConfigurationError("Cannot diagnose Q-values from an empty replay buffer")

    states = buffer.states()
    mu, sigma = feature_statistics(states)
    # std of a constant column is not exactly 0 in floating point
    constant = (np.ptp(states, axis=0) == 0) | ~_has_spread(sigma, mu)
    sigma = np.where(constant, 0.0, sigma)
    low, high = mu - 2 * sigma, mu + 2 * sigma
    base = rng.uniform(low, high, size=(n_samples, len(mu)))
    n_slots = agent.n_actions - 1

    rows = []
    for slot in range(n_slots):
        for offset, feature in enumerate(("entropy", "margin")):
            idx = 2 * slot + offset
            values = np.array([mu[idx]]) if constant[idx] else np.linspace(low[idx], high[idx], n_points)
            for sample in range(n_samples):
                batch = np.repeat(base[sample][None, :], len(values), axis=0)
                batch[:, idx] = values
                q = agent.q_values(batch)[:, slot]
                for value, q_value in zip(values, q):
                    rows.append((slot, feature, idx, sample, float(value), float(q_value)))

    sweep = pd.DataFrame(rows, columns=["slot", "feature", "feature_index", "sample", "feature_value", "q_value"])

    summary = []
    for (slot, feature), part in sweep.groupby(["slot", "feature"], sort=True):
        x, y = part["feature_value"].to_numpy(), part["q_value"].to_numpy()
        if _has_spread(np.ptp(x), np.abs(x).max()) and _has_spread(np.ptp(y), np.abs(y).max()):
            r = stats.pearsonr(x, y)[0]
            slope = stats.linregress(x, y).slope
        else:
            r, slope = float("nan"), 0.0
        summary.append({"slot": slot, "feature": feature, "pearson_r": float(r), "slope": float(slope)})
    return sweep, pd.DataFrame(summary)


class ActiveLearningExperiment:
    """
    Orchestrates environments, agent and baselines for one experiment configuration
    """

    def __init__(self, config: Optional[ExperimentConfig] = None,
                 train: Optional[Dataset] = None,
                 validation: Optional[ValidationSplit] = None,
                 model_factory: Optional[Callable[[], object]] = None):
        """
        Initialize the experiment

        Args:
            config: Experiment configuration (uses global CONFIG if None)
            train: Pool dataset; loaded from the configured source when omitted
            validation: Validation split; loaded together with train when omitted
            model_factory: Builds the classifier for each environment (real ICModel when omitted)
        """
        self.config = (config or CONFIG).validate()
        if train is None or validation is None:
            with PerformanceTimer("Dataset loading"):
                train, validation = load_datasets(self.config, self.config.seed)
        self.train = train
        self.validation = validation
        self.model_factory = model_factory
        self.visualizer = ResultsVisualizer()

        logger.info(f"🚀 Experiment {self.config.name}: mode={self.config.env.mode}, "
                    f"budget={self.config.env.budget}, {len(train)} pool images, "
                    f"{len(validation.reduced_validation)} validation images")

    def make_env(self, env_config: Optional[EnvConfig] = None, seed=0) -> ALEnvironment:
        model = self.model_factory() if self.model_factory else None
        return ALEnvironment(self.train, self.validation.reduced_validation,
                             env_config or self.config.env, self.config.classifier,
                             model=model, seed=seed)

    # ------------------------------------------------------------------ training

    def train_agent(self, output_dir: Union[str, Path, None] = None) -> TrainingResult:
        """
        Learn a sampling policy by interacting with the environment

        Args:
            output_dir: Where logs, buffer dump, checkpoints and figures go (nothing written when None)

        Returns:
            TrainingResult with the final and the best-evaluated agent
        """
        cfg = self.config
        out = Path(output_dir) if output_dir else None
        if out:
            ensure_directory_exists(str(out))
            save_experiment_config(cfg, out / "config.yaml")

        env = self.make_env(seed=[cfg.seed, 0])
        eval_env = self.make_env(seed=[cfg.seed, 1])
        rng = np.random.default_rng([cfg.seed, 2])
        agent = DDQNAgent(env.state_space, env.action_space, cfg.agent, rng)
        buffer = ReplayBuffer(cfg.agent.memory_max_length)
        greed = GreedSchedule(cfg.agent.tau_start, cfg.agent.tau_end, cfg.exploration, cfg.conversion)
        lr_schedule = LearningRateSchedule(cfg.agent.lr_start, cfg.agent.lr_end, cfg.total_interactions)

        log_rows: List[Dict] = []
        game_rows: List[Dict] = []
        best = {"reward": -math.inf, "agent": copy.deepcopy(agent), "path": None}
        game, game_loss, game_reward = 0, 0.0, 0.0
        tau = lr = 0.0

        def close_game(t: int, info: Dict, complete: bool) -> None:
            game_rows.append({
                "game": game, "end_interaction": t, "loss": game_loss, "reward": game_reward,
                "tracked_f1": info.get("tracked_f1", float("nan")),
                "added_images": info.get("added_images", 0),
                "truncated": info.get("truncated", False), "complete": complete,
            })

        def consider_checkpoint(t: int) -> None:
            reward = self._play_evaluation_game(agent, eval_env)
            logger.info(f"📊 Evaluation after game {game} (interaction {t}): cumulated reward {reward:.4f}")
            if reward > best["reward"]:
                best.update(reward=reward, agent=copy.deepcopy(agent))
                if out:
                    best["path"] = out / "best_agent.ckpt"
                    agent.save(best["path"], step=t, tau=tau, lr=lr, eval_reward=reward)

        try:
            with PerformanceTimer("Agent training"):
                state = env.reset()
                info: Dict = {}
                for t in range(cfg.total_interactions):
                    tau, lr = greed.value(t), lr_schedule.value(t)
                    action = agent.act(state, tau, rng)
                    next_state, reward, done, info = env.step(action)
                    buffer.remember(Transition(state, action, reward, next_state, done))
                    loss = agent.train_step(buffer, lr, rng)
                    log_rows.append({"interaction": t + 1, "game": game, "loss": loss,
                                     "reward": reward, "tau": tau, "lr": lr})
                    game_loss += loss
                    game_reward += reward

                    if done:
                        close_game(t + 1, info, True)
                        logger.info(f"🎮 Game {game} finished at interaction {t + 1}: reward {game_reward:.4f}, "
                                    f"loss {game_loss:.4f}, tracked F1 {info['tracked_f1']:.4f}")
                        game += 1
                        game_loss, game_reward = 0.0, 0.0
                        if game % cfg.eval_every_games == 0:
                            consider_checkpoint(t + 1)
                        state = env.reset()
                    else:
                        state = next_state

                if log_rows and log_rows[-1]["game"] == game:
                    close_game(cfg.total_interactions, info, False)
                consider_checkpoint(cfg.total_interactions)
        except (NumericError, PoolExhaustedError) as e:
            logger.error(f"❌ Training aborted after {len(log_rows)} interactions: {e}")
            if out:
                self._write_training_outputs(out, log_rows, game_rows, buffer, agent)
            raise

        log, games = self._frames(log_rows, game_rows)
        trend = self._reward_trend(games)
        result = TrainingResult(agent=agent, best_agent=best["agent"], buffer=buffer, log=log, games=games,
                                best_eval_reward=best["reward"], best_checkpoint=best["path"], reward_trend=trend)
        if out:
            self._write_training_outputs(out, log_rows, game_rows, buffer, agent)

        logger.info(f"✅ Training complete: {result.transitions_recorded} transitions, {len(games)} games, "
                    f"best evaluation reward {best['reward']:.4f}")
        return result

    @staticmethod
    def _frames(log_rows: List[Dict], game_rows: List[Dict]) -> Tuple[pd.DataFrame, pd.DataFrame]:
        log = pd.DataFrame(log_rows, columns=results.TRAINING_LOG_COLUMNS)
        games = pd.DataFrame(game_rows, columns=["game", "end_interaction", "loss", "reward", "tracked_f1",
                                                 "added_images", "truncated", "complete"])
        return log, games

    @staticmethod
    def _reward_trend(games: pd.DataFrame) -> Optional[float]:
        complete = games[games["complete"]]
        if len(complete) < 3:
            return None
        slope = float(stats.linregress(complete["game"], complete["reward"]).slope)
        if slope < 0:
            logger.warning(f"⚠️ Per-game reward trend is negative (slope {slope:.5f}); the agent is not improving")
        else:
            logger.info(f"Per-game reward trend slope {slope:.5f}")
        return slope

    def _write_training_outputs(self, out: Path, log_rows, game_rows, buffer: ReplayBuffer,
                                agent: DDQNAgent) -> None:
        log, games = self._frames(log_rows, game_rows)
        results.write_training_log(log, out / "training_log.csv")
        games.to_csv(out / "games.csv", index=False)
        buffer.save(out / "replay_buffer.npz")
        agent.save(out / "final_agent.ckpt", step=len(log_rows))
        if len(log):
            self.visualizer.plot_training_progress(log, out / "training_progress.svg")
            self.visualizer.plot_reward_histogram(log["reward"], self.config.env.reward_scale,
                                                  out / "reward_histogram.svg")

    @staticmethod
    def _play_evaluation_game(agent: DDQNAgent, env: ALEnvironment) -> float:
        state = env.reset()
        total, done = 0.0, False
        while not done:
            state, reward, done, _ = env.step(agent.act(state, 1.0, None, greedy=True))
            total += reward
        return total

    # ------------------------------------------------------------------ evaluation

    def _evaluate(self, name: str, play: PlayFn, env_config: EnvConfig,
                  runs: Optional[int] = None, trace_dir: Optional[Path] = None) -> EvalCurve:
        cfg = self.config
        runs = runs or cfg.eval_runs
        budget = cfg.env.budget

        def run_one(run: int) -> Tuple[np.ndarray, bool]:
            env = self.make_env(env_config, seed=[cfg.seed, 1000 + run])
            play(env, np.random.default_rng([cfg.seed, 2000 + run]))
            values = list(env.curve[:budget])
            truncated = env.truncated or env.exhausted or len(values) < budget
            if len(values) < budget:
                values.extend([values[-1] if values else env.tracked_f1] * (budget - len(values)))
            if trace_dir is not None and env.trace:
                env.save_trace(trace_dir / f"trace_{name}_run{run}.csv")
            logger.info(f"{name} run {run + 1}/{runs}: final tracked F1 {values[-1]:.4f}"
                        f"{' (truncated)' if truncated else ''}")
            return np.asarray(values), truncated

        with PerformanceTimer(f"Evaluation of {name} ({runs} runs)"):
            if cfg.workers > 1:
                with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
                    outcomes = list(executor.map(run_one, range(runs)))
            else:
                outcomes = [run_one(run) for run in range(runs)]

        return EvalCurve(strategy=name, raw=np.stack([o[0] for o in outcomes]),
                         truncated=[o[1] for o in outcomes], smoothing_window=cfg.smoothing_window)

    def evaluate(self, agent: DDQNAgent, runs: Optional[int] = None, name: str = "DDQN",
                 trace_dir: Union[str, Path, None] = None) -> EvalCurve:
        """
        Greedy games to budget with a trained agent, averaged over runs

        Args:
            agent: Trained agent
            runs: Number of evaluation runs (defaults to eval_runs)
            name: Strategy name for outputs
            trace_dir: Optional directory for per-run episode traces

        Returns:
            EvalCurve
        """
        if trace_dir is not None:
            ensure_directory_exists(str(trace_dir))

        def play(env: ALEnvironment, rng: np.random.Generator) -> None:
            state, done = env.reset(), False
            while not done:
                state, _, done, _ = env.step(agent.act(state, 1.0, rng, greedy=True))

        return self._evaluate(name, play, self.config.env, runs, Path(trace_dir) if trace_dir else None)

    @staticmethod
    def _pool_player(select: Callable[[ALEnvironment, np.random.Generator], int]) -> PlayFn:
        """Label one image at a time, retraining after each, until the budget is spent"""
        def play(env: ALEnvironment, rng: np.random.Generator) -> None:
            env.reset()
            while env.images_added < env.config.budget and env.pool.n_unlabeled > 0:
                env.add_images([select(env, rng)])
        return play

    def _threshold_player(self) -> PlayFn:
        bcfg = self.config.baseline

        def play(env: ALEnvironment, rng: np.random.Generator) -> None:
            policy = ThresholdPolicy(bcfg.initial_threshold, bcfg.threshold_decay, bcfg.sample_size)
            env.reset()
            done = False
            while not done:
                candidates = [slot[0] for slot in env.slots]
                decision = select_variant2(policy, candidates, env.model, env.train)
                action = candidates.index(decision.id) if decision.add else env.no_label_action
                _, _, done, _ = env.step(action)
        return play

    def _threshold_env_config(self) -> EnvConfig:
        env_cfg, bcfg = self.config.env, self.config.baseline
        max_interactions = env_cfg.max_interactions_per_game
        if bcfg.threshold_decay > 0:
            # enough interactions for every add to wait out a full threshold decay
            per_add = math.ceil(bcfg.initial_threshold / bcfg.threshold_decay) + 1
            max_interactions = max(max_interactions, env_cfg.budget * per_add)
        return replace(env_cfg, mode="exp2_sample", sample_size=bcfg.sample_size,
                       reward_shaping=False, max_interactions_per_game=max_interactions)

    def run_baselines(self, runs: Optional[int] = None) -> Dict[str, EvalCurve]:
        """
        Evaluate Random, BvsSB variant 1, BvsSB variant 2 and any configured extra strategies

        Returns:
            Strategy name -> EvalCurve, all on the same x-grid
        """
        pool_env = replace(self.config.env, mode="exp1_single", reward_shaping=False)
        curves = {
            "Random": self._evaluate("Random", self._pool_player(lambda env, rng: select_random(env.pool, rng)),
                                     pool_env, runs),
            "BvsSB1": self._evaluate("BvsSB1", self._pool_player(
                lambda env, rng: select_most_informative(env.pool, env.model, "bvssb")), pool_env, runs),
            "BvsSB2": self._evaluate("BvsSB2", self._threshold_player(), self._threshold_env_config(), runs),
        }
        for strategy in self.config.baseline.extra_strategies:
            if strategy not in EXTRA_STRATEGY_NAMES:
                raise ConfigurationError(f"Unknown baseline strategy {strategy!r}")
            name = EXTRA_STRATEGY_NAMES[strategy]
            if name in curves:
                continue
            curves[name] = self._evaluate(name, self._pool_player(
                lambda env, rng, s=strategy: select_most_informative(env.pool, env.model, s)), pool_env, runs)
        return curves

    # ------------------------------------------------------------------ emission

    def emit(self, curves: Dict[str, EvalCurve], output_dir: Union[str, Path]) -> pd.DataFrame:
        """
        Write curve CSVs, the comparison table (CSV and aligned text) and the curve figure

        Returns:
            The comparison table
        """
        out = Path(output_dir)
        ensure_directory_exists(str(out))
        for name, curve in curves.items():
            results.write_curves(curve, out / f"curves_{name}.csv")
        checkpoints = [x for x in self.config.table_checkpoints if x <= self.config.env.budget]
        table = results.comparison_table(curves, checkpoints, self.config.table_window)
        results.write_table(table, out / "comparison_table.csv", out / "comparison_table.txt")
        self.visualizer.plot_curves(curves, out / "f1_curves.svg", checkpoints)
        logger.info("\n" + table.to_string(index=False, float_format=lambda v: f"{v:.2f}"))
        return table
