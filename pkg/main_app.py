#!/usr/bin/env python3
"""
RL-driven Active Learning - Main Application Entry Point

Trains a Double-DQN sampling policy in the active learning environment,
evaluates it, runs the uncertainty-sampling baselines and inspects the learned
Q-values.

Usage:
    python main_app.py train --config configs/exp1.yaml --out runs/exp1
    python main_app.py eval --checkpoint runs/exp1/best_agent.ckpt --config configs/exp1.yaml --runs 15
    python main_app.py baselines --config configs/desk.yaml
    python main_app.py diagnose --checkpoint runs/exp2/best_agent.ckpt --buffer runs/exp2/replay_buffer.npz
"""

import argparse
import sys
import os
import logging
from pathlib import Path

# Add the current directory to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from dotenv import load_dotenv

load_dotenv()

import numpy as np

from rl_active_learning import CONFIG
from rl_active_learning.config import load_experiment_config
from rl_active_learning.core import ActiveLearningExperiment, DDQNAgent, ReplayBuffer, diagnose_q_correlation
from rl_active_learning.core.visualizer import ResultsVisualizer
from rl_active_learning.exceptions import ALRLError
from rl_active_learning.utils.helpers import ensure_directory_exists, log_system_info, setup_logging

logger = logging.getLogger(__name__)


def parse_arguments(argv=None):
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(
        description="RL-driven Active Learning",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Train an agent on the single-image environment
  python main_app.py train --config configs/exp1.yaml --out runs/exp1

  # Evaluate the best checkpoint greedily over 15 games
  python main_app.py eval --checkpoint runs/exp1/best_agent.ckpt --config configs/exp1.yaml --runs 15

  # Evaluate and put the baselines into the same comparison table
  python main_app.py eval --checkpoint runs/exp2/best_agent.ckpt --config configs/exp2.yaml --with-baselines

  # Random / BvsSB baselines at desk scale
  python main_app.py baselines --config configs/desk.yaml

  # Q-value vs feature diagnostics from a replay buffer dump
  python main_app.py diagnose --checkpoint runs/exp2/best_agent.ckpt --buffer runs/exp2/replay_buffer.npz
        """
    )
    parser.add_argument('--debug', action='store_true',
                        help='Enable debug mode')
    parser.add_argument('--verbose', '-v', action='store_true',
                        help='Enable verbose logging')

    commands = parser.add_subparsers(dest='command', required=True)

    train = commands.add_parser('train', help='Train a Double-DQN sampling agent')
    train.add_argument('--config', required=True, help='Experiment YAML file')
    train.add_argument('--out', help='Output directory (default: <outputDir>/<config name>)')

    evaluate = commands.add_parser('eval', help='Evaluate a trained agent')
    evaluate.add_argument('--checkpoint', required=True, help='Agent checkpoint file')
    evaluate.add_argument('--config', required=True, help='Experiment YAML file')
    evaluate.add_argument('--runs', type=int, help='Number of evaluation runs (default: evaluationRuns)')
    evaluate.add_argument('--out', help='Output directory')
    evaluate.add_argument('--with-baselines', action='store_true',
                          help='Also evaluate the baselines and include them in the table')
    evaluate.add_argument('--traces', action='store_true', help='Write per-run episode traces')

    baselines = commands.add_parser('baselines', help='Evaluate the baseline strategies')
    baselines.add_argument('--config', required=True, help='Experiment YAML file')
    baselines.add_argument('--runs', type=int, help='Number of evaluation runs (default: evaluationRuns)')
    baselines.add_argument('--out', help='Output directory')

    diagnose = commands.add_parser('diagnose', help='Q-value correlation sweeps')
    diagnose.add_argument('--checkpoint', required=True, help='Agent checkpoint file')
    diagnose.add_argument('--buffer', required=True, help='Replay buffer dump (.npz)')
    diagnose.add_argument('--out', help='Output directory (default: next to the checkpoint)')
    diagnose.add_argument('--samples', type=int, default=20, help='Base states to sweep (default: 20)')
    diagnose.add_argument('--points', type=int, default=25, help='Points per sweep (default: 25)')
    diagnose.add_argument('--seed', type=int, default=0, help='Seed for base-state sampling')

    return parser.parse_args(argv)


def _output_dir(args, config) -> Path:
    out = Path(args.out) if getattr(args, 'out', None) else Path(config.output_dir) / config.name
    ensure_directory_exists(str(out))
    return out


def _load_config(path: str):
    config = load_experiment_config(path)
    config.debug = config.debug or CONFIG.debug
    config.verbose_logging = config.verbose_logging or CONFIG.verbose_logging
    return config


def run_train(args) -> None:
    config = _load_config(args.config)
    out = _output_dir(args, config)
    setup_logging(logging.getLogger().level, str(out / 'rl_active_learning.log'))

    experiment = ActiveLearningExperiment(config)
    result = experiment.train_agent(out)
    print(f"✅ Training completed: {result.transitions_recorded} transitions, "
          f"best evaluation reward {result.best_eval_reward:.4f}")
    if result.best_checkpoint:
        print(f"💾 Best agent: {result.best_checkpoint}")


def run_eval(args) -> None:
    config = _load_config(args.config)
    out = _output_dir(args, config)
    setup_logging(logging.getLogger().level, str(out / 'rl_active_learning.log'))

    agent = DDQNAgent.load(args.checkpoint)
    experiment = ActiveLearningExperiment(config)
    curves = {"DDQN": experiment.evaluate(agent, args.runs, trace_dir=out / 'traces' if args.traces else None)}
    if args.with_baselines:
        curves.update(experiment.run_baselines(args.runs))
    experiment.emit(curves, out)
    print(f"✅ Evaluation completed: results in {out}")


def run_baselines(args) -> None:
    config = _load_config(args.config)
    out = _output_dir(args, config)
    setup_logging(logging.getLogger().level, str(out / 'rl_active_learning.log'))

    experiment = ActiveLearningExperiment(config)
    experiment.emit(experiment.run_baselines(args.runs), out)
    print(f"✅ Baselines completed: results in {out}")


def run_diagnose(args) -> None:
    out = Path(args.out) if args.out else Path(args.checkpoint).parent
    ensure_directory_exists(str(out))

    agent = DDQNAgent.load(args.checkpoint)
    buffer = ReplayBuffer.load(args.buffer)
    sweep, summary = diagnose_q_correlation(agent, buffer, np.random.default_rng(args.seed),
                                            n_samples=args.samples, n_points=args.points)
    sweep.to_csv(out / 'q_sweep.csv', index=False)
    summary.to_csv(out / 'q_correlation.csv', index=False)
    ResultsVisualizer().plot_q_sweeps(sweep, out / 'q_sweeps.svg')

    logger.info("\n" + summary.to_string(index=False))
    print(f"✅ Diagnostics completed: results in {out}")


COMMANDS = {
    'train': run_train,
    'eval': run_eval,
    'baselines': run_baselines,
    'diagnose': run_diagnose,
}


def main(argv=None):
    """Main application entry point"""
    args = parse_arguments(argv)

    # Configure global settings based on arguments
    if args.debug:
        CONFIG.debug = True
        CONFIG.verbose_logging = True

    setup_logging(logging.DEBUG if CONFIG.debug else logging.INFO)

    if args.verbose:
        CONFIG.verbose_logging = True

    if CONFIG.verbose_logging:
        log_system_info()

    try:
        COMMANDS[args.command](args)

    except KeyboardInterrupt:
        logger.info("Processing interrupted by user")
        print("\n👋 Processing stopped by user")

    except (ALRLError, OSError) as e:
        logger.error(f"Application error: {e}")
        print(f"❌ Error: {e}")
        if CONFIG.debug:
            import traceback
            traceback.print_exc()
        sys.exit(1)


if __name__ == "__main__":
    main()
