"""
Double-DQN agent: Q-networks, softmax-greedy policy, replay memory and schedules
"""

import logging
from collections import deque
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, Iterator, List, NamedTuple, Optional, Union

import numpy as np
import yaml

from .network import (Network, backward, batchnorm_layer, dense_layer, forward,
                      sgd_step, softmax)
from ..config.settings import CONFIG, AgentConfig
from ..exceptions import ConfigurationError, NumericError
from ..utils.checkpoint import load_tensors, save_tensors

logger = logging.getLogger(__name__)


class Transition(NamedTuple):
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """FIFO experience memory with uniform minibatch sampling"""

    def __init__(self, capacity: int = 1000):
        if capacity < 1:
            raise ConfigurationError(f"Replay capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.memory: deque = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self.memory)

    def __iter__(self) -> Iterator[Transition]:
        return iter(self.memory)

    def remember(self, transition: Transition) -> "ReplayBuffer":
        self.memory.append(transition)
        return self

    def sample(self, batch_size: int, rng: np.random.Generator) -> List[Transition]:
        """Uniform sample without replacement"""
        if batch_size > len(self.memory):
            raise ConfigurationError(f"Cannot sample {batch_size} transitions from {len(self.memory)}")
        picks = rng.choice(len(self.memory), size=batch_size, replace=False)
        return [self.memory[i] for i in picks]

    def as_arrays(self) -> Dict[str, np.ndarray]:
        if not self.memory:
            return {"states": np.zeros((0, 0)), "actions": np.zeros(0, dtype=np.int64),
                    "rewards": np.zeros(0), "next_states": np.zeros((0, 0)), "dones": np.zeros(0, dtype=bool)}
        return {
            "states": np.stack([t.state for t in self.memory]),
            "actions": np.array([t.action for t in self.memory], dtype=np.int64),
            "rewards": np.array([t.reward for t in self.memory], dtype=np.float64),
            "next_states": np.stack([t.next_state for t in self.memory]),
            "dones": np.array([t.done for t in self.memory], dtype=bool),
        }

    def states(self) -> np.ndarray:
        return self.as_arrays()["states"]

    def save(self, path: Union[str, Path]) -> None:
        try:
            np.savez(path, capacity=self.capacity, **self.as_arrays())
        except OSError as e:
            raise OSError(f"Cannot write replay buffer {path}: {e}") from e
        logger.info(f"Saved {len(self)} transitions to {path}")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ReplayBuffer":
        try:
            archive = np.load(path)
        except OSError as e:
            raise OSError(f"Cannot read replay buffer {path}: {e}") from e
        with archive:
            buffer = cls(int(archive["capacity"]))
            for s, a, r, s2, d in zip(archive["states"], archive["actions"], archive["rewards"],
                                      archive["next_states"], archive["dones"]):
                buffer.remember(Transition(s, int(a), float(r), s2, bool(d)))
        return buffer


class GreedSchedule:
    """Greed parameter tau: held at start during exploration, linear to end over conversion"""

    def __init__(self, tau_start: float = 1.0, tau_end: float = 0.2,
                 exploration_steps: int = 4000, conversion_steps: int = 4000):
        if tau_end <= 0 or tau_start <= 0:
            raise ConfigurationError("Greed parameter must stay positive")
        self.tau_start = tau_start
        self.tau_end = tau_end
        self.exploration_steps = exploration_steps
        self.conversion_steps = conversion_steps

    def value(self, t: int) -> float:
        if t < self.exploration_steps:
            return self.tau_start
        if self.conversion_steps <= 0 or t >= self.exploration_steps + self.conversion_steps:
            return self.tau_end
        progress = (t - self.exploration_steps) / self.conversion_steps
        return self.tau_start + (self.tau_end - self.tau_start) * progress


class LearningRateSchedule:
    """Linear decay from lr_start to lr_end over the training interactions"""

    def __init__(self, lr_start: float = 0.001, lr_end: float = 0.00001, total_steps: int = 12000):
        self.lr_start = lr_start
        self.lr_end = lr_end
        self.total_steps = max(1, total_steps)

    def value(self, t: int) -> float:
        progress = min(max(t, 0) / self.total_steps, 1.0)
        return self.lr_start + (self.lr_end - self.lr_start) * progress


def build_q_network(state_dim: int, n_actions: int, config: AgentConfig,
                    rng: np.random.Generator) -> Network:
    """Dense+LeakyReLU(+BatchNorm) per hidden width, then a linear Q head"""
    layers = []
    width = state_dim
    for i, units in enumerate(config.hidden_units):
        layers.append(dense_layer(width, units, rng, activation="leaky_relu",
                                  alpha=config.leaky_alpha, l2=config.l2, name=f"hidden{i + 1}"))
        if config.batchnorm:
            layers.append(batchnorm_layer(units, name=f"bn{i + 1}"))
        width = units
    layers.append(dense_layer(width, n_actions, rng, l2=config.l2, name="q"))
    net = Network(layers, loss="mse")
    net.output_shape((state_dim,))
    return net


class DDQNAgent:
    """Double deep Q-learning agent with a lagged target network"""

    def __init__(self, state_dim: int, n_actions: int, config: Optional[AgentConfig] = None,
                 rng: Optional[np.random.Generator] = None):
        """
        Initialize primary and target networks

        Args:
            state_dim: Length of the environment state vector
            n_actions: Size of the action space
            config: Agent settings (defaults from CONFIG)
            rng: Random generator for initialization
        """
        self.config = config or CONFIG.agent
        self.state_dim = state_dim
        self.n_actions = n_actions
        self.primary = build_q_network(state_dim, n_actions, self.config, rng or np.random.default_rng())
        self.target = self.primary.clone()
        self.update_counter = 0
        self.meta: Dict[str, Any] = {}

        logger.info(f"Initialized DDQNAgent: state {state_dim}, actions {n_actions}, "
                    f"hidden {tuple(self.config.hidden_units)}, {self.primary.n_parameters} parameters")

    def _as_batch(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=np.float64)
        if states.ndim == 1:
            states = states[None, :]
        if states.shape[1] != self.state_dim:
            raise ConfigurationError(f"State dimension {states.shape[1]} does not match agent input {self.state_dim}")
        return states

    def q_values(self, states: np.ndarray, network: Optional[Network] = None) -> np.ndarray:
        """Q-values [N, n_actions] in eval mode"""
        return forward(network or self.primary, self._as_batch(states), training=False)

    def act(self, state: np.ndarray, tau: float, rng: np.random.Generator, greedy: bool = False) -> int:
        """
        Choose an action

        Args:
            state: Single state vector
            tau: Greed parameter (softmax temperature)
            rng: Random generator for sampling
            greedy: Take argmax Q instead of sampling

        Returns:
            Action index
        """
        q = self.q_values(state)[0]
        if greedy:
            return int(np.argmax(q))
        return int(rng.choice(self.n_actions, p=softmax(q, tau)))

    def ddqn_targets(self, rewards: np.ndarray, next_states: np.ndarray, dones: np.ndarray) -> np.ndarray:
        """y = r + gamma * Q_target(s', argmax_a Q_primary(s', a)); y = r when done"""
        rewards = np.asarray(rewards, dtype=np.float64)
        next_states = self._as_batch(next_states)
        best = np.argmax(self.q_values(next_states), axis=1)
        bootstrap = self.q_values(next_states, self.target)[np.arange(len(best)), best]
        return np.where(np.asarray(dones, dtype=bool), rewards, rewards + self.config.gamma * bootstrap)

    def ddqn_target(self, transition: Transition) -> float:
        return float(self.ddqn_targets([transition.reward], [transition.next_state], [transition.done])[0])

    def sync_target(self) -> None:
        self.target = self.primary.clone()

    def train_step(self, buffer: ReplayBuffer, lr: float, rng: np.random.Generator) -> float:
        """
        One minibatch update of the primary network

        Args:
            buffer: Replay memory
            lr: Learning rate for this step
            rng: Random generator for minibatch sampling

        Returns:
            Minibatch loss; 0.0 while the buffer is smaller than one batch
        """
        if len(buffer) < self.config.batch_size:
            return 0.0

        batch = buffer.sample(self.config.batch_size, rng)
        states = np.stack([t.state for t in batch])
        actions = np.array([t.action for t in batch], dtype=np.int64)
        targets_y = self.ddqn_targets([t.reward for t in batch],
                                      np.stack([t.next_state for t in batch]),
                                      [t.done for t in batch])

        rows = np.arange(len(batch))
        mask = np.zeros((len(batch), self.n_actions))
        mask[rows, actions] = 1.0
        target = np.zeros_like(mask)
        target[rows, actions] = targets_y

        try:
            grads = backward(self.primary, states, target, mask=mask, training=True)
            sgd_step(self.primary, grads, lr)
        except NumericError as e:
            e.diagnostics.update(update=self.update_counter, lr=lr,
                                 max_abs_target=float(np.max(np.abs(targets_y))))
            raise

        self.update_counter += 1
        if self.update_counter % self.config.target_sync == 0:
            self.sync_target()
        return grads.loss

    def architecture(self) -> Dict[str, Any]:
        agent_cfg = asdict(self.config)
        agent_cfg["hidden_units"] = list(self.config.hidden_units)
        return {"state_dim": self.state_dim, "n_actions": self.n_actions, "agent": agent_cfg}

    def save(self, path: Union[str, Path], **meta: Any) -> None:
        """Write primary-network tensors plus a YAML sidecar with architecture and training metadata"""
        path = Path(path)
        save_tensors(self.primary.state_tensors(), path)
        record = self.architecture()
        record.update({"update_counter": self.update_counter}, **{k: _plain(v) for k, v in meta.items()})
        meta_path = path.with_name(path.name + ".meta.yaml")
        try:
            with open(meta_path, "w") as f:
                yaml.safe_dump(record, f, default_flow_style=False, sort_keys=False)
        except OSError as e:
            raise OSError(f"Cannot write agent metadata {meta_path}: {e}") from e
        logger.info(f"Saved agent checkpoint to {path}")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DDQNAgent":
        path = Path(path)
        meta_path = path.with_name(path.name + ".meta.yaml")
        try:
            with open(meta_path) as f:
                record = yaml.safe_load(f)
        except OSError as e:
            raise OSError(f"Cannot read agent metadata {meta_path}: {e}") from e

        agent_fields = dict(record["agent"])
        agent_fields["hidden_units"] = tuple(agent_fields["hidden_units"])
        agent = cls(int(record["state_dim"]), int(record["n_actions"]), AgentConfig(**agent_fields))
        agent.primary.load_state_tensors(load_tensors(path))
        agent.sync_target()
        agent.update_counter = int(record.get("update_counter", 0))
        agent.meta = {k: v for k, v in record.items() if k not in ("state_dim", "n_actions", "agent")}
        logger.info(f"Loaded agent checkpoint from {path}")
        return agent


def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value
