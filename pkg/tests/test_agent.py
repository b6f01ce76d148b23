import numpy as np
import pytest

from rl_active_learning.config import AgentConfig
from rl_active_learning.core.agent import (
    DDQNAgent, GreedSchedule, LearningRateSchedule, ReplayBuffer, Transition, build_q_network,
)
from rl_active_learning.exceptions import ConfigurationError, NumericError


def _linear_agent(state_dim=2, n_actions=2, **overrides):
    config = AgentConfig(hidden_units=(), batchnorm=False, l2=0.0)
    for key, value in overrides.items():
        setattr(config, key, value)
    return DDQNAgent(state_dim, n_actions, config, np.random.default_rng(0))


def _set_bias(network, bias):
    network.layers[-1].W = np.zeros_like(network.layers[-1].W)
    network.layers[-1].b = np.asarray(bias, dtype=np.float64)


def _filled_buffer(n, state_dim=4, n_actions=3, rng=None):
    rng = rng or np.random.default_rng(1)
    buffer = ReplayBuffer(1000)
    for i in range(n):
        buffer.remember(Transition(rng.standard_normal(state_dim), int(i % n_actions),
                                   float(rng.random()), rng.standard_normal(state_dim), i % 7 == 0))
    return buffer


class TestQNetwork:
    def test_default_architecture(self, rng):
        net = build_q_network(27, 2, AgentConfig(), rng)
        kinds = [(layer.kind, layer.name) for layer in net.layers]
        assert kinds == [("dense", "hidden1"), ("batchnorm", "bn1"), ("dense", "hidden2"),
                         ("batchnorm", "bn2"), ("dense", "q")]
        assert net.layers[0].W.shape == (24, 27)
        assert net.layers[0].alpha == 0.3 and net.layers[0].l2 == 0.001
        assert net.layers[-1].activation == "none"

    def test_target_starts_as_copy(self):
        agent = DDQNAgent(35, 6, AgentConfig(hidden_units=(48, 24)), np.random.default_rng(2))
        states = np.random.default_rng(3).standard_normal((4, 35))
        np.testing.assert_array_equal(agent.q_values(states), agent.q_values(states, agent.target))
        assert agent.target is not agent.primary

    def test_wrong_state_dimension(self):
        with pytest.raises(ConfigurationError):
            _linear_agent().q_values(np.zeros(3))


class TestTargets:
    def test_double_dqn_decouples_selection_and_evaluation(self):
        agent = _linear_agent(gamma=0.9)
        _set_bias(agent.primary, [1.0, 3.0])
        _set_bias(agent.target, [2.0, 0.0])
        y = agent.ddqn_target(Transition(np.zeros(2), 0, 0.5, np.ones(2), False))
        # plain DQN would bootstrap from max target Q: 0.5 + 0.9 * 2
        assert y == pytest.approx(0.5)

    def test_terminal_target_is_reward(self):
        agent = _linear_agent()
        _set_bias(agent.primary, [1.0, 3.0])
        _set_bias(agent.target, [5.0, 5.0])
        assert agent.ddqn_target(Transition(np.zeros(2), 1, -0.25, np.ones(2), True)) == -0.25

    def test_batch_targets(self):
        agent = _linear_agent(gamma=0.5)
        _set_bias(agent.primary, [0.0, 1.0])
        _set_bias(agent.target, [4.0, 2.0])
        y = agent.ddqn_targets([1.0, 1.0], np.zeros((2, 2)), [False, True])
        np.testing.assert_allclose(y, [2.0, 1.0])


class TestTraining:
    def test_warm_up_returns_zero(self, rng):
        agent = DDQNAgent(4, 3, AgentConfig(batch_size=8), rng)
        before = agent.primary.clone()
        assert agent.train_step(_filled_buffer(7), 0.01, rng) == 0.0
        np.testing.assert_array_equal(agent.primary.layers[0].W, before.layers[0].W)
        assert agent.update_counter == 0

    def test_target_syncs_every_ten_updates(self, rng):
        agent = DDQNAgent(4, 3, AgentConfig(batch_size=8, hidden_units=(6,)), rng)
        buffer = _filled_buffer(40)
        states = buffer.states()[:5]
        initial_target = agent.q_values(states, agent.target)
        for _ in range(9):
            agent.train_step(buffer, 0.05, rng)
        np.testing.assert_array_equal(agent.q_values(states, agent.target), initial_target)
        assert not np.allclose(agent.q_values(states), initial_target)
        agent.train_step(buffer, 0.05, rng)
        np.testing.assert_array_equal(agent.q_values(states, agent.target), agent.q_values(states))

    def test_only_taken_action_is_trained(self, rng):
        agent = _linear_agent(batch_size=4)
        buffer = ReplayBuffer(10)
        for _ in range(4):
            buffer.remember(Transition(np.array([1.0, 0.0]), 0, 1.0, np.array([1.0, 0.0]), True))
        row_before = agent.primary.layers[-1].W[1].copy()
        agent.train_step(buffer, 0.1, rng)
        np.testing.assert_array_equal(agent.primary.layers[-1].W[1], row_before)

    def test_converges_on_two_state_mdp(self, rng):
        # action s is correct in state s: pays 1 and moves to the other state; else pays 0 and stays
        gamma = 0.9

        def transition(s, a):
            return (1.0, 1 - s) if a == s else (0.0, s)

        oracle = np.zeros((2, 2))
        for _ in range(2000):
            oracle = np.array([[transition(s, a)[0] + gamma * oracle[transition(s, a)[1]].max()
                                for a in range(2)] for s in range(2)])

        states = np.eye(2)
        agent = _linear_agent(batch_size=64, gamma=gamma)
        buffer = ReplayBuffer(1000)
        for _ in range(16):
            for s in range(2):
                for a in range(2):
                    reward, nxt = transition(s, a)
                    buffer.remember(Transition(states[s], a, reward, states[nxt], False))

        for _ in range(5000):
            agent.train_step(buffer, 0.5, rng)
        np.testing.assert_allclose(agent.q_values(states), oracle, atol=1e-2)

    def test_numeric_failure_carries_diagnostics(self, rng):
        agent = _linear_agent(batch_size=2)
        buffer = ReplayBuffer(10)
        buffer.remember(Transition(np.zeros(2), 0, np.inf, np.zeros(2), True))
        buffer.remember(Transition(np.zeros(2), 1, np.inf, np.zeros(2), True))
        with pytest.raises(NumericError) as exc:
            agent.train_step(buffer, 0.1, rng)
        assert exc.value.diagnostics["update"] == 0
        assert exc.value.diagnostics["lr"] == 0.1


class TestActing:
    def test_greedy(self):
        agent = _linear_agent(n_actions=3)
        _set_bias(agent.primary, [0.1, 0.9, 0.3])
        assert agent.act(np.zeros(2), 1.0, np.random.default_rng(0), greedy=True) == 1

    def test_low_temperature_is_nearly_greedy(self, rng):
        agent = _linear_agent(n_actions=3)
        _set_bias(agent.primary, [0.1, 0.9, 0.3])
        picks = [agent.act(np.zeros(2), 0.01, rng) for _ in range(200)]
        assert picks.count(1) == 200

    def test_sampling_follows_softmax(self, rng):
        agent = _linear_agent(n_actions=2)
        _set_bias(agent.primary, [0.0, np.log(3.0)])
        picks = np.array([agent.act(np.zeros(2), 1.0, rng) for _ in range(4000)])
        assert abs(picks.mean() - 0.75) < 0.03


class TestReplayBuffer:
    def test_fifo_eviction(self):
        buffer = ReplayBuffer(1000)
        for i in range(1005):
            buffer.remember(Transition(np.zeros(1), 0, float(i), np.zeros(1), False))
        assert len(buffer) == 1000
        assert next(iter(buffer)).reward == 5.0

    def test_sample_without_replacement(self, rng):
        buffer = _filled_buffer(10)
        batch = buffer.sample(10, rng)
        assert sorted(t.reward for t in batch) == sorted(t.reward for t in buffer)
        with pytest.raises(ConfigurationError):
            buffer.sample(11, rng)

    def test_save_load(self, tmp_path):
        buffer = _filled_buffer(12)
        buffer.save(tmp_path / "buffer.npz")
        loaded = ReplayBuffer.load(tmp_path / "buffer.npz")
        assert loaded.capacity == 1000 and len(loaded) == 12
        for a, b in zip(buffer, loaded):
            np.testing.assert_array_equal(a.state, b.state)
            assert (a.action, a.reward, a.done) == (b.action, b.reward, b.done)

    def test_rejects_zero_capacity(self):
        with pytest.raises(ConfigurationError):
            ReplayBuffer(0)


class TestSchedules:
    def test_greed_endpoints(self):
        schedule = GreedSchedule(1.0, 0.2, 4000, 4000)
        assert schedule.value(0) == 1.0
        assert schedule.value(3999) == 1.0
        assert schedule.value(6000) == pytest.approx(0.6)
        assert schedule.value(8000) == pytest.approx(0.2)
        assert schedule.value(12000) == pytest.approx(0.2)

    def test_greed_is_monotone(self):
        schedule = GreedSchedule(1.0, 0.2, 10, 30)
        values = [schedule.value(t) for t in range(60)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_greed_must_stay_positive(self):
        with pytest.raises(ConfigurationError):
            GreedSchedule(1.0, 0.0)

    def test_learning_rate(self):
        schedule = LearningRateSchedule(0.001, 0.00001, 100)
        assert schedule.value(0) == pytest.approx(0.001)
        assert schedule.value(50) == pytest.approx(0.000505)
        assert schedule.value(500) == pytest.approx(0.00001)


class TestCheckpoint:
    def test_save_load_round_trip(self, tmp_path, rng):
        agent = DDQNAgent(27, 2, AgentConfig(), rng)
        buffer = _filled_buffer(80, state_dim=27, n_actions=2)
        for _ in range(3):
            agent.train_step(buffer, 0.01, rng)
        agent.save(tmp_path / "agent.ckpt", interactions=np.int64(42))

        loaded = DDQNAgent.load(tmp_path / "agent.ckpt")
        states = buffer.states()[:10]
        np.testing.assert_array_equal(loaded.q_values(states), agent.q_values(states))
        np.testing.assert_array_equal(loaded.q_values(states, loaded.target), loaded.q_values(states))
        assert loaded.update_counter == 3
        assert loaded.meta["interactions"] == 42
        assert loaded.config.hidden_units == (24, 12)

    def test_missing_sidecar(self, tmp_path):
        with pytest.raises(OSError):
            DDQNAgent.load(tmp_path / "missing.ckpt")
