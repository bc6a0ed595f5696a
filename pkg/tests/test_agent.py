"""Tests for the DDQL agent, replay buffer and checkpoints."""
import copy
import dataclasses

import numpy as np
import pytest

from app.core.errors import CheckpointCorruptError, CheckpointVersionError, InvalidParameterError
from app.schemas.experiment import TargetDirection
from app.services.agent import (
    DdqlAgent,
    EpsilonSchedule,
    InferencePolicy,
    ReplayBuffer,
    Transition,
    load_checkpoint,
    read_checkpoint,
    save_checkpoint,
    td_targets,
    write_checkpoint,
)
from app.services.nn import Mlp
from tests.utils import random_transitions

STATE_DIM = 6
N_ACTIONS = 3


def make_agent(params, seed: int = 0) -> DdqlAgent:
    return DdqlAgent.create(
        STATE_DIM, N_ACTIONS, params,
        init_rng=np.random.default_rng(seed),
        exploration_rng=np.random.default_rng(seed + 1),
        replay_rng=np.random.default_rng(seed + 2),
    )


def trained_agent(params, rng, steps: int = 10) -> DdqlAgent:
    agent = make_agent(params)
    for transition in random_transitions(rng, params.batch_size * 2, STATE_DIM, N_ACTIONS):
        agent.observe(transition)
    for _ in range(steps):
        agent.train_step()
    return agent


def linear_net(weights) -> Mlp:
    w = np.asarray(weights, dtype=float)
    return Mlp([w.shape[0], w.shape[1]], [w], [np.zeros(w.shape[1])])


def run_decisions(agent, env_rng, steps: int):
    """Epsilon-greedy decisions on a synthetic task; returns (action, loss) per step."""
    trajectory = []
    state = env_rng.random(STATE_DIM)
    for _ in range(steps):
        action = agent.select_action(state)
        next_state = env_rng.random(STATE_DIM)
        agent.observe(Transition(state, action, float(state[action]) - 0.5, next_state))
        trajectory.append((action, agent.after_decision()))
        state = next_state
    return trajectory


class TestReplayBuffer:
    """Test the fixed-capacity ring buffer."""

    def test_evicts_oldest(self, rng):
        """Test pushes beyond capacity evict the oldest transitions."""
        buffer = ReplayBuffer(3, STATE_DIM)
        for transition in [Transition(np.zeros(STATE_DIM), a, 0.0, np.zeros(STATE_DIM)) for a in range(5)]:
            buffer.push(transition)
        assert len(buffer) == 3
        assert buffer.insert_count == 5
        assert [t.action for t in buffer.transitions()] == [2, 3, 4]

    def test_sample_without_replacement(self, rng):
        """Test a full-size batch contains every stored transition once."""
        buffer = ReplayBuffer(8, STATE_DIM)
        for a in range(8):
            buffer.push(Transition(np.full(STATE_DIM, a), a % N_ACTIONS, float(a), np.zeros(STATE_DIM)))
        batch = buffer.sample(rng, 8)
        assert sorted(batch["rewards"]) == [float(a) for a in range(8)]

    def test_sample_too_large(self, rng):
        """Test sampling more than the stored count is rejected."""
        buffer = ReplayBuffer(4, STATE_DIM)
        with pytest.raises(InvalidParameterError):
            buffer.sample(rng, 1)

    def test_zero_capacity(self):
        """Test capacity must be positive."""
        with pytest.raises(InvalidParameterError):
            ReplayBuffer(0, STATE_DIM)

    def test_copy_is_independent(self, rng):
        """Test copies do not share storage."""
        buffer = ReplayBuffer(4, STATE_DIM)
        for transition in random_transitions(rng, 2, STATE_DIM, N_ACTIONS):
            buffer.push(transition)
        clone = buffer.copy()
        clone.push(random_transitions(rng, 1, STATE_DIM, N_ACTIONS)[0])
        assert len(buffer) == 2 and len(clone) == 3


class TestEpsilonSchedule:
    """Test linear epsilon decay."""

    def test_linear_decay(self):
        """Test start, midpoint and end of the decay."""
        schedule = EpsilonSchedule(1.0, 0.1, 100)
        assert schedule.value(0) == 1.0
        assert schedule.value(50) == pytest.approx(0.55)
        assert schedule.value(100) == 0.1
        assert schedule.value(1_000) == 0.1

    def test_no_decay_is_constant(self):
        """Test a zero-length decay stays at the end value."""
        assert EpsilonSchedule(1.0, 0.05, 0).value(0) == 0.05


class TestTdTargets:
    """Test double-Q bootstrap targets."""

    def test_online_selects_target_evaluates(self):
        """Test the online net picks the action and the target net scores it."""
        online = linear_net(np.eye(2))
        target = linear_net([[0.0, 2.0], [2.0, 0.0]])
        y = td_targets(np.array([1.0]), np.array([[1.0, 3.0]]), online, target, 0.5)
        # online argmax is action 1; target scores it 2 * 1
        assert list(y) == [2.0]

    def test_target_selects_online_evaluates(self):
        """Test the swapped direction."""
        online = linear_net(np.eye(2))
        target = linear_net([[0.0, 2.0], [2.0, 0.0]])
        y = td_targets(np.array([1.0]), np.array([[1.0, 3.0]]), online, target, 0.5,
                       TargetDirection.TARGET_SELECTS)
        assert list(y) == [1.5]

    def test_repeated_targets_reach_tabular_values(self):
        """Test iterating targets on a one-hot two-state chain converges to the value-iteration fixed point."""
        # action 0 stays, action 1 switches state; being in state 1 pays 1
        pairs = [(0, 0), (0, 1), (1, 0), (1, 1)]
        eye = np.eye(2)
        next_states = np.array([eye[s if a == 0 else 1 - s] for s, a in pairs])
        rewards = np.array([float(s == 1) for s, _ in pairs])
        table = np.zeros((2, 2))
        for _ in range(80):
            net = linear_net(table)
            table = td_targets(rewards, next_states, net, net, 0.5).reshape(2, 2)
        assert table == pytest.approx(np.array([[0.5, 1.0], [2.0, 1.5]]))

    def test_empty_batch(self):
        """Test an empty batch is rejected."""
        net = linear_net(np.eye(2))
        with pytest.raises(InvalidParameterError):
            td_targets(np.array([]), np.zeros((0, 2)), net, net, 0.9)


class TestDdqlAgent:
    """Test acting and training."""

    def test_greedy_ties_pick_lowest_action(self, small_agent_params):
        """Test equal Q-values resolve to action 0."""
        agent = make_agent(small_agent_params)
        for p in agent.q_net.parameters():
            p[...] = 0.0
        assert agent.select_action(np.ones(STATE_DIM), epsilon=0.0) == 0

    def test_full_exploration_covers_actions(self, small_agent_params):
        """Test epsilon=1 explores every action."""
        agent = make_agent(small_agent_params)
        actions = {agent.select_action(np.zeros(STATE_DIM), epsilon=1.0) for _ in range(200)}
        assert actions == set(range(N_ACTIONS))

    def test_greedy_invariant_to_output_scaling(self, small_agent_params, rng):
        """Test scaling the output layer by a positive factor keeps every greedy choice."""
        agent = make_agent(small_agent_params)
        states = rng.random((1_000, STATE_DIM))
        before = [agent.select_action(s, epsilon=0.0) for s in states]
        agent.q_net.weights[-1] *= 3.7
        agent.q_net.biases[-1] *= 3.7
        assert [agent.select_action(s, epsilon=0.0) for s in states] == before

    def test_full_exploration_is_uniform(self, small_agent_params):
        """Test epsilon=1 picks every action within 2% of a uniform share over 10^5 draws."""
        agent = make_agent(small_agent_params)
        state = np.zeros(STATE_DIM)
        actions = np.array([agent.select_action(state, epsilon=1.0) for _ in range(100_000)])
        for action in range(N_ACTIONS):
            assert abs(np.mean(actions == action) - 1 / N_ACTIONS) < 0.02

    def test_zero_target_is_a_fixed_point(self, small_agent_params):
        """Test r=0, gamma=0 and Q=0 give zero loss and leave the parameters unchanged."""
        agent = make_agent(small_agent_params.model_copy(update={"gamma": 0.0}))
        for p in agent.q_net.parameters():
            p[...] = 0.0
        agent.sync_target()
        transition = Transition(np.ones(STATE_DIM), 1, 0.0, np.ones(STATE_DIM))
        for _ in range(small_agent_params.batch_size):
            agent.observe(transition)
        before = agent.q_net.copy()
        assert agent.train_step() == 0.0
        assert agent.q_net.same_parameters(before)

    def test_loss_falls_on_a_fixed_batch(self, small_agent_params, rng):
        """Test 100 consecutive updates on one batch each lower the loss."""
        params = small_agent_params.model_copy(update={
            "gamma": 0.0,
            "buffer_capacity": small_agent_params.batch_size,
            "learning_rate": 1e-4,
        })
        agent = make_agent(params)
        for transition in random_transitions(rng, params.batch_size, STATE_DIM, N_ACTIONS):
            agent.observe(transition)
        losses = [agent.train_step() for _ in range(101)]
        assert all(later < earlier for earlier, later in zip(losses, losses[1:]))

    def test_greedy_does_not_consume_randomness(self, small_agent_params):
        """Test epsilon=0 leaves the exploration stream untouched."""
        agent = make_agent(small_agent_params)
        before = agent.exploration_rng.bit_generator.state
        agent.select_action(np.zeros(STATE_DIM), epsilon=0.0)
        assert agent.exploration_rng.bit_generator.state == before

    def test_train_step_waits_for_batch(self, small_agent_params, rng):
        """Test no update happens while the buffer holds fewer than batch_size transitions."""
        agent = make_agent(small_agent_params)
        for transition in random_transitions(rng, small_agent_params.batch_size - 1, STATE_DIM, N_ACTIONS):
            agent.observe(transition)
        before = agent.q_net.param_hash()
        assert agent.train_step() is None
        assert agent.q_net.param_hash() == before
        assert agent.train_steps == 0

    def test_train_step_updates_online_only(self, small_agent_params, rng):
        """Test a training step changes the online net but not the target net."""
        agent = make_agent(small_agent_params)
        for transition in random_transitions(rng, small_agent_params.batch_size, STATE_DIM, N_ACTIONS):
            agent.observe(transition)
        target_before = agent.target_net.param_hash()
        loss = agent.train_step()
        assert isinstance(loss, float)
        assert agent.train_steps == 1
        assert agent.target_net.param_hash() == target_before
        assert not agent.q_net.same_parameters(agent.target_net)

    def test_target_sync_period(self, small_agent_params, rng):
        """Test the target net equals the online net right after a sync step."""
        agent = trained_agent(small_agent_params, rng, steps=small_agent_params.target_sync_period)
        assert agent.target_net.same_parameters(agent.q_net)

    def test_train_every(self, small_agent_params, rng):
        """Test one training step per train_every decisions."""
        agent = make_agent(small_agent_params)
        for transition in random_transitions(rng, small_agent_params.batch_size, STATE_DIM, N_ACTIONS):
            agent.observe(transition)
        for _ in range(small_agent_params.train_every * 3):
            agent.after_decision()
        assert agent.train_steps == 3

    def test_invalid_action_rejected(self, small_agent_params):
        """Test transitions with an out-of-range action are rejected."""
        agent = make_agent(small_agent_params)
        with pytest.raises(InvalidParameterError):
            agent.observe(Transition(np.zeros(STATE_DIM), N_ACTIONS, 0.0, np.zeros(STATE_DIM)))

    def test_begin_phase_schedule(self, small_agent_params):
        """Test the decay spans the configured fraction and resuming holds epsilon at its end value."""
        agent = make_agent(small_agent_params)
        agent.begin_phase(1_000)
        assert agent.epsilon == small_agent_params.epsilon_start
        assert agent.schedule.decay_steps == 600
        agent.begin_phase(1_000, resume_epsilon=True)
        assert agent.epsilon == small_agent_params.epsilon_end


class TestInferencePolicy:
    """Test the exported greedy policy."""

    def test_policy_is_frozen_copy(self, small_agent_params, rng):
        """Test later training does not change an exported policy."""
        agent = trained_agent(small_agent_params, rng, steps=1)
        policy = agent.export_inference()
        exported = policy.param_hash()
        for _ in range(3):
            agent.train_step()
        assert policy.param_hash() == exported
        assert agent.q_net.param_hash() != exported

    def test_policy_acts_greedily(self, small_agent_params, rng):
        """Test the policy picks the argmax of its Q-values."""
        policy = make_agent(small_agent_params).export_inference()
        state = rng.random(STATE_DIM)
        assert policy.act(state) == int(np.argmax(policy.q_values(state)))

    def test_save_and_load(self, small_agent_params, tmp_path):
        """Test a saved policy loads with the same parameters."""
        policy = make_agent(small_agent_params).export_inference()
        path = str(tmp_path / "policy.npz")
        policy.save(path)
        assert InferencePolicy.load(path).param_hash() == policy.param_hash()


class TestCheckpoints:
    """Test snapshots and checkpoint files."""

    def test_snapshot_is_independent(self, small_agent_params, rng):
        """Test training after a snapshot leaves the snapshot unchanged."""
        agent = trained_agent(small_agent_params, rng, steps=1)
        checkpoint = agent.snapshot()
        saved = checkpoint.q_net.param_hash()
        agent.train_step()
        assert checkpoint.q_net.param_hash() == saved

    def test_restored_agent_continues_identically(self, small_agent_params, rng, tmp_path):
        """Test a loaded agent matches the original's weights, buffer, counters and random streams."""
        agent = trained_agent(small_agent_params, rng, steps=4)
        path = str(tmp_path / "agent.ckpt.npz")
        save_checkpoint(agent, path)
        restored = load_checkpoint(path)

        assert restored.q_net.same_parameters(agent.q_net)
        assert restored.target_net.same_parameters(agent.target_net)
        assert restored.train_steps == agent.train_steps
        assert restored.optimizer.step == agent.optimizer.step
        assert [t.action for t in restored.buffer.transitions()] == [t.action for t in agent.buffer.transitions()]

        state = np.ones(STATE_DIM)
        assert [restored.select_action(state, epsilon=0.5) for _ in range(20)] == \
            [agent.select_action(state, epsilon=0.5) for _ in range(20)]
        restored.train_step()
        agent.train_step()
        assert restored.q_net.same_parameters(agent.q_net)

    def test_mid_training_reload_reproduces_trajectory(self, small_agent_params, tmp_path):
        """Test an agent reloaded mid-training follows the original for 10^4 decision steps bit for bit."""
        agent = make_agent(small_agent_params)
        agent.begin_phase(20_000)
        env_rng = np.random.default_rng(21)
        run_decisions(agent, env_rng, 500)

        path = str(tmp_path / "agent.ckpt.npz")
        save_checkpoint(agent, path)
        restored = load_checkpoint(path)
        restored_env_rng = copy.deepcopy(env_rng)

        original = run_decisions(agent, env_rng, 10_000)
        assert run_decisions(restored, restored_env_rng, 10_000) == original
        assert restored.q_net.same_parameters(agent.q_net)
        assert restored.target_net.same_parameters(agent.target_net)
        assert restored.epsilon == agent.epsilon

    def test_exported_policy_matches_greedy_agent(self, small_agent_params, rng):
        """Test the inference policy picks the same action as the epsilon=0 agent on 10^4 states."""
        agent = trained_agent(small_agent_params, rng, steps=20)
        policy = agent.export_inference()
        states = rng.random((10_000, STATE_DIM))
        assert [policy.act(s) for s in states] == [agent.select_action(s, epsilon=0.0) for s in states]

    def test_exported_policy_is_smaller_than_checkpoint(self, small_agent_params, rng, tmp_path):
        """Test the inference file drops the target net, optimizer and buffer."""
        agent = trained_agent(small_agent_params, rng, steps=5)
        policy_path = tmp_path / "agent.policy.npz"
        checkpoint_path = tmp_path / "agent.ckpt.npz"
        agent.export_inference().save(str(policy_path))
        save_checkpoint(agent, str(checkpoint_path))
        assert policy_path.stat().st_size < checkpoint_path.stat().st_size

    def test_missing_file(self, tmp_path):
        """Test a missing checkpoint raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            read_checkpoint(str(tmp_path / "absent.npz"))

    def test_truncated_file(self, small_agent_params, rng, tmp_path):
        """Test a truncated checkpoint raises CheckpointCorruptError."""
        path = tmp_path / "agent.ckpt.npz"
        save_checkpoint(trained_agent(small_agent_params, rng, steps=1), str(path))
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(CheckpointCorruptError):
            read_checkpoint(str(path))

    def test_garbage_file(self, tmp_path):
        """Test a non-archive file raises CheckpointCorruptError."""
        path = tmp_path / "agent.ckpt.npz"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(CheckpointCorruptError):
            read_checkpoint(str(path))

    def test_version_mismatch(self, small_agent_params, rng, tmp_path):
        """Test another format_version raises CheckpointVersionError."""
        checkpoint = dataclasses.replace(trained_agent(small_agent_params, rng, steps=1).snapshot(), format_version=99)
        path = str(tmp_path / "agent.ckpt.npz")
        write_checkpoint(checkpoint, path)
        with pytest.raises(CheckpointVersionError):
            read_checkpoint(path)
