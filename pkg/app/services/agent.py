"""
Double Deep Q-Learning agent: epsilon-greedy acting, ring replay buffer,
double-network TD targets, periodic target sync and checkpointing.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional
import json
import logging
import zipfile

import numpy as np

from app.core.errors import CheckpointCorruptError, CheckpointVersionError, InvalidParameterError
from app.core.rng import generator_state, restore_generator
from app.schemas.experiment import AgentParams, TargetDirection
from app.services.nn import AdamState, Mlp, adam_step, huber_loss, mse_loss

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1
INFERENCE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Transition:
    """One (s, a, r, s') experience; truncated marks an episode boundary."""
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    truncated: bool = False


class ReplayBuffer:
    """Fixed-capacity ring of transitions; once full each push evicts the oldest."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise InvalidParameterError("buffer_capacity", capacity, "must be >= 1")
        self.capacity = capacity
        self.state_dim = state_dim
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.truncated = np.zeros(capacity, dtype=bool)
        self.insert_count = 0

    def __len__(self) -> int:
        return min(self.insert_count, self.capacity)

    def push(self, transition: Transition) -> None:
        slot = self.insert_count % self.capacity
        self.states[slot] = transition.state
        self.actions[slot] = transition.action
        self.rewards[slot] = transition.reward
        self.next_states[slot] = transition.next_state
        self.truncated[slot] = transition.truncated
        self.insert_count += 1

    def _order(self) -> np.ndarray:
        """Ring slots from oldest to newest."""
        size = len(self)
        if self.insert_count <= self.capacity:
            return np.arange(size)
        start = self.insert_count % self.capacity
        return (np.arange(size) + start) % self.capacity

    def transitions(self) -> List[Transition]:
        return [
            Transition(
                state=self.states[i].copy(),
                action=int(self.actions[i]),
                reward=float(self.rewards[i]),
                next_state=self.next_states[i].copy(),
                truncated=bool(self.truncated[i]),
            )
            for i in self._order()
        ]

    def sample(self, rng: np.random.Generator, batch_size: int) -> Dict[str, np.ndarray]:
        """Uniform batch without intra-batch replacement."""
        if batch_size > len(self):
            raise InvalidParameterError("batch_size", batch_size, f"buffer holds only {len(self)}")
        index = rng.choice(len(self), size=batch_size, replace=False)
        return {
            "states": self.states[index],
            "actions": self.actions[index],
            "rewards": self.rewards[index],
            "next_states": self.next_states[index],
            "truncated": self.truncated[index],
        }

    def copy(self) -> "ReplayBuffer":
        clone = ReplayBuffer(self.capacity, self.state_dim)
        clone.states = self.states.copy()
        clone.actions = self.actions.copy()
        clone.rewards = self.rewards.copy()
        clone.next_states = self.next_states.copy()
        clone.truncated = self.truncated.copy()
        clone.insert_count = self.insert_count
        return clone

    def to_arrays(self) -> Dict[str, np.ndarray]:
        size = len(self)
        return {
            "buffer_states": self.states[:size],
            "buffer_actions": self.actions[:size],
            "buffer_rewards": self.rewards[:size],
            "buffer_next_states": self.next_states[:size],
            "buffer_truncated": self.truncated[:size],
        }

    @classmethod
    def from_arrays(cls, arrays, capacity: int, state_dim: int, insert_count: int) -> "ReplayBuffer":
        buffer = cls(capacity, state_dim)
        size = min(insert_count, capacity)
        buffer.states[:size] = arrays["buffer_states"]
        buffer.actions[:size] = arrays["buffer_actions"]
        buffer.rewards[:size] = arrays["buffer_rewards"]
        buffer.next_states[:size] = arrays["buffer_next_states"]
        buffer.truncated[:size] = arrays["buffer_truncated"]
        buffer.insert_count = insert_count
        return buffer


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear decay from start to end over decay_steps training steps, then constant."""
    start: float = 1.0
    end: float = 0.05
    decay_steps: int = 0

    def value(self, step: int) -> float:
        if self.decay_steps <= 0 or step >= self.decay_steps:
            return self.end
        return self.start + (self.end - self.start) * step / self.decay_steps


def td_targets(
    rewards: np.ndarray,
    next_states: np.ndarray,
    q_net: Mlp,
    target_net: Mlp,
    gamma: float,
    direction: TargetDirection = TargetDirection.ONLINE_SELECTS
) -> np.ndarray:
    """
    Double-Q bootstrap targets y = r + gamma * Q_eval(s', argmax_a Q_select(s', a)).

    With ONLINE_SELECTS the online net picks the action and the target net
    evaluates it; TARGET_SELECTS swaps the roles.
    """
    if len(rewards) == 0:
        raise InvalidParameterError("batch", 0, "must be non-empty")
    online = q_net.forward(next_states)
    target = target_net.forward(next_states)
    if direction == TargetDirection.ONLINE_SELECTS:
        selector, evaluator = online, target
    else:
        selector, evaluator = target, online
    chosen = np.argmax(selector, axis=1)
    bootstrap = evaluator[np.arange(len(chosen)), chosen]
    return np.asarray(rewards, dtype=np.float64) + gamma * bootstrap


class InferencePolicy:
    """Immutable greedy copy of the online network; carries no buffer or optimizer."""

    def __init__(self, net: Mlp):
        self._net = net.copy()
        for p in self._net.parameters():
            p.setflags(write=False)

    @property
    def n_actions(self) -> int:
        return self._net.output_dim

    def q_values(self, state: np.ndarray) -> np.ndarray:
        return self._net.forward(state)

    def act(self, state: np.ndarray) -> int:
        return int(np.argmax(self._net.forward(state)))

    def param_hash(self) -> str:
        return self._net.param_hash()

    def save(self, path: str) -> None:
        metadata = {"format_version": INFERENCE_FORMAT_VERSION, "kind": "inference"}
        _write_npz(path, metadata, self._net.to_arrays("q"))

    @classmethod
    def load(cls, path: str) -> "InferencePolicy":
        metadata, arrays = _read_npz(path)
        _check_version(path, metadata, INFERENCE_FORMAT_VERSION)
        try:
            return cls(Mlp.from_arrays(arrays, "q"))
        except (KeyError, ValueError, InvalidParameterError) as e:
            raise CheckpointCorruptError(path, f"bad network arrays ({e})")


@dataclass(frozen=True)
class Checkpoint:
    """Full-fidelity immutable snapshot of a DdqlAgent."""
    params: AgentParams
    q_net: Mlp
    target_net: Mlp
    optimizer: AdamState
    buffer: ReplayBuffer
    schedule: EpsilonSchedule
    counters: Dict[str, int]
    rng_states: Dict[str, dict]
    format_version: int = CHECKPOINT_FORMAT_VERSION


class DdqlAgent:
    """
    Online and target Q-networks with replay. Single-owner during training.
    """

    def __init__(
        self,
        q_net: Mlp,
        target_net: Mlp,
        optimizer: AdamState,
        buffer: ReplayBuffer,
        params: AgentParams,
        exploration_rng: np.random.Generator,
        replay_rng: np.random.Generator,
        schedule: Optional[EpsilonSchedule] = None
    ):
        if q_net.layer_dims != target_net.layer_dims:
            raise InvalidParameterError("target_net", target_net.layer_dims, "must match q_net dims")
        self.q_net = q_net
        self.target_net = target_net
        self.optimizer = optimizer
        self.buffer = buffer
        self.params = params
        self.exploration_rng = exploration_rng
        self.replay_rng = replay_rng
        self.schedule = schedule or EpsilonSchedule(params.epsilon_start, params.epsilon_end, 0)
        self.decision_steps = 0
        self.train_steps = 0
        self.phase_train_steps = 0

    @classmethod
    def create(
        cls,
        state_dim: int,
        n_actions: int,
        params: AgentParams,
        init_rng: np.random.Generator,
        exploration_rng: np.random.Generator,
        replay_rng: np.random.Generator
    ) -> "DdqlAgent":
        """Fresh agent: random weights, empty buffer, zero optimizer moments."""
        dims = [state_dim, *params.hidden_layers, n_actions]
        q_net = Mlp.initialize(dims, init_rng)
        return cls(
            q_net=q_net,
            target_net=q_net.copy(),
            optimizer=AdamState.for_net(
                q_net, params.learning_rate, params.adam_beta1, params.adam_beta2, params.adam_eps
            ),
            buffer=ReplayBuffer(params.buffer_capacity, state_dim),
            params=params,
            exploration_rng=exploration_rng,
            replay_rng=replay_rng,
        )

    @property
    def state_dim(self) -> int:
        return self.q_net.input_dim

    @property
    def n_actions(self) -> int:
        return self.q_net.output_dim

    @property
    def epsilon(self) -> float:
        return self.schedule.value(self.phase_train_steps)

    def begin_phase(self, train_steps: int, resume_epsilon: bool = False) -> None:
        """Reset the per-phase training counter and the exploration schedule."""
        self.phase_train_steps = 0
        if resume_epsilon:
            self.schedule = EpsilonSchedule(self.params.epsilon_end, self.params.epsilon_end, 0)
        else:
            decay = int(round(self.params.epsilon_decay_fraction * train_steps))
            self.schedule = EpsilonSchedule(self.params.epsilon_start, self.params.epsilon_end, decay)

    def select_action(
        self,
        state: np.ndarray,
        rng: Optional[np.random.Generator] = None,
        epsilon: Optional[float] = None
    ) -> int:
        """Epsilon-greedy; greedy ties resolve to the lowest action index."""
        rng = rng if rng is not None else self.exploration_rng
        eps = self.epsilon if epsilon is None else epsilon
        if eps > 0.0 and rng.random() < eps:
            return int(rng.integers(self.n_actions))
        return int(np.argmax(self.q_net.forward(state)))

    def observe(self, transition: Transition) -> None:
        if not 0 <= transition.action < self.n_actions:
            raise InvalidParameterError("action", transition.action, f"must be in [0, {self.n_actions})")
        self.buffer.push(transition)

    def after_decision(self) -> Optional[float]:
        """Count a decision step and train on the configured cadence."""
        self.decision_steps += 1
        if self.decision_steps % self.params.train_every == 0:
            return self.train_step()
        return None

    def train_step(self) -> Optional[float]:
        """
        One replay-batch update. Returns the loss, or None when the buffer
        holds fewer than batch_size transitions.
        """
        if len(self.buffer) < self.params.batch_size:
            logger.debug(f"Skipping training step: buffer {len(self.buffer)} < batch {self.params.batch_size}")
            return None

        batch = self.buffer.sample(self.replay_rng, self.params.batch_size)
        targets = td_targets(
            batch["rewards"], batch["next_states"], self.q_net, self.target_net,
            self.params.gamma, self.params.target_direction,
        )
        q = self.q_net.forward(batch["states"])
        rows = np.arange(len(targets))
        predicted = q[rows, batch["actions"]]
        if self.params.loss == "huber":
            loss, grad_predicted = huber_loss(predicted, targets, self.params.huber_delta)
        else:
            loss, grad_predicted = mse_loss(predicted, targets)
        grad_q = np.zeros_like(q)
        grad_q[rows, batch["actions"]] = grad_predicted
        adam_step(self.optimizer, self.q_net, self.q_net.backward(batch["states"], grad_q))

        self.train_steps += 1
        self.phase_train_steps += 1
        if self.train_steps % self.params.target_sync_period == 0:
            self.sync_target()
        return loss

    def sync_target(self) -> None:
        self.target_net = self.q_net.copy()

    def export_inference(self) -> InferencePolicy:
        return InferencePolicy(self.q_net)

    def snapshot(self) -> Checkpoint:
        return Checkpoint(
            params=self.params,
            q_net=self.q_net.copy(),
            target_net=self.target_net.copy(),
            optimizer=self.optimizer.copy(),
            buffer=self.buffer.copy(),
            schedule=self.schedule,
            counters={
                "decision_steps": self.decision_steps,
                "train_steps": self.train_steps,
                "phase_train_steps": self.phase_train_steps,
            },
            rng_states={
                "exploration": generator_state(self.exploration_rng),
                "replay": generator_state(self.replay_rng),
            },
        )

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> "DdqlAgent":
        """Rebuild an agent; the checkpoint itself is left untouched."""
        agent = cls(
            q_net=checkpoint.q_net.copy(),
            target_net=checkpoint.target_net.copy(),
            optimizer=checkpoint.optimizer.copy(),
            buffer=checkpoint.buffer.copy(),
            params=checkpoint.params,
            exploration_rng=restore_generator(checkpoint.rng_states["exploration"]),
            replay_rng=restore_generator(checkpoint.rng_states["replay"]),
            schedule=checkpoint.schedule,
        )
        agent.decision_steps = checkpoint.counters["decision_steps"]
        agent.train_steps = checkpoint.counters["train_steps"]
        agent.phase_train_steps = checkpoint.counters["phase_train_steps"]
        return agent


def _write_npz(path: str, metadata: dict, arrays: Dict[str, np.ndarray]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        np.savez(f, metadata=np.array(json.dumps(metadata, sort_keys=True)), **arrays)


def _read_npz(path: str):
    if not Path(path).is_file():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            arrays = {key: data[key] for key in data.files}
        metadata = json.loads(arrays.pop("metadata").item())
    except (zipfile.BadZipFile, EOFError, OSError, ValueError, KeyError) as e:
        raise CheckpointCorruptError(path, str(e) or type(e).__name__)
    return metadata, arrays


def _check_version(path: str, metadata: dict, expected: int) -> None:
    found = metadata.get("format_version")
    if found != expected:
        raise CheckpointVersionError(path, found, expected)


def write_checkpoint(checkpoint: Checkpoint, path: str) -> None:
    """
    Write a checkpoint as an .npz archive: network, optimizer and buffer arrays
    plus a JSON metadata record with counters, hyperparameters, schedule and
    RNG states.
    """
    metadata = {
        "format_version": checkpoint.format_version,
        "kind": "checkpoint",
        "params": checkpoint.params.model_dump(mode="json"),
        "counters": checkpoint.counters,
        "schedule": {
            "start": checkpoint.schedule.start,
            "end": checkpoint.schedule.end,
            "decay_steps": checkpoint.schedule.decay_steps,
        },
        "optimizer": checkpoint.optimizer.hyper(),
        "buffer": {
            "capacity": checkpoint.buffer.capacity,
            "state_dim": checkpoint.buffer.state_dim,
            "insert_count": checkpoint.buffer.insert_count,
        },
        "rng_states": checkpoint.rng_states,
    }
    arrays: Dict[str, np.ndarray] = {}
    arrays.update(checkpoint.q_net.to_arrays("q"))
    arrays.update(checkpoint.target_net.to_arrays("target"))
    arrays.update(checkpoint.optimizer.to_arrays())
    arrays.update(checkpoint.buffer.to_arrays())
    _write_npz(path, metadata, arrays)


def read_checkpoint(path: str) -> Checkpoint:
    """
    Raises:
        FileNotFoundError: If path does not exist
        CheckpointCorruptError: If the archive is truncated or incomplete
        CheckpointVersionError: If format_version differs from this build's
    """
    metadata, arrays = _read_npz(path)
    _check_version(path, metadata, CHECKPOINT_FORMAT_VERSION)
    try:
        q_net = Mlp.from_arrays(arrays, "q")
        buffer_meta = metadata["buffer"]
        schedule = metadata["schedule"]
        return Checkpoint(
            params=AgentParams.model_validate(metadata["params"]),
            q_net=q_net,
            target_net=Mlp.from_arrays(arrays, "target"),
            optimizer=AdamState.from_arrays(arrays, len(q_net.parameters()), metadata["optimizer"]),
            buffer=ReplayBuffer.from_arrays(
                arrays, buffer_meta["capacity"], buffer_meta["state_dim"], buffer_meta["insert_count"]
            ),
            schedule=EpsilonSchedule(schedule["start"], schedule["end"], schedule["decay_steps"]),
            counters=dict(metadata["counters"]),
            rng_states=metadata["rng_states"],
            format_version=metadata["format_version"],
        )
    except (KeyError, ValueError, InvalidParameterError) as e:
        raise CheckpointCorruptError(path, f"incomplete checkpoint ({e})")


def save_checkpoint(agent: DdqlAgent, path: str) -> None:
    write_checkpoint(agent.snapshot(), path)


def load_checkpoint(path: str) -> DdqlAgent:
    return DdqlAgent.from_checkpoint(read_checkpoint(path))
