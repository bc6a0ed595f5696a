"""Phase-transition strategies: what an agent keeps when the generation rate changes."""
from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional, Tuple
import logging

from app.core.errors import MissingCheckpointError
from app.core.rng import stream
from app.schemas.experiment import AgentParams, TransferMode
from app.services.agent import Checkpoint, DdqlAgent, ReplayBuffer
from app.services.nn import AdamState

logger = logging.getLogger(__name__)


class TransferSignature(NamedTuple):
    weights: bool
    buffer: bool
    optimizer: bool
    train_enabled: bool


MODE_SIGNATURES: Dict[TransferMode, TransferSignature] = {
    TransferMode.SCRATCH: TransferSignature(weights=False, buffer=False, optimizer=False, train_enabled=True),
    TransferMode.FIRST_ONLY: TransferSignature(weights=True, buffer=False, optimizer=False, train_enabled=False),
    TransferMode.BUFFER_ONLY: TransferSignature(weights=False, buffer=True, optimizer=False, train_enabled=True),
    TransferMode.WEIGHTS_ONLY: TransferSignature(weights=True, buffer=False, optimizer=False, train_enabled=True),
    TransferMode.FULL: TransferSignature(weights=True, buffer=True, optimizer=True, train_enabled=True),
}


@dataclass(frozen=True)
class AgentShape:
    state_dim: int
    n_actions: int
    params: AgentParams


def fresh_agent(shape: AgentShape, seed: int, phase_index: int) -> DdqlAgent:
    """Agent with weights, exploration and replay streams keyed by (seed, phase)."""
    return DdqlAgent.create(
        shape.state_dim,
        shape.n_actions,
        shape.params,
        init_rng=stream(seed, "agent_init", phase_index),
        exploration_rng=stream(seed, "exploration", phase_index),
        replay_rng=stream(seed, "replay", phase_index),
    )


def resumes_epsilon(mode: TransferMode, params: AgentParams, phase_index: int) -> bool:
    """Weights and full transfers continue at the final epsilon when configured to."""
    return (
        phase_index > 0
        and params.epsilon_resume_on_transfer
        and mode in (TransferMode.WEIGHTS_ONLY, TransferMode.FULL)
    )


def carries_history(mode: TransferMode, phase_index: int) -> bool:
    """The decision history d follows the weights: modes that restart the networks restart d."""
    return phase_index == 0 or MODE_SIGNATURES[mode].weights


def initialize_phase_agent(
    mode: TransferMode,
    prev: Optional[Checkpoint],
    shape: AgentShape,
    seed: int,
    phase_index: int
) -> Tuple[DdqlAgent, bool]:
    """
    Build the agent for a phase from the previous phase's checkpoint.

    Phase 0 always starts from scratch. prev is only read; every array the new
    agent holds is a copy.

    Returns:
        (agent, train_enabled)

    Raises:
        MissingCheckpointError: If a transferring mode has no previous checkpoint
    """
    if phase_index == 0:
        return fresh_agent(shape, seed, 0), True
    if mode == TransferMode.SCRATCH:
        return fresh_agent(shape, seed, phase_index), True
    if prev is None:
        raise MissingCheckpointError(mode.value)

    if mode == TransferMode.FULL:
        agent = DdqlAgent.from_checkpoint(prev)
        logger.info(f"Phase {phase_index + 1}: full transfer ({len(agent.buffer)} buffered transitions)")
        return agent, True

    agent = fresh_agent(shape, seed, phase_index)
    signature = MODE_SIGNATURES[mode]
    if signature.weights:
        agent.q_net = prev.q_net.copy()
        agent.target_net = prev.target_net.copy()
        params = shape.params
        agent.optimizer = AdamState.for_net(
            agent.q_net, params.learning_rate, params.adam_beta1, params.adam_beta2, params.adam_eps
        )
    if signature.buffer:
        agent.buffer = prev.buffer.copy()
    else:
        agent.buffer = ReplayBuffer(shape.params.buffer_capacity, shape.state_dim)

    logger.info(
        f"Phase {phase_index + 1}: {mode.value} transfer "
        f"(weights={signature.weights}, buffer={len(agent.buffer)}, train={signature.train_enabled})"
    )
    return agent, signature.train_enabled
