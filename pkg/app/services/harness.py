"""
Lifelong-learning protocol: train, infer, raise the generation rate, transfer,
fine-tune. Also runs baseline policies through the same inference episodes.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, TextIO
import logging
import time

import numpy as np

from app.core.errors import InvalidParameterError
from app.core.logging_config import trial_logger
from app.core.rng import stream
from app.schemas.experiment import ExperimentConfig, PhaseSpec, Representation, TransferMode
from app.schemas.results import ExperimentResult, PhaseMetrics, PhaseRecord
from app.schemas.topology import FogTopology
from app.schemas.workload import WorkloadCategory
from app.services.agent import DdqlAgent, InferencePolicy, Transition, write_checkpoint
from app.services.baselines import BaselineKind, baseline_policy
from app.services.representation import Observer, ParlObserver, make_observer, observe, parl_reward
from app.services.sim import DecisionCallback, FogSimulator, SimView
from app.services.topology import build_topology
from app.services.transfer import AgentShape, carries_history, initialize_phase_agent, resumes_epsilon
from app.services.workload import Job, JobGenerator

logger = logging.getLogger(__name__)

TRAINING_EPISODES = 0
INFERENCE_EPISODES = 1
MAX_IDLE_EPISODES = 100


@dataclass
class TrialEnvironment:
    """Topology and workload shared by every episode of one trial."""
    topology: FogTopology
    categories: List[WorkloadCategory]
    mix: List[float]
    seed: int

    @property
    def fog_ids(self) -> List[int]:
        return self.topology.fog_ids

    @property
    def cluster_ids(self) -> List[int]:
        return self.topology.cluster_ids

    @property
    def cluster_index(self) -> Dict[int, int]:
        return {cluster: k for k, cluster in enumerate(self.cluster_ids)}

    def make_simulator(self, beta: float, phase_index: int, kind: int, episode: int,
                       trace: Optional[TextIO] = None) -> FogSimulator:
        """Fresh queues with one generator per cluster on its own workload stream."""
        sim = FogSimulator(self.topology, self.categories, trace=trace)
        for k, cluster in enumerate(self.cluster_ids):
            rng = stream(self.seed, "workload", phase_index, kind, episode, k)
            sim.attach_generator(JobGenerator(cluster, beta, self.categories, self.mix, rng))
        return sim


def build_environment(config: ExperimentConfig, seed: int) -> TrialEnvironment:
    return TrialEnvironment(
        topology=build_topology(config.topology, seed),
        categories=list(config.workload.categories),
        mix=config.workload.effective_mix(),
        seed=seed,
    )


class AgentController:
    """
    Decision callback that turns each job into a state, picks a Fog node and,
    when training, stores transitions and drives the training cadence.

    The reward for a decision is measured at the next decision, from the
    total queued count read before that job is assigned.
    """

    def __init__(
        self,
        env: TrialEnvironment,
        observer: Observer,
        agent: Optional[DdqlAgent] = None,
        policy: Optional[InferencePolicy] = None,
        train_budget: int = 0
    ):
        if (agent is None) == (policy is None):
            raise ValueError("AgentController needs exactly one of agent or policy")
        self.env = env
        self.observer = observer
        self.agent = agent
        self.policy = policy
        self.train_budget = train_budget
        self.cluster_index = env.cluster_index
        self.losses: List[float] = []
        self.episode_return = 0.0
        self.decisions = 0
        self.q_first: Optional[int] = None
        self.q_last: Optional[int] = None
        self._prev_state: Optional[np.ndarray] = None
        self._prev_action: Optional[int] = None
        self._prev_job: Optional[Job] = None

    @property
    def training(self) -> bool:
        return self.agent is not None

    def _state(self, job: Job, view: SimView) -> np.ndarray:
        c = self.cluster_index[job.source_cluster]
        if isinstance(self.observer, ParlObserver):
            return observe(self.observer, c, job.category)
        return observe(self.observer, c, job.category, view.queue_lengths())

    def __call__(self, job: Job, view: SimView) -> int:
        q_now = view.total_queued()
        state = self._state(job, view)

        if self._prev_state is None:
            self.q_first = q_now
        else:
            reward = self.observer.reward(self.q_last, q_now)
            self.episode_return += reward
            if self.training:
                self.agent.observe(Transition(self._prev_state, self._prev_action, reward, state))

        if self.training:
            action = self.agent.select_action(state)
        else:
            action = self.policy.act(state)
        self.observer.record(self.cluster_index[job.source_cluster], job.category, action)

        if self.training:
            loss = self.agent.after_decision()
            if loss is not None:
                self.losses.append(loss)
            if self.agent.phase_train_steps >= self.train_budget and hasattr(view, "request_stop"):
                view.request_stop()

        self._prev_state, self._prev_action, self._prev_job = state, action, job
        self.q_last = q_now
        self.decisions += 1
        return self.env.fog_ids[action]

    def close_episode(self, view: SimView) -> None:
        """
        Store the pending transition at an episode boundary as truncated,
        bootstrapping from the state of the last job under the current view.
        """
        if not self.training or self._prev_state is None:
            return
        q_now = view.total_queued()
        next_state = self._state(self._prev_job, view)
        reward = self.observer.reward(self.q_last, q_now)
        self.agent.observe(
            Transition(self._prev_state, self._prev_action, reward, next_state, truncated=True)
        )
        self._prev_state = None


def run_training_phase(
    env: TrialEnvironment,
    agent: DdqlAgent,
    observer: Observer,
    phase: PhaseSpec,
    phase_index: int
) -> List[float]:
    """
    Train on one simulator for the whole phase, one train_episode_len window
    per episode, until the training-step budget is spent. Queued and in-flight
    jobs carry across episode boundaries; the pending decision at a boundary is
    stored as truncated. The observer's decision history carries across episodes.

    Returns:
        Loss per training step
    """
    sim = env.make_simulator(phase.beta, phase_index, TRAINING_EPISODES, 0)
    losses: List[float] = []
    episode = 0
    idle_episodes = 0
    while agent.phase_train_steps < phase.train_steps:
        controller = AgentController(env, observer, agent=agent, train_budget=phase.train_steps)
        sim.run_until((episode + 1) * phase.train_episode_len, controller)
        controller.close_episode(sim)
        losses.extend(controller.losses)
        episode += 1
        idle_episodes = idle_episodes + 1 if controller.decisions == 0 else 0
        if idle_episodes >= MAX_IDLE_EPISODES:
            raise InvalidParameterError(
                "train_episode_len", phase.train_episode_len,
                f"{MAX_IDLE_EPISODES} consecutive training episodes produced no jobs"
            )
        if episode % 50 == 0:
            logger.debug(
                f"Phase {phase_index + 1}: episode {episode}, "
                f"{agent.phase_train_steps}/{phase.train_steps} training steps"
            )
    return losses


def _run_episode(env: TrialEnvironment, decide: DecisionCallback, phase: PhaseSpec,
                 phase_index: int, trace: Optional[TextIO] = None):
    sim = env.make_simulator(phase.beta, phase_index, INFERENCE_EPISODES, 0, trace=trace)
    metrics = sim.run_until(phase.inference_len, decide)
    return sim, metrics


def run_inference(
    env: TrialEnvironment,
    policy: InferencePolicy,
    observer: Observer,
    phase: PhaseSpec,
    phase_index: int,
    trace: Optional[TextIO] = None
) -> PhaseMetrics:
    """One greedy episode of inference_len time units from empty queues."""
    controller = AgentController(env, observer, policy=policy)
    _, metrics = _run_episode(env, controller, phase, phase_index, trace)
    return PhaseMetrics(
        episode_return=controller.episode_return,
        mean_exec_delay=metrics.mean_execution_delay,
        mean_wait_delay=metrics.mean_waiting_delay,
        jobs_completed=metrics.jobs_completed,
        jobs_created=metrics.jobs_created,
        jobs_dropped=metrics.jobs_dropped,
        q_first=controller.q_first or 0,
        q_last=controller.q_last or 0,
        decisions=controller.decisions,
    )


class ReturnRecorder:
    """Wraps a non-learning policy and accumulates the queued-change return."""

    def __init__(self, policy: Callable[[Job, SimView], int]):
        self.policy = policy
        self.episode_return = 0.0
        self.q_first: Optional[int] = None
        self.q_last: Optional[int] = None
        self.decisions = 0

    def __call__(self, job: Job, view: SimView) -> int:
        q_now = view.total_queued()
        if self.q_last is None:
            self.q_first = q_now
        else:
            self.episode_return += parl_reward(self.q_last, q_now)
        self.q_last = q_now
        self.decisions += 1
        return self.policy(job, view)


def _record(mode: str, index: int, phase: PhaseSpec, seed: int, metrics: PhaseMetrics,
            train_seconds: float = 0.0, param_hash: str = "",
            losses: Optional[List[float]] = None) -> PhaseRecord:
    return PhaseRecord(
        mode=mode,
        phase=index + 1,
        beta=phase.beta,
        seed=seed,
        episode_return=metrics.episode_return,
        mean_exec_delay=metrics.mean_exec_delay,
        jobs_completed=metrics.jobs_completed,
        mean_wait_delay=metrics.mean_wait_delay,
        train_seconds=train_seconds,
        param_hash=param_hash,
        q_first=metrics.q_first,
        q_last=metrics.q_last,
        loss_curve=losses or [],
    )


def run_lifelong(
    config: ExperimentConfig,
    mode: TransferMode,
    seed: int,
    checkpoint_dir: Optional[str] = None
) -> ExperimentResult:
    """
    Phase 1 trains from scratch; each later phase raises the generation rate and
    builds its agent with initialize_phase_agent(mode, ...). FirstOnly never
    trains after phase 1.
    """
    log = trial_logger(__name__, mode.value, seed)
    env = build_environment(config, seed)
    params = config.agent
    dims = (len(env.cluster_ids), len(env.categories), len(env.fog_ids))
    observer = make_observer(params.representation, *dims)
    shape = AgentShape(state_dim=observer.state_dim, n_actions=len(env.fog_ids), params=params)

    result = ExperimentResult(mode=mode.value, seed=seed)
    prev = None
    for index, phase in enumerate(config.schedule.phases):
        agent, train_enabled = initialize_phase_agent(mode, prev, shape, seed, index)
        if not carries_history(mode, index):
            observer = make_observer(params.representation, *dims)

        started = time.perf_counter()
        losses: List[float] = []
        if train_enabled and phase.train_steps > 0:
            agent.begin_phase(phase.train_steps, resumes_epsilon(mode, params, index))
            losses = run_training_phase(env, agent, observer, phase, index)
        train_seconds = time.perf_counter() - started

        policy = agent.export_inference()
        metrics = run_inference(env, policy, observer, phase, index)
        prev = agent.snapshot()

        record = _record(mode.value, index, phase, seed, metrics, train_seconds,
                         policy.param_hash(), losses)
        result.records.append(record)
        log.info(
            f"Phase {index + 1} (beta={phase.beta:g}): return={metrics.episode_return:g} "
            f"exec_delay={metrics.mean_exec_delay:.2f} jobs={metrics.jobs_completed} "
            f"train={train_seconds:.1f}s"
        )
        if params.representation == Representation.PARL and \
                metrics.episode_return != metrics.q_first - metrics.q_last:
            log.warning(
                f"Phase {index + 1}: return {metrics.episode_return} != "
                f"Q_first - Q_last ({metrics.q_first} - {metrics.q_last})"
            )

        if checkpoint_dir:
            base = Path(checkpoint_dir) / f"{mode.value}-seed{seed}-phase{index + 1}"
            write_checkpoint(prev, f"{base}.ckpt.npz")
            policy.save(f"{base}.policy.npz")
    return result


def run_baseline(config: ExperimentConfig, kind: BaselineKind, seed: int) -> ExperimentResult:
    """Inference episodes of every phase under a non-learning policy."""
    log = trial_logger(__name__, kind.value, seed)
    env = build_environment(config, seed)
    result = ExperimentResult(mode=kind.value, seed=seed)
    for index, phase in enumerate(config.schedule.phases):
        policy = baseline_policy(kind, env.fog_ids, stream(seed, "baseline", index))
        recorder = ReturnRecorder(policy)
        _, sim_metrics = _run_episode(env, recorder, phase, index)
        metrics = PhaseMetrics(
            episode_return=recorder.episode_return,
            mean_exec_delay=sim_metrics.mean_execution_delay,
            mean_wait_delay=sim_metrics.mean_waiting_delay,
            jobs_completed=sim_metrics.jobs_completed,
            jobs_created=sim_metrics.jobs_created,
            jobs_dropped=sim_metrics.jobs_dropped,
            q_first=recorder.q_first or 0,
            q_last=recorder.q_last or 0,
            decisions=recorder.decisions,
        )
        result.records.append(_record(kind.value, index, phase, seed, metrics))
        log.info(f"Phase {index + 1} (beta={phase.beta:g}): exec_delay={metrics.mean_exec_delay:.2f}")
    return result

