"""Pytest configuration and fixtures."""
import os

# Set test environment variables BEFORE importing app modules
# This keeps pydantic-settings from reading a developer's .env file
os.environ["FOGFORGE_LOG"] = "warn"
os.environ["FOGFORGE_JOBS"] = "1"

import numpy as np
import pytest

from app.schemas.experiment import (
    AgentParams,
    ExperimentConfig,
    PhaseSchedule,
    PhaseSpec,
    TopologyParams,
)
from app.schemas.topology import FogTopology
from app.schemas.workload import WorkloadCategory, default_categories
from app.services.harness import TrialEnvironment
from app.services.topology import build_topology
from tests.utils import make_line_topology


@pytest.fixture
def categories() -> list[WorkloadCategory]:
    """Default light/moderate/heavy table."""
    return default_categories()


@pytest.fixture
def desk_topology() -> FogTopology:
    """Desk profile built from seed 7."""
    return build_topology(TopologyParams(), seed=7)


@pytest.fixture
def line_topology() -> FogTopology:
    """Cloud 0, Fog 1 and 2, cluster 3 behind Fog 1; fixed resources."""
    return make_line_topology()


@pytest.fixture
def rng() -> np.random.Generator:
    """Plain seeded generator for tests that need ad-hoc randomness."""
    return np.random.default_rng(12345)


@pytest.fixture
def small_agent_params() -> AgentParams:
    """Small network and buffer so agent tests run in milliseconds."""
    return AgentParams(
        hidden_layers=[16],
        batch_size=8,
        buffer_capacity=64,
        target_sync_period=5,
        learning_rate=1e-3,
    )


@pytest.fixture
def tiny_config() -> ExperimentConfig:
    """Two short phases on the desk topology; a whole trial takes about a second."""
    return ExperimentConfig(
        agent=AgentParams(hidden_layers=[16], batch_size=16, buffer_capacity=500, target_sync_period=20),
        schedule=PhaseSchedule(phases=[
            PhaseSpec(beta=200.0, train_steps=60, train_episode_len=5_000, inference_len=5_000),
            PhaseSpec(beta=100.0, train_steps=60, train_episode_len=5_000, inference_len=5_000),
        ]),
        trials=2,
        seed=3,
    )


@pytest.fixture
def desk_env(desk_topology: FogTopology, categories: list[WorkloadCategory]) -> TrialEnvironment:
    """Trial environment on the desk topology with a uniform mix."""
    return TrialEnvironment(
        topology=desk_topology,
        categories=categories,
        mix=[1 / 3, 1 / 3, 1 / 3],
        seed=7,
    )
