"""Pydantic schemas for the experiment configuration document."""
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import List, Literal, Optional, Tuple
import enum

from app.schemas.workload import (
    WorkloadCategory,
    default_categories,
    validate_category_table,
    validate_mix,
)


class TransferMode(str, enum.Enum):
    """What survives a phase transition."""
    SCRATCH = "scratch"
    FIRST_ONLY = "first"
    BUFFER_ONLY = "buffer"
    WEIGHTS_ONLY = "weights"
    FULL = "full"


class Representation(str, enum.Enum):
    """Observation/reward representation used by the learner."""
    PARL = "parl"
    PLRL = "plrl"


class TargetDirection(str, enum.Enum):
    """Which network picks the bootstrap action in the double-Q target."""
    ONLINE_SELECTS = "online_selects"
    TARGET_SELECTS = "target_selects"


def _check_range(name: str, v: Tuple[float, float]) -> Tuple[float, float]:
    low, high = v
    if low <= 0 or high < low:
        raise ValueError(f"{name} must satisfy 0 < low <= high, got {v}")
    return v


class TopologyParams(BaseModel):
    """How the fog topology is obtained."""
    model_config = ConfigDict(extra="forbid")

    profile: Literal["desk", "generated", "file"] = Field(
        default="desk", description="desk: built-in 1 cloud/3 fog/2 cluster network; "
                                    "generated: preferential attachment; file: load `path`"
    )
    path: Optional[str] = Field(default=None, description="Topology JSON for profile=file")
    n: int = Field(default=20, ge=1, description="Vertex count for profile=generated")
    m: int = Field(default=1, ge=1, description="Attachment degree for profile=generated")
    ipt_range: Tuple[float, float] = Field(default=(10.0, 80.0), description="Uniform IPT range")
    ram_range: Tuple[float, float] = Field(default=(1e9, 8e9), description="Uniform RAM range (bytes)")
    bw_range: Tuple[float, float] = Field(default=(1000.0, 5000.0), description="Link bandwidth range")
    pr_range: Tuple[float, float] = Field(default=(1.0, 5.0), description="Link propagation delay range")

    @field_validator('ipt_range', 'ram_range', 'bw_range')
    @classmethod
    def validate_positive_range(cls, v: Tuple[float, float], info) -> Tuple[float, float]:
        return _check_range(info.field_name, v)

    @field_validator('pr_range')
    @classmethod
    def validate_pr_range(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        if v[0] < 0 or v[1] < v[0]:
            raise ValueError(f"pr_range must satisfy 0 <= low <= high, got {v}")
        return v

    @model_validator(mode="after")
    def validate_profile(self) -> "TopologyParams":
        if self.profile == "file" and not self.path:
            raise ValueError("profile 'file' requires 'path'")
        if self.profile == "generated" and self.n > 1 and self.m >= self.n:
            raise ValueError("m must be smaller than n")
        return self


class WorkloadParams(BaseModel):
    """Category table and mixing probabilities."""
    model_config = ConfigDict(extra="forbid")

    categories: List[WorkloadCategory] = Field(default_factory=default_categories)
    mix: Optional[List[float]] = Field(default=None, description="Category probabilities; uniform if omitted")

    @field_validator('categories')
    @classmethod
    def validate_categories(cls, v: List[WorkloadCategory]) -> List[WorkloadCategory]:
        return validate_category_table(v)

    @model_validator(mode="after")
    def validate_mix_length(self) -> "WorkloadParams":
        if self.mix is not None:
            validate_mix(self.mix)
            if len(self.mix) != len(self.categories):
                raise ValueError("mix must have one entry per category")
        return self

    def effective_mix(self) -> List[float]:
        if self.mix is not None:
            return list(self.mix)
        return [1.0 / len(self.categories)] * len(self.categories)


class AgentParams(BaseModel):
    """DDQL hyperparameters. None of the defaults are taken from published values."""
    model_config = ConfigDict(extra="forbid")

    representation: Representation = Representation.PARL
    hidden_layers: List[int] = Field(default_factory=lambda: [64, 64])
    gamma: float = Field(default=0.99, ge=0.0, le=1.0)
    learning_rate: float = Field(default=1e-3, gt=0.0)
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    batch_size: int = Field(default=64, ge=1)
    buffer_capacity: int = Field(default=10_000, ge=1)
    target_sync_period: int = Field(default=200, ge=1, description="Training steps between target syncs")
    train_every: int = Field(default=4, ge=1, description="Decision steps per training step")
    epsilon_start: float = Field(default=1.0, ge=0.0, le=1.0)
    epsilon_end: float = Field(default=0.05, ge=0.0, le=1.0)
    epsilon_decay_fraction: float = Field(default=0.6, ge=0.0, le=1.0)
    epsilon_resume_on_transfer: bool = Field(
        default=True, description="weights/full transfers keep the final epsilon instead of restarting"
    )
    loss: Literal["mse", "huber"] = "mse"
    huber_delta: float = Field(default=1.0, gt=0.0)
    target_direction: TargetDirection = TargetDirection.ONLINE_SELECTS

    @field_validator('hidden_layers')
    @classmethod
    def validate_hidden_layers(cls, v: List[int]) -> List[int]:
        if any(width < 1 for width in v):
            raise ValueError("hidden layer widths must be >= 1")
        return v

    @model_validator(mode="after")
    def validate_batch_fits_buffer(self) -> "AgentParams":
        if self.batch_size > self.buffer_capacity:
            raise ValueError("batch_size must not exceed buffer_capacity")
        if self.epsilon_end > self.epsilon_start:
            raise ValueError("epsilon_end must not exceed epsilon_start")
        return self


class PhaseSpec(BaseModel):
    """One lifelong-learning phase."""
    model_config = ConfigDict(extra="forbid")

    beta: float = Field(..., gt=0, description="Exponential inter-arrival scale per source cluster")
    train_steps: int = Field(default=30_000, ge=0, description="Training-step budget per retraining")
    train_episode_len: float = Field(default=10_000, gt=0, description="Simulation steps per training episode")
    inference_len: float = Field(default=100_000, ge=0, description="Simulation steps of the inference episode")


def default_phases() -> List[PhaseSpec]:
    return [PhaseSpec(beta=beta) for beta in (200.0, 150.0, 100.0)]


def desk_phases() -> List[PhaseSpec]:
    return [
        PhaseSpec(beta=beta, train_steps=5_000, train_episode_len=10_000, inference_len=20_000)
        for beta in (200.0, 150.0, 100.0)
    ]


class PhaseSchedule(BaseModel):
    """Ordered phases of increasing generation rate."""
    model_config = ConfigDict(extra="forbid")

    phases: List[PhaseSpec] = Field(default_factory=default_phases)

    @field_validator('phases')
    @classmethod
    def validate_phases(cls, v: List[PhaseSpec]) -> List[PhaseSpec]:
        if not v:
            raise ValueError("schedule needs at least one phase")
        return v

    @property
    def betas(self) -> List[float]:
        return [phase.beta for phase in self.phases]


class ExperimentConfig(BaseModel):
    """Complete, validated experiment document."""
    model_config = ConfigDict(extra="forbid")

    topology: TopologyParams = Field(default_factory=TopologyParams)
    workload: WorkloadParams = Field(default_factory=WorkloadParams)
    agent: AgentParams = Field(default_factory=AgentParams)
    schedule: PhaseSchedule = Field(default_factory=PhaseSchedule)
    modes: List[TransferMode] = Field(default_factory=lambda: list(TransferMode))
    trials: int = Field(default=11, ge=1)
    seed: int = Field(default=0, ge=0, description="Seed base; trial k uses seed + k")
    output_dir: str = "results"

    def trial_seeds(self) -> List[int]:
        return [self.seed + k for k in range(self.trials)]


DESK_IPT_RANGE = (20.0, 50.0)
DESK_BUFFER_CAPACITY = 40_000


def desk_config() -> ExperimentConfig:
    """
    Small profile for CI: desk topology, 5K training steps, 20K-step inference, 11 seeds.

    Fog IPT in 20..50 puts the last phase at roughly 65% utilization. The replay
    buffer holds two phases of decisions (20K per phase at train_every=4).
    """
    return ExperimentConfig(
        topology=TopologyParams(ipt_range=DESK_IPT_RANGE),
        agent=AgentParams(buffer_capacity=DESK_BUFFER_CAPACITY),
        schedule=PhaseSchedule(phases=desk_phases()),
    )
