"""Poisson job generation per source cluster."""
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from app.core.errors import InvalidParameterError
from app.schemas.workload import WorkloadCategory, validate_mix


@dataclass(slots=True)
class Job:
    """One workload instance and its lifecycle timestamps."""
    id: int
    category: int
    source_cluster: int
    instructions: float
    t_created: float
    t_assigned: Optional[float] = None
    t_arrived: Optional[float] = None
    t_service_start: Optional[float] = None
    t_completed: Optional[float] = None
    t_delivered: Optional[float] = None
    node: Optional[int] = None

    @property
    def execution_delay(self) -> float:
        return self.t_delivered - self.t_created

    @property
    def waiting_delay(self) -> float:
        return self.t_service_start - self.t_arrived

    @property
    def sojourn(self) -> float:
        """Time at the node, queueing plus service."""
        return self.t_completed - self.t_arrived


def _open_unit(rng) -> float:
    """Uniform draw in the open interval (0, 1)."""
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return u


def sample_interarrival(rng, beta: float) -> float:
    """
    Exponential inter-arrival time with scale (mean) beta: -beta * ln(u).

    Raises:
        InvalidParameterError: If beta <= 0
    """
    if not beta > 0:
        raise InvalidParameterError("beta", beta, "must be > 0")
    return -beta * float(np.log(_open_unit(rng)))


def sample_category(rng, mix: Sequence[float]) -> int:
    """
    Draw a category id with the configured probabilities.

    Raises:
        InvalidParameterError: If mix has negative entries or does not sum to 1
    """
    try:
        validate_mix(list(mix))
    except ValueError as e:
        raise InvalidParameterError("category_mix", list(mix), str(e))
    cumulative = np.cumsum(mix)
    index = int(np.searchsorted(cumulative, rng.random(), side="right"))
    # Rounding can leave cumulative[-1] a hair below 1
    index = min(index, len(mix) - 1)
    while mix[index] == 0 and index > 0:
        index -= 1
    return index


def sample_instructions(rng, category: WorkloadCategory) -> float:
    """
    Exponential instruction count with mean category.mean_instructions, so service is memoryless.

    Raises:
        InvalidParameterError: If mean_instructions <= 0
    """
    mean = category.mean_instructions
    if not mean > 0:
        raise InvalidParameterError("mean_instructions", mean, "must be > 0")
    return -mean * float(np.log(_open_unit(rng)))


class JobGenerator:
    """
    Poisson job source for one cluster. Single-owner: holds its own RNG stream.
    """

    def __init__(
        self,
        cluster_id: int,
        beta: float,
        categories: List[WorkloadCategory],
        mix: Sequence[float],
        rng: np.random.Generator
    ):
        if not beta > 0:
            raise InvalidParameterError("beta", beta, "must be > 0")
        validate_mix(list(mix))
        if len(mix) != len(categories):
            raise InvalidParameterError("category_mix", list(mix), "needs one entry per category")
        self.cluster_id = cluster_id
        self.beta = beta
        self.categories = categories
        self.mix = list(mix)
        self.rng = rng

    def next_arrival(self, now: float) -> float:
        """Absolute time of the next job."""
        return now + sample_interarrival(self.rng, self.beta)

    def make_job(self, job_id: int, now: float) -> Job:
        category = sample_category(self.rng, self.mix)
        instructions = sample_instructions(self.rng, self.categories[category])
        return Job(
            id=job_id,
            category=category,
            source_cluster=self.cluster_id,
            instructions=instructions,
            t_created=now,
        )
