"""Non-learning placement policies used as reference points."""
from typing import List
import enum

import numpy as np

from app.services.sim import SimView
from app.services.workload import Job


class BaselineKind(str, enum.Enum):
    ROUND_ROBIN = "roundrobin"
    RANDOM = "random"
    GREEDY = "greedy"


class RoundRobinPolicy:
    """Cycles through Fog ids in ascending order."""

    def __init__(self, fog_ids: List[int]):
        self.fog_ids = sorted(fog_ids)
        self._next = 0

    def __call__(self, job: Job, view: SimView) -> int:
        node = self.fog_ids[self._next]
        self._next = (self._next + 1) % len(self.fog_ids)
        return node


class RandomPolicy:
    """Uniform over Fog ids from a seeded stream."""

    def __init__(self, fog_ids: List[int], rng: np.random.Generator):
        self.fog_ids = sorted(fog_ids)
        self.rng = rng

    def __call__(self, job: Job, view: SimView) -> int:
        return self.fog_ids[int(self.rng.integers(len(self.fog_ids)))]


class GreedyMinQueuePolicy:
    """
    Oracle: reads true per-node queue lengths and picks the shortest,
    lowest id on ties. Not privacy-preserving.
    """

    def __init__(self, fog_ids: List[int]):
        self.fog_ids = sorted(fog_ids)

    def __call__(self, job: Job, view: SimView) -> int:
        return self.fog_ids[int(np.argmin(view.queue_lengths()))]


def baseline_policy(kind: BaselineKind, fog_ids: List[int], rng: np.random.Generator):
    if kind == BaselineKind.ROUND_ROBIN:
        return RoundRobinPolicy(fog_ids)
    if kind == BaselineKind.RANDOM:
        return RandomPolicy(fog_ids, rng)
    return GreedyMinQueuePolicy(fog_ids)
