"""
State and reward representations for the load-balancing agent.

PARL (privacy-aware) observes only the job's source cluster, its workload
category and the agent's own decision history d; its reward is the change in
the system-wide queued-job count. PLRL (privacy-lacking) observes per-node
queue lengths directly and is rewarded with -Q.
"""
from typing import List, Optional, Sequence, Union
import logging

import numpy as np

from app.core.errors import InvalidParameterError
from app.schemas.experiment import Representation

logger = logging.getLogger(__name__)

RESUM_PERIOD = 10_000


def init_distribution(n_clusters: int, n_categories: int, n_actions: int) -> np.ndarray:
    """
    Uniform |C| x |W| x |A| load distribution.

    Raises:
        InvalidParameterError: If any dimension is < 1
    """
    for name, value in (("clusters", n_clusters), ("categories", n_categories), ("actions", n_actions)):
        if value < 1:
            raise InvalidParameterError(name, value, "dimension must be >= 1")
    size = n_clusters * n_categories * n_actions
    return np.full((n_clusters, n_categories, n_actions), 1.0 / size)


def _check_index(name: str, value: int, bound: int) -> None:
    if not 0 <= value < bound:
        raise InvalidParameterError(name, value, f"index out of range [0, {bound})")


def update_distribution(d: np.ndarray, c: int, w: int, a: int) -> np.ndarray:
    """
    Vanishing normalization: add 1 at (c, w, a) and divide by the post-add sum of 2.

    Returns a new array; d is not modified.
    """
    _check_index("cluster", c, d.shape[0])
    _check_index("category", w, d.shape[1])
    _check_index("action", a, d.shape[2])
    updated = d * 0.5
    updated[c, w, a] = (d[c, w, a] + 1.0) / 2.0
    return updated


class LoadTracker:
    """Owns d for one agent-environment loop and applies decisions to it."""

    def __init__(self, n_clusters: int, n_categories: int, n_actions: int):
        self.d = init_distribution(n_clusters, n_categories, n_actions)
        self.updates = 0

    @property
    def shape(self):
        return self.d.shape

    def record(self, c: int, w: int, a: int) -> None:
        self.d = update_distribution(self.d, c, w, a)
        self.updates += 1
        if self.updates % RESUM_PERIOD == 0:
            total = float(self.d.sum())
            self.d = self.d / total
            logger.debug(f"Re-summed load distribution after {self.updates} updates (sum was {total!r})")


def one_hot(index: int, size: int) -> np.ndarray:
    _check_index("index", index, size)
    vector = np.zeros(size)
    vector[index] = 1.0
    return vector


def encode_state(c: int, w: int, d: np.ndarray) -> np.ndarray:
    """PARL state: one-hot(c) || one-hot(w) || flatten(d)."""
    n_clusters, n_categories, _ = d.shape
    return np.concatenate([one_hot(c, n_clusters), one_hot(w, n_categories), d.ravel()])


def parl_reward(q_prev: int, q_now: int) -> float:
    """Change in queued jobs between two consecutive decisions."""
    return float(q_prev - q_now)


def queue_block(queue_lengths: Sequence[int]) -> np.ndarray:
    """Per-node queue lengths normalized by their sum; zeros for an empty system."""
    lengths = np.asarray(queue_lengths, dtype=float)
    if np.any(lengths < 0):
        raise InvalidParameterError("queue_lengths", list(queue_lengths), "must be >= 0")
    total = lengths.sum()
    return lengths / total if total > 0 else np.zeros_like(lengths)


def plrl_state(c: int, w: int, n_clusters: int, n_categories: int,
               queue_lengths: Sequence[int]) -> np.ndarray:
    """PLRL state: one-hot(c) || one-hot(w) || normalized per-node queue lengths."""
    return np.concatenate([
        one_hot(c, n_clusters), one_hot(w, n_categories), queue_block(queue_lengths)
    ])


def plrl_reward(q_now: int) -> float:
    return float(-q_now)


class ParlObserver:
    """
    Privacy-aware observer. Its inputs are the cluster index, the category and the
    total queued count; per-node queue lengths and node IPT never reach it.
    """
    representation = Representation.PARL

    def __init__(self, n_clusters: int, n_categories: int, n_actions: int):
        self.n_clusters = n_clusters
        self.n_categories = n_categories
        self.n_actions = n_actions
        self.tracker = LoadTracker(n_clusters, n_categories, n_actions)

    @property
    def state_dim(self) -> int:
        return self.n_clusters + self.n_categories + self.n_clusters * self.n_categories * self.n_actions

    def encode(self, c: int, w: int) -> np.ndarray:
        return encode_state(c, w, self.tracker.d)

    def record(self, c: int, w: int, a: int) -> None:
        self.tracker.record(c, w, a)

    def reward(self, q_prev: int, q_now: int) -> float:
        return parl_reward(q_prev, q_now)


class PlrlObserver:
    """Privacy-lacking observer fed with per-node queue lengths."""
    representation = Representation.PLRL

    def __init__(self, n_clusters: int, n_categories: int, n_actions: int):
        self.n_clusters = n_clusters
        self.n_categories = n_categories
        self.n_actions = n_actions

    @property
    def state_dim(self) -> int:
        return self.n_clusters + self.n_categories + self.n_actions

    def encode(self, c: int, w: int, queue_lengths: Sequence[int]) -> np.ndarray:
        if len(queue_lengths) != self.n_actions:
            raise InvalidParameterError("queue_lengths", list(queue_lengths),
                                        f"expected {self.n_actions} entries")
        return plrl_state(c, w, self.n_clusters, self.n_categories, queue_lengths)

    def record(self, c: int, w: int, a: int) -> None:
        pass

    def reward(self, q_prev: int, q_now: int) -> float:
        return plrl_reward(q_now)


Observer = Union[ParlObserver, PlrlObserver]


def make_observer(representation: Representation, n_clusters: int, n_categories: int,
                  n_actions: int) -> Observer:
    if representation == Representation.PARL:
        return ParlObserver(n_clusters, n_categories, n_actions)
    return PlrlObserver(n_clusters, n_categories, n_actions)


def observe(observer: Observer, c: int, w: int,
            queue_lengths: Optional[List[int]] = None) -> np.ndarray:
    """Build the state vector, handing queue lengths only to the PLRL observer."""
    if isinstance(observer, ParlObserver):
        return observer.encode(c, w)
    if queue_lengths is None:
        raise InvalidParameterError("queue_lengths", None, "PLRL needs per-node queue lengths")
    return observer.encode(c, w, queue_lengths)
