"""
Deterministic discrete-event simulation of a fog network on SimPy.

Jobs are created by per-cluster Poisson sources, assigned to a Fog node by a
decision callback, sent over the minimum-hop route, served FIFO by a single
server per node (M/M/1 with exponential instruction counts) and answered back
to the source cluster. Every job is one SimPy process; every Fog node is a
capacity-1 simpy.Resource.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, Generator, List, Optional, Protocol, TextIO, Tuple
import enum
import json
import logging
import math

import networkx as nx
import simpy
from simpy.resources.resource import Request

from app.core.errors import InvalidActionError, InvalidParameterError, UnreachableNodeError
from app.schemas.topology import FogTopology, LinkSpec, NodeRole
from app.schemas.workload import WorkloadCategory
from app.services.workload import Job, JobGenerator

logger = logging.getLogger(__name__)


class EventKind(enum.IntEnum):
    JOB_CREATED = 0
    ARRIVAL_AT_NODE = 1
    SERVICE_COMPLETE = 2
    RESPONSE_DELIVERED = 3


class FogNode:
    """FIFO single-server Fog node and its queue-length integral."""

    def __init__(self, env: simpy.Environment, node_id: int, ipt: float):
        self.env = env
        self.node_id = node_id
        self.ipt = ipt
        self.server = simpy.Resource(env, capacity=1)
        self.area = 0.0
        self.last_change = env.now

    @property
    def length(self) -> int:
        """q_i: waiting plus in-service jobs."""
        return self.server.count + len(self.server.queue)

    def advance(self, now: float) -> None:
        """Accumulate the queue-length integral up to now."""
        self.area += self.length * (now - self.last_change)
        self.last_change = now

    def service_time(self, job: Job) -> float:
        return job.instructions / self.ipt


@dataclass
class SimMetrics:
    """Metrics over one run_until window."""
    start: float
    end: float
    execution_delays: List[float] = field(default_factory=list)
    waiting_delays: List[float] = field(default_factory=list)
    sojourns: List[float] = field(default_factory=list)
    time_avg_queue: Dict[int, float] = field(default_factory=dict)
    jobs_created: int = 0
    jobs_completed: int = 0
    jobs_dropped: int = 0

    @staticmethod
    def _mean(values: List[float]) -> float:
        return sum(values) / len(values) if values else 0.0

    @property
    def mean_execution_delay(self) -> float:
        return self._mean(self.execution_delays)

    @property
    def mean_waiting_delay(self) -> float:
        return self._mean(self.waiting_delays)

    @property
    def mean_sojourn(self) -> float:
        return self._mean(self.sojourns)


class SimView(Protocol):
    """Read-only view handed to decision callbacks."""
    now: float

    def total_queued(self) -> int: ...

    def queue_lengths(self) -> List[int]: ...


DecisionCallback = Callable[[Job, SimView], int]


def transit_delay(link: LinkSpec, nbytes: float) -> float:
    """
    Deterministic link transit: nbytes / bw + pr.

    Raises:
        InvalidParameterError: If nbytes < 0
    """
    if nbytes < 0:
        raise InvalidParameterError("bytes", nbytes, "must be >= 0")
    return nbytes / link.bw + link.pr


def route(topology: FogTopology, source: int, target: int) -> List[int]:
    """
    Minimum-hop path; among equal-hop paths the lexicographically smallest id sequence.

    Raises:
        UnreachableNodeError: If either node is unknown or no path exists
    """
    adjacency = topology.adjacency
    if source not in adjacency or target not in adjacency:
        raise UnreachableNodeError(source, target)
    if source == target:
        return [source]
    try:
        distance = nx.single_source_shortest_path_length(topology.to_graph(), target)
    except nx.NodeNotFound:
        raise UnreachableNodeError(source, target)
    if source not in distance:
        raise UnreachableNodeError(source, target)
    path = [source]
    current = source
    while current != target:
        # adjacency is ascending, so the first closer neighbor is the smallest id
        current = next(n for n in adjacency[current] if distance.get(n) == distance[current] - 1)
        path.append(current)
    return path


def path_delay(topology: FogTopology, path: List[int], nbytes: float) -> float:
    """Sum of link transit delays along a path."""
    return sum(
        transit_delay(topology.link_between(a, b), nbytes) for a, b in zip(path, path[1:])
    )


def process_arrival(node: FogNode, job: Job, now: float) -> Tuple[Request, Optional[float]]:
    """
    Admit a job at a Fog node: start service if idle, otherwise join the FIFO.

    Returns:
        (request, completion time when service starts now, else None)
    """
    node.advance(now)
    job.t_arrived = now
    request = node.server.request()
    if request.triggered:
        job.t_service_start = now
        return request, now + node.service_time(job)
    return request, None


class FogSimulator:
    """
    One simulated fog network. Single-threaded and single-owner.
    """

    def __init__(
        self,
        topology: FogTopology,
        categories: List[WorkloadCategory],
        trace: Optional[TextIO] = None
    ):
        self.topology = topology
        self.categories = categories
        self.trace = trace
        self.env = simpy.Environment()
        self.fog_ids: List[int] = topology.fog_ids
        self.nodes: Dict[int, FogNode] = {
            node_id: FogNode(self.env, node_id, topology.node(node_id).ipt)
            for node_id in self.fog_ids
        }
        self._seq = 0
        self._next_job_id = 0
        self._routes: Dict[Tuple[int, int], List[int]] = {}
        self._window: Optional[SimMetrics] = None
        self._decide: Optional[DecisionCallback] = None
        self._stop_requested = False

        self.jobs_created = 0
        self.jobs_completed = 0
        self.jobs_dropped = 0
        self.jobs_in_flight = 0

    # -- view -----------------------------------------------------------------

    @property
    def now(self) -> float:
        return self.env.now

    def total_queued(self) -> int:
        """System-wide count of queued plus in-service jobs."""
        return sum(node.length for node in self.nodes.values())

    def queue_lengths(self) -> List[int]:
        """Per-Fog-node q_i in ascending node id order."""
        return [self.nodes[node_id].length for node_id in self.fog_ids]

    def conservation_holds(self) -> bool:
        return self.jobs_created == (
            self.jobs_completed + self.jobs_in_flight + self.total_queued() + self.jobs_dropped
        )

    # -- setup ----------------------------------------------------------------

    def attach_generator(self, generator: JobGenerator) -> None:
        """Register a cluster's Poisson source as a SimPy process."""
        cluster = generator.cluster_id
        if self.topology.node(cluster).role != NodeRole.SOURCE_CLUSTER:
            raise InvalidParameterError("cluster_id", cluster, "must be a source cluster node")
        self.env.process(self._source(generator))

    def _leg_delay(self, cluster: int, fog: int, nbytes: float) -> float:
        """Transit delay between a cluster and a Fog node; links are symmetric."""
        key = (cluster, fog)
        if key not in self._routes:
            self._routes[key] = route(self.topology, cluster, fog)
        return path_delay(self.topology, self._routes[key], nbytes)

    # -- loop -----------------------------------------------------------------

    def request_stop(self) -> None:
        """Make the current run_until return after the event being processed."""
        self._stop_requested = True

    def run_until(self, t_end: float, decide: DecisionCallback) -> SimMetrics:
        """
        Process events with time <= t_end, then move the clock to t_end.

        A decision callback may call request_stop(); the window then ends at the
        time of the last processed event.

        Raises:
            InvalidParameterError: If t_end is in the past
        """
        if t_end < self.now:
            raise InvalidParameterError("t_end", t_end, f"must be >= now ({self.now})")

        window = SimMetrics(start=self.now, end=t_end)
        start_area: Dict[int, float] = {}
        for node_id, node in self.nodes.items():
            node.advance(self.now)
            start_area[node_id] = node.area
        self._window = window
        self._decide = decide
        self._stop_requested = False

        # step() instead of run(until=t_end) so events at exactly t_end are included
        while not self._stop_requested and self.env.peek() <= t_end:
            self.env.step()
        if not self._stop_requested and t_end > self.env.now:
            self.env.run(until=t_end)

        window.end = self.now
        elapsed = window.end - window.start
        for node_id, node in self.nodes.items():
            node.advance(self.now)
            span = node.area - start_area[node_id]
            window.time_avg_queue[node_id] = span / elapsed if elapsed > 0 else 0.0
        self._window = None
        self._decide = None
        return window

    def _write_trace(self, kind: EventKind, job_id: int, node_id: int) -> None:
        if self.trace is None:
            return
        record = {
            "time": self.now,
            "seq": self._seq,
            "kind": kind.name,
            "job_id": job_id,
            "node_id": node_id,
        }
        self._seq += 1
        self.trace.write(json.dumps(record) + "\n")

    # -- processes ------------------------------------------------------------

    def _source(self, generator: JobGenerator) -> Generator[simpy.Event, None, None]:
        while True:
            at = generator.next_arrival(self.now)
            if math.isinf(at):
                return
            yield self.env.timeout(at - self.now)
            self._create_job(generator)

    def _create_job(self, generator: JobGenerator) -> None:
        cluster = generator.cluster_id
        job = generator.make_job(self._next_job_id, self.now)
        self._next_job_id += 1
        self.jobs_created += 1
        self._window.jobs_created += 1
        self._write_trace(EventKind.JOB_CREATED, job.id, cluster)

        node_id = self._decide(job, self)
        if node_id not in self.nodes:
            error = InvalidActionError(node_id, job.id)
            logger.error(f"Dropping job: {error.message}")
            self.jobs_dropped += 1
            self._window.jobs_dropped += 1
            return

        job.t_assigned = self.now
        job.node = node_id
        self.jobs_in_flight += 1
        self.env.process(self._serve(job, self.nodes[node_id]))

    def _serve(self, job: Job, node: FogNode) -> Generator[simpy.Event, None, None]:
        category = self.categories[job.category]
        yield self.env.timeout(self._leg_delay(job.source_cluster, node.node_id, category.request_bytes))
        self.jobs_in_flight -= 1
        self._write_trace(EventKind.ARRIVAL_AT_NODE, job.id, node.node_id)

        request, _ = process_arrival(node, job, self.now)
        with request:
            yield request
            job.t_service_start = self.now
            yield self.env.timeout(node.service_time(job))
            node.advance(self.now)
            job.t_completed = self.now
            self.jobs_in_flight += 1
            self._write_trace(EventKind.SERVICE_COMPLETE, job.id, node.node_id)

        yield self.env.timeout(self._leg_delay(job.source_cluster, node.node_id, category.response_bytes))
        job.t_delivered = self.now
        self.jobs_in_flight -= 1
        self.jobs_completed += 1
        self._write_trace(EventKind.RESPONSE_DELIVERED, job.id, job.source_cluster)
        window = self._window
        window.jobs_completed += 1
        window.execution_delays.append(job.execution_delay)
        window.waiting_delays.append(job.waiting_delay)
        window.sojourns.append(job.sojourn)
