"""Tests for the discrete-event fog simulator."""
import io
import json

import numpy as np
import pytest
import simpy

from app.core.errors import InvalidParameterError, UnreachableNodeError
from app.core.rng import stream
from app.schemas.topology import FogTopology, LinkSpec, NodeRole, NodeSpec
from app.schemas.workload import WorkloadCategory, WorkloadLabel
from app.services.sim import (
    EventKind,
    FogNode,
    FogSimulator,
    process_arrival,
    route,
    transit_delay,
)
from app.services.workload import Job, JobGenerator
from tests.mocks import MockGenerator

ZERO_BYTES = [WorkloadCategory(id=0, label=WorkloadLabel.LIGHT, mean_instructions=100.0)]


def scripted_sim(topology, times, instructions, trace=None) -> FogSimulator:
    sim = FogSimulator(topology, ZERO_BYTES, trace=trace)
    sim.attach_generator(MockGenerator(3, times, instructions))
    return sim


def desk_sim(topology, categories, seed=0, trace=None) -> FogSimulator:
    sim = FogSimulator(topology, categories, trace=trace)
    for k, cluster in enumerate(topology.cluster_ids):
        sim.attach_generator(JobGenerator(cluster, 20.0, categories, [1 / 3] * 3, stream(seed, "workload", 0, 0, 0, k)))
    return sim


class TestLinksAndRoutes:
    """Test link transit and minimum-hop routing."""

    def test_transit_delay(self):
        """Test transit is bytes / bw + pr."""
        link = LinkSpec(endpoints=(0, 1), bw=1000.0, pr=1.0)
        assert transit_delay(link, 500) == 1.5
        assert transit_delay(link, 0) == 1.0

    def test_negative_bytes(self):
        """Test negative payloads are rejected."""
        with pytest.raises(InvalidParameterError):
            transit_delay(LinkSpec(endpoints=(0, 1), bw=1.0, pr=0.0), -1)

    def test_route_through_cloud(self, line_topology):
        """Test the only path from cluster 3 to Fog 2 crosses Fog 1 and the Cloud."""
        assert route(line_topology, 3, 2) == [3, 1, 0, 2]
        assert route(line_topology, 3, 1) == [3, 1]
        assert route(line_topology, 2, 2) == [2]

    def test_route_tie_break(self):
        """Test equal-hop paths resolve to the smallest id sequence."""
        topology = FogTopology(
            nodes=[
                NodeSpec(id=0, role=NodeRole.CLOUD, ipt=1.0, ram=1),
                NodeSpec(id=1, role=NodeRole.FOG, ipt=1.0, ram=1),
                NodeSpec(id=2, role=NodeRole.FOG, ipt=1.0, ram=1),
                NodeSpec(id=3, role=NodeRole.FOG, ipt=1.0, ram=1),
                NodeSpec(id=4, role=NodeRole.SOURCE_CLUSTER, ipt=1.0, ram=1),
            ],
            links=[
                LinkSpec(endpoints=(0, 2), bw=1.0, pr=0.0),
                LinkSpec(endpoints=(0, 1), bw=1.0, pr=0.0),
                LinkSpec(endpoints=(2, 3), bw=1.0, pr=0.0),
                LinkSpec(endpoints=(1, 3), bw=1.0, pr=0.0),
                LinkSpec(endpoints=(3, 4), bw=1.0, pr=0.0),
            ],
        )
        assert route(topology, 4, 0) == [4, 3, 1, 0]

    def test_unknown_node(self, line_topology):
        """Test routing to an unknown node raises UnreachableNodeError."""
        with pytest.raises(UnreachableNodeError):
            route(line_topology, 3, 42)


class TestQueueing:
    """Test FIFO single-server admission."""

    def test_idle_node_starts_service(self):
        """Test an idle node serves an arriving job immediately."""
        node = FogNode(simpy.Environment(), node_id=1, ipt=50.0)
        job = Job(id=0, category=0, source_cluster=3, instructions=100.0, t_created=0.0)
        request, completion = process_arrival(node, job, 2.0)
        assert completion == 4.0
        assert request.triggered
        assert job.t_service_start == 2.0
        assert node.length == 1

    def test_busy_node_queues(self):
        """Test a busy node puts the job in its FIFO."""
        node = FogNode(simpy.Environment(), node_id=1, ipt=50.0)
        first = Job(id=0, category=0, source_cluster=3, instructions=100.0, t_created=0.0)
        second = Job(id=1, category=0, source_cluster=3, instructions=100.0, t_created=0.0)
        process_arrival(node, first, 1.0)
        request, completion = process_arrival(node, second, 1.5)
        assert completion is None
        assert not request.triggered
        assert list(node.server.queue) == [request]
        assert node.length == 2
        assert second.t_service_start is None

    def test_trace_sequence_numbers(self, line_topology):
        """Test trace records carry consecutive sequence numbers in time order."""
        buffer = io.StringIO()
        sim = scripted_sim(line_topology, [1.0, 2.0], [100.0, 100.0], trace=buffer)
        sim.run_until(10.0, lambda job, view: 1)
        records = [json.loads(line) for line in buffer.getvalue().splitlines()]
        assert [r["seq"] for r in records] == list(range(8))
        assert [r["kind"] for r in records[:3]] == [
            EventKind.JOB_CREATED.name, EventKind.JOB_CREATED.name, EventKind.ARRIVAL_AT_NODE.name
        ]


class TestFogSimulator:
    """Test the event loop on scripted and random workloads."""

    def test_two_jobs_exact_timeline(self, line_topology):
        """Test delays and queue integral for two jobs sharing Fog 1."""
        sim = scripted_sim(line_topology, [1.0, 2.0], [100.0, 100.0])
        metrics = sim.run_until(10.0, lambda job, view: 1)
        # job 0: created 1, arrives 2, served 2-4, delivered 5
        # job 1: created 2, arrives 3, waits to 4, served 4-6, delivered 7
        assert metrics.execution_delays == [4.0, 5.0]
        assert metrics.waiting_delays == [0.0, 1.0]
        assert metrics.sojourns == [2.0, 3.0]
        assert metrics.jobs_completed == 2
        assert metrics.time_avg_queue[1] == pytest.approx(0.5)
        assert metrics.time_avg_queue[2] == 0.0
        assert sim.now == 10.0

    def test_routing_delay_to_remote_node(self, line_topology):
        """Test a job sent to Fog 2 pays three hops each way."""
        sim = scripted_sim(line_topology, [1.0], [100.0])
        metrics = sim.run_until(20.0, lambda job, view: 2)
        assert metrics.execution_delays == [3.0 + 2.0 + 3.0]

    def test_view_reports_queues_before_assignment(self, line_topology):
        """Test the decision callback sees queues excluding the job being placed."""
        seen = []

        def decide(job, view):
            seen.append((view.total_queued(), view.queue_lengths()))
            return 1

        sim = scripted_sim(line_topology, [1.0, 2.5, 3.75], [100.0, 100.0, 100.0])
        sim.run_until(3.75, decide)
        # job 0 in service at 2.5; job 1 joins the queue at 3.5
        assert seen == [(0, [0, 0]), (1, [1, 0]), (2, [2, 0])]

    def test_invalid_action_drops_job(self, line_topology):
        """Test assigning to a non-Fog node drops the job and counts it."""
        sim = scripted_sim(line_topology, [1.0], [100.0])
        metrics = sim.run_until(10.0, lambda job, view: 0)
        assert metrics.jobs_dropped == 1
        assert metrics.jobs_completed == 0
        assert sim.conservation_holds()

    def test_conservation_during_run(self, desk_topology, categories):
        """Test created = completed + in flight + queued + dropped at every window end."""
        sim = desk_sim(desk_topology, categories)
        fog_ids = desk_topology.fog_ids
        for t_end in np.linspace(100.0, 3000.0, 15):
            sim.run_until(float(t_end), lambda job, view: fog_ids[job.id % len(fog_ids)])
            assert sim.conservation_holds()
        assert sim.jobs_created > 0

    def test_same_seed_same_trace(self, desk_topology, categories):
        """Test identical seeds produce byte-identical event traces."""
        traces = []
        for _ in range(2):
            buffer = io.StringIO()
            sim = desk_sim(desk_topology, categories, seed=5, trace=buffer)
            sim.run_until(2000.0, lambda job, view: desk_topology.fog_ids[0])
            traces.append(buffer.getvalue())
        assert traces[0] == traces[1]
        times = [json.loads(line)["time"] for line in traces[0].splitlines()]
        assert times == sorted(times)

    def test_run_until_past(self, line_topology):
        """Test t_end before now is rejected."""
        sim = scripted_sim(line_topology, [1.0], [100.0])
        sim.run_until(5.0, lambda job, view: 1)
        with pytest.raises(InvalidParameterError):
            sim.run_until(4.0, lambda job, view: 1)

    def test_request_stop_ends_window(self, line_topology):
        """Test a callback can stop the window at the current event."""

        def decide(job, view):
            view.request_stop()
            return 1

        sim = scripted_sim(line_topology, [1.0, 2.0], [100.0, 100.0])
        metrics = sim.run_until(100.0, decide)
        assert metrics.end == 1.0
        assert metrics.jobs_created == 1
        assert sim.now == 1.0

    def test_windows_split_metrics(self, line_topology):
        """Test consecutive windows report only their own completions."""
        sim = scripted_sim(line_topology, [1.0, 2.0], [100.0, 100.0])
        first = sim.run_until(5.5, lambda job, view: 1)
        second = sim.run_until(10.0, lambda job, view: 1)
        assert first.jobs_completed == 1
        assert second.jobs_completed == 1
        assert first.jobs_created + second.jobs_created == 2

    def test_generator_must_be_cluster(self, line_topology):
        """Test a generator on a non-cluster node is rejected."""
        sim = FogSimulator(line_topology, ZERO_BYTES)
        with pytest.raises(InvalidParameterError):
            sim.attach_generator(MockGenerator(1, [1.0], [1.0]))
