"""Fog topology generation: preferential-attachment graphs, betweenness roles, resources."""
from pathlib import Path
from typing import Dict, List, Tuple
import json
import logging
import random

import networkx as nx
from pydantic import ValidationError

from app.core.errors import (
    DisconnectedGraphError,
    InvalidParameterError,
    TopologyFormatError,
    TopologyTooSmallError,
)
from app.core.rng import stream
from app.schemas.experiment import TopologyParams
from app.schemas.topology import (
    TOPOLOGY_FORMAT_VERSION,
    FogTopology,
    LinkSpec,
    NodeRole,
    NodeSpec,
)

logger = logging.getLogger(__name__)

Range = Tuple[float, float]


def stub_count(n: int, m: int) -> int:
    """Single-homed stub vertices grown onto the transit core: a quarter of n, leaving >= m + 1 core vertices."""
    return max(0, min(n // 4, n - m - 1))


def generate_graph(seed: int, n: int, m: int) -> nx.Graph:
    """
    Generate a connected scale-free graph by preferential attachment.

    A transit core of n - stub_count(n, m) vertices grows with m edges per new
    vertex, then the stub vertices grow onto it with one edge each. The last
    stub can gain no further edge, so a degree-1 vertex exists whenever
    stub_count is positive, whatever m is; m == 1 still gives a tree.

    Args:
        seed: Generator seed; identical inputs give identical edge sets
        n: Vertex count (>= 1)
        m: Edges added per new core vertex (1 <= m < n); ignored when n == 1

    Raises:
        InvalidParameterError: If n < 1 or m is outside [1, n)
    """
    if n < 1:
        raise InvalidParameterError("n", n, "must be >= 1")
    if n == 1:
        graph = nx.Graph()
        graph.add_node(0)
        return graph
    if m < 1 or m >= n:
        raise InvalidParameterError("m", m, f"must satisfy 1 <= m < n (n={n})")
    rng = random.Random(seed)
    stubs = stub_count(n, m)
    core = nx.barabasi_albert_graph(n - stubs, m, seed=rng)
    if stubs == 0:
        return nx.Graph(core)
    return nx.Graph(nx.barabasi_albert_graph(n, 1, seed=rng, initial_graph=core))


def betweenness(graph: nx.Graph) -> Dict[int, float]:
    """
    Normalized betweenness centrality over all shortest paths.

    Raises:
        InvalidParameterError: If the graph is empty
        DisconnectedGraphError: If the graph is not connected
    """
    if graph.number_of_nodes() == 0:
        raise InvalidParameterError("graph", "empty", "must have at least one vertex")
    if not nx.is_connected(graph):
        raise DisconnectedGraphError(nx.number_connected_components(graph))
    scores = nx.betweenness_centrality(graph, normalized=True)
    return {node: float(scores[node]) for node in sorted(graph.nodes())}


def assign_roles(graph: nx.Graph, scores: Dict[int, float]) -> Dict[int, NodeRole]:
    """
    Top-betweenness vertex (lowest id on ties) is the Cloud, other degree-1 vertices
    are source clusters, the rest are Fog nodes.

    Raises:
        InvalidParameterError: If scores miss a vertex
        TopologyTooSmallError: If fewer than 2 Fog nodes remain
    """
    missing = set(graph.nodes()) - set(scores)
    if missing:
        raise InvalidParameterError("scores", sorted(missing), "must cover every vertex")

    best = max(scores[node] for node in graph.nodes())
    cloud = min(node for node in graph.nodes() if scores[node] == best)

    roles: Dict[int, NodeRole] = {}
    for node in sorted(graph.nodes()):
        if node == cloud:
            roles[node] = NodeRole.CLOUD
        elif graph.degree(node) == 1:
            roles[node] = NodeRole.SOURCE_CLUSTER
        else:
            roles[node] = NodeRole.FOG

    fog_count = sum(1 for r in roles.values() if r == NodeRole.FOG)
    cluster_count = sum(1 for r in roles.values() if r == NodeRole.SOURCE_CLUSTER)
    if fog_count < 2:
        raise TopologyTooSmallError(fog_count, cluster_count)
    return roles


def deal_clusters(fog_ipt: Dict[int, float], cluster_ids: List[int]) -> Dict[int, int]:
    """
    Attach clusters inversely to compute: Fog nodes sorted ascending by (IPT, id),
    clusters dealt round-robin starting at the weakest node.

    Returns:
        Mapping cluster id -> Fog node id
    """
    if not fog_ipt:
        raise InvalidParameterError("fog_ipt", fog_ipt, "needs at least one Fog node")
    order = sorted(fog_ipt, key=lambda node: (fog_ipt[node], node))
    return {cluster: order[k % len(order)] for k, cluster in enumerate(sorted(cluster_ids))}


def _validate_range(name: str, value: Range, allow_zero: bool = False) -> Range:
    if value is None or len(value) != 2:
        raise InvalidParameterError(name, value, "must be a (low, high) pair")
    low, high = value
    if high < low:
        raise InvalidParameterError(name, value, "range is empty (high < low)")
    if low < 0 or (low == 0 and not allow_zero):
        raise InvalidParameterError(name, value, "bounds must be positive")
    return value


def attach_resources(
    graph: nx.Graph,
    roles: Dict[int, NodeRole],
    seed: int,
    ipt_range: Range,
    ram_range: Range,
    bw_range: Range = (1000.0, 5000.0),
    pr_range: Range = (1.0, 5.0),
) -> FogTopology:
    """
    Sample node/link resources and re-attach source clusters inversely to Fog IPT.

    The weaker a Fog node, the more clusters it serves; cluster counts differ by at
    most one with any surplus on the weaker nodes.

    Raises:
        InvalidParameterError: On empty or non-positive ranges
    """
    _validate_range("ipt_range", ipt_range)
    _validate_range("ram_range", ram_range)
    _validate_range("bw_range", bw_range)
    _validate_range("pr_range", pr_range, allow_zero=True)

    rng = stream(seed, "topology")

    nodes: List[NodeSpec] = []
    for node_id in sorted(graph.nodes()):
        ipt = float(rng.uniform(ipt_range[0], ipt_range[1]))
        ram = max(1, int(round(rng.uniform(ram_range[0], ram_range[1]))))
        nodes.append(NodeSpec(id=node_id, role=roles[node_id], ipt=ipt, ram=ram))

    clusters = sorted(i for i, r in roles.items() if r == NodeRole.SOURCE_CLUSTER)
    cluster_set = set(clusters)

    def sample_link(a: int, b: int) -> LinkSpec:
        bw = float(rng.uniform(bw_range[0], bw_range[1]))
        pr = float(rng.uniform(pr_range[0], pr_range[1]))
        return LinkSpec(endpoints=(a, b), bw=bw, pr=pr)

    core_edges = sorted(
        (min(u, v), max(u, v)) for u, v in graph.edges()
        if u not in cluster_set and v not in cluster_set
    )
    links = [sample_link(a, b) for a, b in core_edges]

    fog_ipt = {node.id: node.ipt for node in nodes if node.role == NodeRole.FOG}
    attachment = deal_clusters(fog_ipt, clusters)
    links.extend(sample_link(fog, cluster) for cluster, fog in sorted(attachment.items()))

    topology = FogTopology(nodes=nodes, links=links)
    for node in nodes:
        logger.debug(f"node {node.id} role={node.role.value} ipt={node.ipt:.2f} ram={node.ram}")
    return topology


def cluster_counts(topology: FogTopology) -> Dict[int, int]:
    """Number of source clusters attached to each Fog node."""
    counts = {fog: 0 for fog in topology.fog_ids}
    for cluster in topology.cluster_ids:
        (fog,) = topology.adjacency[cluster]
        counts[fog] += 1
    return counts


def desk_graph() -> Tuple[nx.Graph, Dict[int, NodeRole]]:
    """1 Cloud (0), 3 Fog nodes (1-3) and 2 source clusters (4, 5)."""
    graph = nx.Graph()
    graph.add_edges_from([(0, 1), (0, 2), (0, 3), (1, 2), (2, 3), (1, 4), (3, 5)])
    roles = {0: NodeRole.CLOUD, 1: NodeRole.FOG, 2: NodeRole.FOG, 3: NodeRole.FOG,
             4: NodeRole.SOURCE_CLUSTER, 5: NodeRole.SOURCE_CLUSTER}
    return graph, roles


def build_topology(params: TopologyParams, seed: int) -> FogTopology:
    """
    Build the topology an experiment runs on.

    Raises:
        TopologyTooSmallError: If a generated graph yields <2 Fog nodes or no clusters
        TopologyFormatError: If a topology file is invalid
    """
    if params.profile == "file":
        return load_topology(params.path)

    if params.profile == "desk":
        graph, roles = desk_graph()
    else:
        graph = generate_graph(seed, params.n, params.m)
        roles = assign_roles(graph, betweenness(graph))
        cluster_count = sum(1 for r in roles.values() if r == NodeRole.SOURCE_CLUSTER)
        if cluster_count == 0:
            fog_count = sum(1 for r in roles.values() if r == NodeRole.FOG)
            raise TopologyTooSmallError(
                fog_count, 0, reason="Topology has no degree-1 vertices to act as source clusters"
            )

    topology = attach_resources(
        graph, roles, seed,
        ipt_range=params.ipt_range,
        ram_range=params.ram_range,
        bw_range=params.bw_range,
        pr_range=params.pr_range,
    )
    logger.info(
        f"Built {params.profile} topology: {len(topology.fog_ids)} fog, "
        f"{len(topology.cluster_ids)} clusters, {len(topology.links)} links"
    )
    return topology


def save_topology(topology: FogTopology, path: str) -> None:
    """Write the topology JSON document."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(topology.model_dump_json(indent=2), encoding="utf-8")


def load_topology(path: str) -> FogTopology:
    """
    Read and validate a topology JSON document.

    Raises:
        TopologyFormatError: On unreadable JSON, version mismatch or invariant violations
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise TopologyFormatError(f"not valid JSON ({e})")
    version = raw.get("format_version") if isinstance(raw, dict) else None
    if version != TOPOLOGY_FORMAT_VERSION:
        raise TopologyFormatError(
            f"format_version {version!r} is not supported (expected {TOPOLOGY_FORMAT_VERSION})"
        )
    try:
        return FogTopology.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first.get("loc", ())) or "<root>"
        raise TopologyFormatError(f"{location}: {first.get('msg')}")
