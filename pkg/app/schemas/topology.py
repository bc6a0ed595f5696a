"""Pydantic schemas for fog topologies and their JSON document."""
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator
from typing import Any, Dict, List, Tuple
import enum

import networkx as nx


TOPOLOGY_FORMAT_VERSION = 1


class NodeRole(str, enum.Enum):
    """Role of a node in the fog hierarchy."""
    CLOUD = "cloud"
    FOG = "fog"
    SOURCE_CLUSTER = "source_cluster"


class NodeSpec(BaseModel):
    """A compute or source node."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: int = Field(..., ge=0, description="Unique node id")
    role: NodeRole
    ipt: float = Field(..., gt=0, description="Instructions per simulated time unit")
    ram: int = Field(..., gt=0, description="Memory in bytes (recorded, not used by queue dynamics)")


class LinkSpec(BaseModel):
    """A bidirectional link; one record serves both directions."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    endpoints: Tuple[int, int]
    bw: float = Field(..., gt=0, description="Bytes per simulated time unit")
    pr: float = Field(..., ge=0, description="Propagation delay in simulated time units")

    @field_validator('endpoints')
    @classmethod
    def validate_endpoints(cls, v: Tuple[int, int]) -> Tuple[int, int]:
        if v[0] == v[1]:
            raise ValueError("link endpoints must be distinct")
        return v


class FogTopology(BaseModel):
    """Validated fog topology; immutable after construction."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    format_version: int = TOPOLOGY_FORMAT_VERSION
    nodes: List[NodeSpec]
    links: List[LinkSpec]

    _adjacency: Dict[int, List[int]] = PrivateAttr(default_factory=dict)
    _links_by_pair: Dict[Tuple[int, int], LinkSpec] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def validate_structure(self) -> "FogTopology":
        ids = [node.id for node in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("node ids must be unique")
        known = set(ids)

        pairs = set()
        for link in self.links:
            a, b = link.endpoints
            if a not in known or b not in known:
                raise ValueError(f"link {link.endpoints} references an unknown node")
            key = (min(a, b), max(a, b))
            if key in pairs:
                raise ValueError(f"duplicate link {key}")
            pairs.add(key)

        roles = {node.id: node.role for node in self.nodes}
        clouds = [i for i, r in roles.items() if r == NodeRole.CLOUD]
        fogs = [i for i, r in roles.items() if r == NodeRole.FOG]
        if len(clouds) != 1:
            raise ValueError(f"exactly one cloud node required, found {len(clouds)}")
        if len(fogs) < 2:
            raise ValueError(f"at least 2 fog nodes required, found {len(fogs)}")

        graph = self.to_graph()
        if not nx.is_connected(graph):
            raise ValueError("topology graph must be connected")
        for node_id, role in roles.items():
            if role != NodeRole.SOURCE_CLUSTER:
                continue
            neighbors = list(graph.neighbors(node_id))
            if len(neighbors) != 1 or roles[neighbors[0]] != NodeRole.FOG:
                raise ValueError(f"source cluster {node_id} must have exactly one Fog neighbor")
        return self

    def model_post_init(self, context: Any) -> None:
        adjacency: Dict[int, List[int]] = {node.id: [] for node in self.nodes}
        for link in self.links:
            a, b = link.endpoints
            adjacency.setdefault(a, []).append(b)
            adjacency.setdefault(b, []).append(a)
            self._links_by_pair[(min(a, b), max(a, b))] = link
        self._adjacency = {k: sorted(v) for k, v in adjacency.items()}

    @property
    def adjacency(self) -> Dict[int, List[int]]:
        """Neighbor ids per node, ascending."""
        return self._adjacency

    def link_between(self, a: int, b: int) -> LinkSpec:
        return self._links_by_pair[(min(a, b), max(a, b))]

    def node(self, node_id: int) -> NodeSpec:
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise KeyError(node_id)

    def ids_with_role(self, role: NodeRole) -> List[int]:
        return sorted(node.id for node in self.nodes if node.role == role)

    @property
    def fog_ids(self) -> List[int]:
        return self.ids_with_role(NodeRole.FOG)

    @property
    def cluster_ids(self) -> List[int]:
        return self.ids_with_role(NodeRole.SOURCE_CLUSTER)

    def to_graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(sorted(node.id for node in self.nodes))
        graph.add_edges_from(link.endpoints for link in self.links)
        return graph
