"""Test utility functions."""
from typing import List, Sequence

import numpy as np

from app.schemas.topology import FogTopology, LinkSpec, NodeRole, NodeSpec
from app.services.agent import Transition


def make_line_topology(fog_ipt: Sequence[float] = (50.0, 50.0), pr: float = 1.0,
                       bw: float = 1000.0) -> FogTopology:
    """Cloud 0 linked to Fog 1 and 2; source cluster 3 hangs off Fog 1."""
    return FogTopology(
        nodes=[
            NodeSpec(id=0, role=NodeRole.CLOUD, ipt=100.0, ram=1),
            NodeSpec(id=1, role=NodeRole.FOG, ipt=fog_ipt[0], ram=1),
            NodeSpec(id=2, role=NodeRole.FOG, ipt=fog_ipt[1], ram=1),
            NodeSpec(id=3, role=NodeRole.SOURCE_CLUSTER, ipt=1.0, ram=1),
        ],
        links=[
            LinkSpec(endpoints=(0, 1), bw=bw, pr=pr),
            LinkSpec(endpoints=(0, 2), bw=bw, pr=pr),
            LinkSpec(endpoints=(1, 3), bw=bw, pr=pr),
        ],
    )


def random_transitions(rng: np.random.Generator, count: int, state_dim: int,
                       n_actions: int) -> List[Transition]:
    """Create random transitions for buffer and training tests."""
    return [
        Transition(
            state=rng.random(state_dim),
            action=int(rng.integers(n_actions)),
            reward=float(rng.normal()),
            next_state=rng.random(state_dim),
        )
        for _ in range(count)
    ]


def write_results_csv(path, values: Sequence[float], mode: str = "scratch", phase: int = 1) -> str:
    """Create a per-trial results CSV with one row per value."""
    lines = ["mode,phase,beta,seed,episode_return,mean_exec_delay,jobs_completed"]
    for seed, value in enumerate(values):
        lines.append(f"{mode},{phase},200.0,{seed},{value},{value},{int(value)}")
    path.write_text("\n".join(lines) + "\n")
    return str(path)
