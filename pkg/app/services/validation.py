"""
Built-in oracle checks: queueing theory, samplers, vanishing normalization and
backpropagation. Used by `fogforge validate` and by the test suite.
"""
from typing import List
import logging

import numpy as np

from app.core.rng import stream
from app.schemas.results import OracleResult
from app.schemas.topology import FogTopology, LinkSpec, NodeRole, NodeSpec
from app.schemas.workload import WorkloadCategory, WorkloadLabel
from app.services.nn import Mlp, gradient_check
from app.services.representation import init_distribution, update_distribution
from app.services.sim import FogSimulator
from app.services.workload import JobGenerator, sample_interarrival

logger = logging.getLogger(__name__)

ORACLE_SEED = 20240611
MM1_IPT = 50.0
MM1_MEAN_INSTRUCTIONS = 100.0
MM1_HORIZON = 1_000_000.0
MM1_TOLERANCE = 0.05
SAMPLER_DRAWS = 100_000
SAMPLER_TOLERANCE = 0.02
NORMALIZATION_UPDATES = 100_000
GRADIENT_TOLERANCE = 1e-4


def mm1_topology() -> FogTopology:
    """One cluster feeding one Fog node over zero-delay links; a second Fog node stays idle."""
    return FogTopology(
        nodes=[
            NodeSpec(id=0, role=NodeRole.CLOUD, ipt=MM1_IPT, ram=1),
            NodeSpec(id=1, role=NodeRole.FOG, ipt=MM1_IPT, ram=1),
            NodeSpec(id=2, role=NodeRole.FOG, ipt=MM1_IPT, ram=1),
            NodeSpec(id=3, role=NodeRole.SOURCE_CLUSTER, ipt=MM1_IPT, ram=1),
        ],
        links=[
            LinkSpec(endpoints=(0, 1), bw=1.0, pr=0.0),
            LinkSpec(endpoints=(0, 2), bw=1.0, pr=0.0),
            LinkSpec(endpoints=(1, 3), bw=1.0, pr=0.0),
        ],
    )


def simulate_mm1(rho: float, horizon: float = MM1_HORIZON, seed: int = ORACLE_SEED):
    """
    Run a single-cluster, single-node M/M/1 system at utilization rho.

    Returns:
        (time-averaged number in system, mean sojourn, mu, lambda)
    """
    mu = MM1_IPT / MM1_MEAN_INSTRUCTIONS
    lam = rho * mu
    categories = [WorkloadCategory(id=0, label=WorkloadLabel.LIGHT,
                                   mean_instructions=MM1_MEAN_INSTRUCTIONS)]
    sim = FogSimulator(mm1_topology(), categories)
    sim.attach_generator(JobGenerator(3, 1.0 / lam, categories, [1.0], stream(seed, "workload", 0, 0, 0, 0)))
    metrics = sim.run_until(horizon, lambda job, view: 1)
    return metrics.time_avg_queue[1], metrics.mean_sojourn, mu, lam


def check_mm1(rho: float, horizon: float = MM1_HORIZON) -> List[OracleResult]:
    in_system, sojourn, mu, lam = simulate_mm1(rho, horizon)
    expected_l = rho / (1.0 - rho)
    expected_w = 1.0 / (mu - lam)
    results = []
    for name, measured, expected in (
        (f"mm1_number_in_system[rho={rho}]", in_system, expected_l),
        (f"mm1_sojourn[rho={rho}]", sojourn, expected_w),
    ):
        error = abs(measured - expected) / expected
        results.append(OracleResult(
            name=name, passed=error <= MM1_TOLERANCE, measured=measured, expected=expected,
            tolerance=MM1_TOLERANCE, detail=f"relative error {error:.4f}",
        ))
    return results


def check_sampler(beta: float, draws: int = SAMPLER_DRAWS) -> OracleResult:
    rng = stream(ORACLE_SEED, "workload", int(beta))
    mean = float(np.mean([sample_interarrival(rng, beta) for _ in range(draws)]))
    error = abs(mean - beta) / beta
    return OracleResult(
        name=f"interarrival_mean[beta={beta:g}]", passed=error <= SAMPLER_TOLERANCE,
        measured=mean, expected=beta, tolerance=SAMPLER_TOLERANCE,
        detail=f"relative error {error:.4f}",
    )


def check_normalization(updates: int = NORMALIZATION_UPDATES) -> OracleResult:
    """Random decisions keep d summing to 1 and follow the halving law element-wise."""
    rng = stream(ORACLE_SEED, "exploration")
    d = init_distribution(3, 3, 4)
    worst_sum = 0.0
    halving_ok = True
    for _ in range(updates):
        c, w, a = (int(rng.integers(n)) for n in d.shape)
        updated = update_distribution(d, c, w, a)
        expected = d * 0.5
        expected[c, w, a] = (d[c, w, a] + 1.0) / 2.0
        halving_ok = halving_ok and bool(np.array_equal(updated, expected))
        worst_sum = max(worst_sum, abs(float(updated.sum()) - 1.0))
        d = updated
    return OracleResult(
        name="vanishing_normalization", passed=halving_ok and worst_sum <= 1e-9,
        measured=worst_sum, expected=0.0, tolerance=1e-9,
        detail="halving law held" if halving_ok else "halving law violated",
    )


def check_gradients(nets: int = 10) -> OracleResult:
    worst = 0.0
    for index in range(nets):
        rng = stream(ORACLE_SEED, "agent_init", index)
        net = Mlp.initialize([6, 8, 8, 3], rng)
        for bias in net.biases:
            bias[:] = rng.normal(0.0, 0.1, size=bias.shape)
        x = rng.normal(size=(4, 6))
        upstream = rng.normal(size=(4, 3))
        worst = max(worst, gradient_check(net, x, upstream))
    return OracleResult(
        name="backprop_vs_finite_differences", passed=worst <= GRADIENT_TOLERANCE,
        measured=worst, expected=0.0, tolerance=GRADIENT_TOLERANCE,
    )


def run_validation(horizon: float = MM1_HORIZON) -> List[OracleResult]:
    """Run every oracle and log its verdict."""
    results: List[OracleResult] = []
    for rho in (0.3, 0.5, 0.7):
        results.extend(check_mm1(rho, horizon))
    for beta in (100.0, 150.0, 200.0):
        results.append(check_sampler(beta))
    results.append(check_normalization())
    results.append(check_gradients())

    for result in results:
        level = logging.INFO if result.passed else logging.WARNING
        logger.log(
            level,
            f"{result.name}: {'PASS' if result.passed else 'FAIL'} "
            f"(measured={result.measured:.6g}, expected={result.expected:.6g})"
        )
    return results
