"""Randomized closed-form vs. oracle comparison, shared by tests and the CLI."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from nomaclust.domain import Cluster, Direction, InfeasibleClusterError, PowerAllocation, SystemParams, db_to_linear, dbm_to_watts
from nomaclust.dl_power import dl_optimize
from nomaclust.oracle import dl_numeric_optimum, kkt_residuals, ul_numeric_optimum
from nomaclust.throughput import sum_rate
from nomaclust.ul_power import ul_optimize

AGREEMENT_RTOL = 1e-4
# finer grids cost grid**(m-1) points per round; 64 keeps m=4 tractable
ORACLE_GRID = {2: 200, 3: 200, 4: 64}
RATE_HEADROOM = 1.25
# optima often sit at vertices of thin feasible cones; two extra rounds
# close in on them at little cost
ORACLE_REFINEMENTS = 5


def optimize(cluster: Cluster, params: SystemParams) -> PowerAllocation:
    if cluster.direction is Direction.DOWNLINK:
        return dl_optimize(cluster, params)
    return ul_optimize(cluster, params)


def numeric_optimum(cluster: Cluster, params: SystemParams, grid: int | None = None, refinements: int = ORACLE_REFINEMENTS):
    grid = grid or ORACLE_GRID.get(cluster.size, 50)
    if cluster.direction is Direction.DOWNLINK:
        return dl_numeric_optimum(cluster, params, grid, refinements)
    return ul_numeric_optimum(cluster, params, grid, refinements)


def random_instance(
    rng: np.random.Generator,
    direction: Direction,
    m: int,
    headroom: float = RATE_HEADROOM,
    max_tries: int = 10_000,
) -> tuple[Cluster, SystemParams, PowerAllocation]:
    """Draw a feasible cluster with rate headroom.

    Gains, rates and the SIC tolerance are random. An instance is kept only
    if it stays feasible with every minimum rate scaled by ``headroom``, so
    its feasible set has interior a grid search can hit.
    """
    for _ in range(max_tries):
        top = rng.uniform(20.0, 45.0)
        gains_db = top - np.concatenate(([0.0], np.cumsum(rng.uniform(1.0, 12.0, m - 1))))
        gains = [db_to_linear(x) for x in gains_db]
        rates = rng.uniform(2e4, 1.5e6, m)
        tol_dbm = rng.uniform(-10.0, 25.0) if direction is Direction.DOWNLINK else rng.uniform(-10.0, 40.0)
        params = replace(SystemParams(), sic_tolerance=dbm_to_watts(tol_dbm))
        try:
            optimize(Cluster.build(direction, gains, list(rates * headroom), params=params), params)
            cluster = Cluster.build(direction, gains, list(rates), params=params)
            return cluster, params, optimize(cluster, params)
        except InfeasibleClusterError:
            continue
    raise RuntimeError("could not draw a feasible instance")


@dataclass(frozen=True)
class AgreementResult:
    direction: Direction
    m: int
    count: int
    worst_rel_gap: float
    closed_form_dominates: bool
    kkt_failures: int
    signatures: dict[str, int]
    seconds: float

    @property
    def passed(self) -> bool:
        return self.worst_rel_gap <= AGREEMENT_RTOL and self.closed_form_dominates and self.kkt_failures == 0


def check_agreement(direction: Direction, m: int, count: int = 100, seed: int = 0) -> AgreementResult:
    """Compare closed form and oracle on ``count`` random feasible instances."""
    rng = np.random.default_rng([seed, m, 0 if direction is Direction.DOWNLINK else 1])
    start = time.perf_counter()
    worst = 0.0
    dominates = True
    kkt_failures = 0
    signatures: dict[str, int] = {}
    for _ in range(count):
        cluster, params, alloc = random_instance(rng, direction, m)
        closed = sum_rate(cluster, alloc.powers, params)
        _, oracle = numeric_optimum(cluster, params)
        worst = max(worst, abs(closed - oracle) / oracle)
        dominates &= closed >= oracle - AGREEMENT_RTOL * oracle
        kkt_failures += not kkt_residuals(cluster, alloc, params).ok
        signatures[alloc.label] = signatures.get(alloc.label, 0) + 1
    return AgreementResult(
        direction, m, count, worst, dominates, kkt_failures, signatures, time.perf_counter() - start
    )
