"""Closed-form optimal uplink power allocation for one NOMA cluster.

In uplink the cluster sum rate only grows with each user's received power,
and power control never frees budget for another user. Every user except the
weakest therefore transmits at full power; the weakest user backs off only
when that is needed for the second-weakest user's minimum rate or for its
SIC power gap. That leaves three candidates regardless of cluster size.
"""

from __future__ import annotations

import numpy as np

from nomaclust.domain import (
    Cluster,
    Direction,
    Feasibility,
    InfeasibleClusterError,
    PowerAllocation,
    SystemParams,
    UlVariant,
)
from nomaclust.dl_power import EQ_RTOL, Candidate, judge_condition
from nomaclust.throughput import ul_rates


def ul_rate_factors(cluster: Cluster, params: SystemParams) -> np.ndarray:
    """``2 ** (R_i / (w B)) - 1`` per user (the SINR target)."""
    return 2.0 ** (cluster.min_rates / (cluster.rbs * params.rb_bandwidth)) - 1.0


def _require_uplink(cluster: Cluster):
    if cluster.direction is not Direction.UPLINK:
        raise ValueError("expected an uplink cluster")


def ul_candidate_powers(cluster: Cluster, variant: UlVariant, params: SystemParams) -> PowerAllocation:
    _require_uplink(cluster)
    variant = UlVariant(variant)
    p_max = params.ue_power_budget
    g = cluster.gains
    w = cluster.rbs
    powers = [p_max] * cluster.size
    if variant is UlVariant.RATE_CONTROLLED:
        phi = ul_rate_factors(cluster, params)
        powers[-1] = p_max * g[-2] / (phi[-2] * g[-1]) - w / g[-1]
    elif variant is UlVariant.SIC_CONTROLLED:
        powers[-1] = p_max * g[-2] / g[-1] - params.sic_tolerance / g[-1]
    return PowerAllocation(tuple(powers), variant)


def ul_check_feasibility(
    cluster: Cluster,
    alloc: PowerAllocation,
    params: SystemParams,
    variant: UlVariant | None = None,
) -> Feasibility:
    """Check rate, SIC and per-user power conditions for an uplink candidate.

    ``variant`` defaults to the allocation's own signature. The controlled
    variants additionally require the weakest user strictly below the
    power budget; otherwise the all-full-power candidate covers the case.
    """
    _require_uplink(cluster)
    variant = UlVariant(alloc.signature if variant is None else variant)
    p = alloc.array
    g = cluster.gains
    m = cluster.size
    p_max = params.ue_power_budget
    phi = ul_rate_factors(cluster, params)
    rx = p * g
    weaker = np.concatenate((np.cumsum(rx[::-1])[::-1][1:], [0.0]))
    violations = []

    for i in range(m):
        if not p[i] > 0:
            violations.append(f"P{i + 1} = {p[i]:.6g} is not positive")
        elif p[i] > p_max * (1.0 + EQ_RTOL):
            violations.append(f"P{i + 1} = {p[i]:.6g} exceeds budget {p_max:.6g}")
    if variant is not UlVariant.ALL_FULL_POWER and not p[-1] < p_max:
        violations.append(f"P{m} = {p[-1]:.6g} is not below the budget")

    value = rx - phi * (weaker + cluster.rbs)
    scale = np.abs(rx) + phi * (np.abs(weaker) + cluster.rbs)
    for i in range(m):
        binding = variant is UlVariant.RATE_CONTROLLED and i == m - 2
        violations += judge_condition(f"rate[{i + 1}]", value[i], scale[i], binding)

    p_tol = params.sic_tolerance
    value = rx[:-1] - weaker[:-1] - p_tol
    scale = np.abs(rx[:-1]) + np.abs(weaker[:-1]) + p_tol
    for i in range(m - 1):
        binding = variant is UlVariant.SIC_CONTROLLED and i == m - 2
        violations += judge_condition(f"sic[{i + 1}]", value[i], scale[i], binding)
    return Feasibility(tuple(violations))


def ul_enumerate(cluster: Cluster, params: SystemParams) -> list[Candidate]:
    out = []
    for variant in UlVariant:
        alloc = ul_candidate_powers(cluster, variant, params)
        verdict = ul_check_feasibility(cluster, alloc, params)
        rate = float(np.sum(ul_rates(cluster, alloc.powers, params))) if verdict else float("nan")
        out.append(Candidate(alloc, verdict, rate))
    return out


def ul_optimize(cluster: Cluster, params: SystemParams) -> PowerAllocation:
    """Sum-rate optimal uplink allocation.

    Ties go to full power, then to the variant leaving the weakest user more
    power. Raises InfeasibleClusterError when no variant passes.
    """
    candidates = ul_enumerate(cluster, params)
    feasible = [c for c in candidates if c.verdict]
    if not feasible:
        raise InfeasibleClusterError(
            f"uplink cluster {[u.user_id for u in cluster.users]} is infeasible",
            {c.alloc.label: list(c.verdict.violations) for c in candidates},
        )
    best = min(
        feasible,
        key=lambda c: (
            -c.sum_rate,
            c.alloc.signature is not UlVariant.ALL_FULL_POWER,
            -c.alloc.powers[-1],
        ),
    )
    return best.alloc

