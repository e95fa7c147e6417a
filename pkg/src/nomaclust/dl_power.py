"""Closed-form optimal downlink power allocation for one NOMA cluster.

The cluster budget constraint always binds. For each user i >= 2 exactly one
of two constraints binds at the optimum: its minimum-rate constraint
(``DlBinding.RATE``) or the SIC power-gap constraint of the user above it
(``DlBinding.SIC``). Each of the 2**(m-1) signatures fixes a candidate
allocation in closed form; the optimum is the feasible candidate with the
largest sum rate.

Indexing in the formulas below is 1-based (user 1 is the strongest) to keep
them readable; arrays are 0-based.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from nomaclust.domain import (
    Cluster,
    Direction,
    DlBinding,
    Feasibility,
    InfeasibleClusterError,
    PowerAllocation,
    SystemParams,
    signature_label,
)
from nomaclust.throughput import dl_rates

EQ_RTOL = 1e-9
SLACK_RTOL = 1e-12


def dl_rate_factors(cluster: Cluster, params: SystemParams) -> np.ndarray:
    """``2 ** (R_i / (w B))`` per user; note there is no ``- 1`` in downlink."""
    return 2.0 ** (cluster.min_rates / (cluster.rbs * params.rb_bandwidth))


def all_signatures(m: int) -> list[tuple[DlBinding, ...]]:
    """Every signature for an m-user cluster, in lexicographic order."""
    return list(itertools.product((DlBinding.RATE, DlBinding.SIC), repeat=m - 1))


def _require_downlink(cluster: Cluster):
    if cluster.direction is not Direction.DOWNLINK:
        raise ValueError("expected a downlink cluster")


def dl_candidate_powers(
    cluster: Cluster, sig: Sequence[DlBinding], params: SystemParams
) -> PowerAllocation:
    """Evaluate the closed-form powers for one binding signature.

    ``sig[k]`` is the flag of user ``k + 2``. Nothing is checked here:
    powers may come out non-positive for signatures that cannot be optimal.
    """
    _require_downlink(cluster)
    m = cluster.size
    sig = tuple(DlBinding(s) for s in sig)
    if len(sig) != m - 1:
        raise ValueError(f"signature needs {m - 1} flags, got {len(sig)}")

    p_t = cluster.power_budget
    p_tol = params.sic_tolerance
    w = cluster.rbs
    # 1-based views with a dummy slot 0
    g = np.concatenate(([np.nan], cluster.gains))
    phi = np.concatenate(([np.nan], dl_rate_factors(cluster, params)))
    rate = [None, None] + [s is DlBinding.RATE for s in sig]

    def factor(k):
        return phi[k] if rate[k] else 2.0

    def prod(lo, hi):
        # empty product is 1
        out = 1.0
        for k in range(lo, hi + 1):
            out *= factor(k)
        return out

    def tail(i):
        # power left for users 1..i-1 once users i..m take their binding share
        out = p_t / prod(i, m)
        for j in range(i, m + 1):
            if rate[j]:
                out -= w * (phi[j] - 1.0) / (g[j] * prod(i, j))
            else:
                out -= p_tol / (2.0 * g[j - 1] * prod(i, j - 1))
        return out

    powers = [tail(2)]
    for i in range(2, m + 1):
        if rate[i]:
            powers.append((tail(i) + w / g[i]) * (phi[i] - 1.0))
        else:
            powers.append(tail(i) + p_tol / g[i - 1])
    return PowerAllocation(tuple(powers), sig)


def _rate_condition(p: np.ndarray, g: np.ndarray, phi: np.ndarray, w: int):
    """Value and magnitude of ``P_i g_i - (phi_i - 1)(sum_{j<i} P_j g_i + w)``."""
    before = np.concatenate(([0.0], np.cumsum(p)[:-1]))
    interference = (before * g + w) * (phi - 1.0)
    return p * g - interference, np.abs(p * g) + np.abs(interference)


def _sic_condition(p: np.ndarray, g: np.ndarray, p_tol: float):
    """Value and magnitude of ``(P_i - sum_{j<i} P_j) g_{i-1} - P_tol`` for i = 2..m."""
    before = np.cumsum(p)[:-1]
    g_prev = g[:-1]
    value = (p[1:] - before) * g_prev - p_tol
    scale = (np.abs(p[1:]) + np.abs(before)) * g_prev + p_tol
    return value, scale


def dl_check_feasibility(
    cluster: Cluster, alloc: PowerAllocation, params: SystemParams
) -> Feasibility:
    """Check a candidate against positivity, rate, SIC and budget conditions.

    Conditions the signature claims as binding must hold with equality
    (relative tolerance 1e-9 of the terms involved); all others must hold
    with at most 1e-12 relative negative slack.
    """
    _require_downlink(cluster)
    p = alloc.array
    g = cluster.gains
    phi = dl_rate_factors(cluster, params)
    sig = alloc.signature
    violations = []

    for i in np.flatnonzero(p <= 0):
        violations.append(f"P{i + 1} = {p[i]:.6g} is not positive")

    value, scale = _rate_condition(p, g, phi, cluster.rbs)
    for k in range(cluster.size):
        binding = k >= 1 and sig[k - 1] is DlBinding.RATE
        violations += judge_condition(f"rate[{k + 1}]", value[k], scale[k], binding)

    value, scale = _sic_condition(p, g, params.sic_tolerance)
    for k in range(cluster.size - 1):
        binding = sig[k] is DlBinding.SIC
        violations += judge_condition(f"sic[{k + 2}]", value[k], scale[k], binding)

    total = float(np.sum(p))
    if abs(total - cluster.power_budget) > EQ_RTOL * cluster.power_budget:
        violations.append(f"budget: sum {total:.9g} != {cluster.power_budget:.9g}")
    return Feasibility(tuple(violations))


def judge_condition(name: str, value: float, scale: float, binding: bool) -> list[str]:
    if binding:
        if abs(value) > EQ_RTOL * scale:
            return [f"{name} should bind, residual {value:.3g}"]
    elif value < -SLACK_RTOL * scale:
        return [f"{name} violated by {-value:.3g}"]
    return []


@dataclass(frozen=True)
class Candidate:
    alloc: PowerAllocation
    verdict: Feasibility
    sum_rate: float


def dl_enumerate(cluster: Cluster, params: SystemParams) -> list[Candidate]:
    """Evaluate and check all 2**(m-1) candidates, in signature order."""
    out = []
    for sig in all_signatures(cluster.size):
        alloc = dl_candidate_powers(cluster, sig, params)
        verdict = dl_check_feasibility(cluster, alloc, params)
        rate = float(np.sum(dl_rates(cluster, alloc.powers, params))) if verdict else float("nan")
        out.append(Candidate(alloc, verdict, rate))
    return out


def dl_optimize(cluster: Cluster, params: SystemParams) -> PowerAllocation:
    """Sum-rate optimal downlink allocation.

    Raises InfeasibleClusterError when no signature passes; the exception
    carries every candidate's violation list.
    """
    candidates = dl_enumerate(cluster, params)
    feasible = [c for c in candidates if c.verdict]
    if not feasible:
        raise InfeasibleClusterError(
            f"downlink cluster {[u.user_id for u in cluster.users]} is infeasible",
            {signature_label(c.alloc.signature): list(c.verdict.violations) for c in candidates},
        )
    best = min(feasible, key=lambda c: (-c.sum_rate, tuple(c.alloc.signature)))
    return best.alloc


def dl_max_power_bound(m: int, p_t: float) -> float:
    """Upper bound ``P_t / 2**(m-1)`` on the strongest user's power (ideal-SIC limit)."""
    if m < 2:
        raise ValueError("m must be >= 2")
    return p_t / 2.0 ** (m - 1)
