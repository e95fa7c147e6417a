"""Achievable rates for NOMA clusters and the orthogonal baseline.

Downlink user i (0-based, strongest first) decodes and removes the signals
of every weaker user, so it only sees interference from stronger users:

    r_i = w B log2(1 + P_i g_i / (sum_{j<i} P_j g_i + w))

Uplink SIC at the base station decodes the strongest user first, so user i
sees interference from the weaker users:

    r_i = w B log2(1 + P_i g_i / (sum_{j>i} P_j g_j + w))

``w`` is the number of resource blocks and ``g`` the gain normalized by the
per-RB noise power, which is why ``w`` appears as the noise term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from nomaclust.domain import (
    Cluster,
    Direction,
    PowerAllocation,
    SystemParams,
    signature_label,
)


def _params(params: SystemParams | None) -> SystemParams:
    return params if params is not None else SystemParams()


def dl_rates(cluster: Cluster, powers: Sequence[float], params: SystemParams | None = None) -> np.ndarray:
    p = np.asarray(powers, dtype=float)
    g = cluster.gains
    w = cluster.rbs
    interference = np.concatenate(([0.0], np.cumsum(p)[:-1])) * g
    return w * _params(params).rb_bandwidth * np.log2(1.0 + p * g / (interference + w))


def ul_rates(cluster: Cluster, powers: Sequence[float], params: SystemParams | None = None) -> np.ndarray:
    p = np.asarray(powers, dtype=float)
    rx = p * cluster.gains
    w = cluster.rbs
    # received power of all weaker users, i.e. reverse cumulative sum shifted by one
    interference = np.concatenate((np.cumsum(rx[::-1])[::-1][1:], [0.0]))
    return w * _params(params).rb_bandwidth * np.log2(1.0 + rx / (interference + w))


def dl_user_rate(cluster: Cluster, powers: Sequence[float], i: int, params: SystemParams | None = None) -> float:
    """Downlink rate of user ``i`` (0-based) in bits/s."""
    return float(dl_rates(cluster, powers, params)[i])


def ul_user_rate(cluster: Cluster, powers: Sequence[float], i: int, params: SystemParams | None = None) -> float:
    """Uplink rate of user ``i`` (0-based) in bits/s."""
    return float(ul_rates(cluster, powers, params)[i])


def user_rates(cluster: Cluster, powers: Sequence[float], params: SystemParams | None = None) -> np.ndarray:
    if cluster.direction is Direction.DOWNLINK:
        return dl_rates(cluster, powers, params)
    return ul_rates(cluster, powers, params)


def sum_rate(cluster: Cluster, powers: Sequence[float], params: SystemParams | None = None) -> float:
    return float(np.sum(user_rates(cluster, powers, params)))


def oma_rates(cluster: Cluster, params: SystemParams | None = None) -> np.ndarray:
    """Orthogonal baseline: each user gets ``w/m`` of the cluster's blocks.

    Downlink users get an equal share ``P_t/m`` of the cluster budget and
    uplink users transmit at full power; noise scales with the occupied
    bandwidth in both cases. Fractional block shares are allowed.
    """
    params = _params(params)
    m = cluster.size
    share = cluster.rbs / m
    if cluster.direction is Direction.DOWNLINK:
        power = cluster.power_budget / m
    else:
        power = params.ue_power_budget
    return share * params.rb_bandwidth * np.log2(1.0 + power * cluster.gains / share)


def oma_cluster_sum(cluster: Cluster, params: SystemParams | None = None) -> float:
    return float(np.sum(oma_rates(cluster, params)))


@dataclass(frozen=True)
class AllocationReport:
    """Per-user and aggregate throughput of one cluster, NOMA vs OMA."""

    direction: Direction
    user_ids: tuple[str, ...]
    gains_db: tuple[float, ...]
    rbs: int
    powers: tuple[float, ...]
    signature: str
    rates: tuple[float, ...]
    noma_sum: float
    oma_rates: tuple[float, ...]
    oma_sum: float

    @property
    def size(self) -> int:
        return len(self.user_ids)


def report(cluster: Cluster, alloc: PowerAllocation, params: SystemParams | None = None) -> AllocationReport:
    rates = user_rates(cluster, alloc.powers, params)
    oma = oma_rates(cluster, params)
    return AllocationReport(
        direction=cluster.direction,
        user_ids=tuple(u.user_id for u in cluster.users),
        gains_db=tuple(u.gain_db for u in cluster.users),
        rbs=cluster.rbs,
        powers=alloc.powers,
        signature=signature_label(alloc.signature),
        rates=tuple(float(r) for r in rates),
        noma_sum=float(sum(rates)),
        oma_rates=tuple(float(r) for r in oma),
        oma_sum=float(sum(oma)),
    )
