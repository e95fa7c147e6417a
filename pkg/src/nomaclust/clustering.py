"""Low-complexity user grouping.

Users are sorted by descending channel gain. A count ``alpha`` of users with
markedly higher gains ("class A") fixes the number of clusters ``kappa``;
users are then dealt into clusters with stride ``kappa`` so that each
cluster gets one strong user and the rest spread evenly.

All user indices here are 0-based positions in the sorted gain list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from nomaclust.domain import Direction

EXPLICIT = "explicit"
LARGEST_GAP = "largest_gap"
FORCED_SIZE = "forced_size"


@dataclass(frozen=True)
class ClusteringConfig:
    """How to pick ``alpha``.

    mode
        ``"explicit"`` uses ``alpha`` as given; ``"largest_gap"`` places the
        class boundary at the largest consecutive dB drop if it is at least
        ``min_gap_db``; ``"forced_size"`` targets clusters of ``cluster_size``
        users (needed to compare fixed cluster sizes side by side).
    """

    mode: str = LARGEST_GAP
    alpha: int | None = None
    min_gap_db: float = 10.0
    cluster_size: int | None = None
    direction: Direction = Direction.DOWNLINK

    def __post_init__(self):
        if self.mode == EXPLICIT:
            if self.alpha is None or self.alpha < 1:
                raise ValueError("explicit mode needs alpha >= 1")
        elif self.mode == LARGEST_GAP:
            if not self.min_gap_db > 0:
                raise ValueError("min_gap_db must be > 0")
        elif self.mode == FORCED_SIZE:
            if self.cluster_size is None or self.cluster_size < 2:
                raise ValueError("forced_size mode needs cluster_size >= 2")
        else:
            raise ValueError(f"unknown clustering mode {self.mode!r}")

    @classmethod
    def explicit(cls, alpha: int, direction=Direction.DOWNLINK) -> "ClusteringConfig":
        return cls(EXPLICIT, alpha=alpha, direction=direction)

    @classmethod
    def largest_gap(cls, min_gap_db: float = 10.0, direction=Direction.DOWNLINK):
        return cls(LARGEST_GAP, min_gap_db=min_gap_db, direction=direction)

    @classmethod
    def forced_size(cls, cluster_size: int, direction=Direction.DOWNLINK):
        return cls(FORCED_SIZE, cluster_size=cluster_size, direction=direction)


@dataclass(frozen=True)
class ClusterAssignment:
    """Partition of user indices into clusters, each listed strongest first."""

    clusters: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(tuple(c) for c in self.clusters))
        for c in self.clusters:
            if len(c) < 2:
                raise ValueError(f"cluster {c} has fewer than 2 users")
        flat = [i for c in self.clusters for i in c]
        if len(flat) != len(set(flat)):
            raise ValueError("a user is assigned to more than one cluster")

    @property
    def num_users(self) -> int:
        return sum(len(c) for c in self.clusters)

    def membership(self) -> np.ndarray:
        """0/1 matrix ``beta[i, j]`` = user i is in cluster j."""
        beta = np.zeros((self.num_users, len(self.clusters)), dtype=int)
        for j, c in enumerate(self.clusters):
            beta[list(c), j] = 1
        return beta


def _check_sorted(gains: Sequence[float]) -> np.ndarray:
    g = np.asarray(gains, dtype=float)
    if g.size == 0:
        raise ValueError("empty gain list")
    if g.size < 2:
        raise ValueError("need at least 2 users")
    if np.any(g <= 0):
        raise ValueError("gains must be positive linear values")
    if np.any(np.diff(g) >= 0):
        raise ValueError("gains must be strictly descending")
    return g


def classify_alpha(gains_sorted_desc: Sequence[float], config: ClusteringConfig) -> int:
    """Number of class-A users, in ``[1, N - 1]``.

    Without a dB drop of at least ``min_gap_db`` there is no distinct strong
    class and ``N // 2`` is returned, which yields ``N // 2`` two-user
    clusters downstream.
    """
    g = _check_sorted(gains_sorted_desc)
    n = g.size
    if config.mode == EXPLICIT:
        if config.alpha > n:
            raise ValueError(f"alpha={config.alpha} exceeds N={n}")
        return min(config.alpha, n - 1)
    if config.mode == FORCED_SIZE:
        if config.cluster_size > n:
            raise ValueError(f"cluster_size={config.cluster_size} exceeds N={n}")
        return max(1, n // config.cluster_size)
    drops = -np.diff(10.0 * np.log10(g))
    k = int(np.argmax(drops))
    if drops[k] >= config.min_gap_db:
        return k + 1
    return n // 2


def select_num_clusters(alpha: int, n: int) -> int:
    if n < 2 or not 1 <= alpha <= n:
        raise ValueError(f"need 1 <= alpha <= n and n >= 2, got alpha={alpha}, n={n}")
    if alpha < n / 2:
        return alpha
    return n // 2


def group_users(n: int, kappa: int, direction: Direction = Direction.DOWNLINK) -> ClusterAssignment:
    """Stride-``kappa`` grouping: cluster j gets users j, j+kappa, j+2*kappa, ...

    Both directions use the same stride pattern. When ``n`` is not a
    multiple of ``kappa`` the first ``n % kappa`` clusters get one extra user.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if n < 2 * kappa:
        raise ValueError(f"cannot give each of {kappa} clusters 2 users out of {n}")
    return ClusterAssignment(tuple(tuple(range(j, n, kappa)) for j in range(kappa)))


GroupingStrategy = Callable[[int, int, Direction], ClusterAssignment]


def cluster_users(
    gains_sorted_desc: Sequence[float],
    config: ClusteringConfig,
    grouping: GroupingStrategy = group_users,
) -> ClusterAssignment:
    """Classify, pick the cluster count, then group with ``grouping``."""
    n = len(gains_sorted_desc)
    alpha = classify_alpha(gains_sorted_desc, config)
    kappa = select_num_clusters(alpha, n)
    return grouping(n, kappa, config.direction)


def num_combinations(n: int) -> int:
    """Size of the exhaustive clustering search space (sum of C(n, i), i >= 2)."""
    return sum(math.comb(n, i) for i in range(2, n + 1))
