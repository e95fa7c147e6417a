"""Value types shared by every module, plus dB/linear conversions.

All arithmetic inside the package runs in linear units (watts, linear gain
ratios, hertz, bits/s). dB and dBm appear only at the ingestion and
emission boundary.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np


def dbm_to_watts(p_dbm: float) -> float:
    """Convert absolute power in dBm to watts."""
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_w: float) -> float:
    return 10.0 * math.log10(p_w) + 30.0


def db_to_linear(g_db: float) -> float:
    """Convert a power ratio in dB to a linear ratio."""
    return 10.0 ** (g_db / 10.0)


def linear_to_db(g: float) -> float:
    return 10.0 * math.log10(g)


class Direction(enum.Enum):
    DOWNLINK = "downlink"
    UPLINK = "uplink"

    @classmethod
    def parse(cls, text: str) -> "Direction":
        key = text.strip().lower()
        aliases = {"dl": "downlink", "ul": "uplink"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown direction {text!r}") from None


class DlBinding(enum.IntEnum):
    """Which constraint of a downlink user (index >= 2) holds with equality."""

    RATE = 0
    SIC = 1

    @property
    def code(self) -> str:
        return "R" if self is DlBinding.RATE else "S"


class UlVariant(enum.IntEnum):
    """The three uplink candidate solutions; only the weakest user is controlled."""

    ALL_FULL_POWER = 0
    RATE_CONTROLLED = 1
    SIC_CONTROLLED = 2

    @property
    def code(self) -> str:
        return {0: "full", 1: "rate", 2: "sic"}[int(self)]


# Downlink: one flag per user 2..m. Uplink: exactly one variant.
BindingSignature = Union[tuple[DlBinding, ...], UlVariant]


def signature_label(sig: BindingSignature) -> str:
    """Compact text form, e.g. ``"RSR"`` for downlink or ``"rate"`` for uplink."""
    if isinstance(sig, UlVariant):
        return sig.code
    return "".join(flag.code for flag in sig)


class InfeasibleClusterError(Exception):
    """No candidate allocation satisfies the cluster's rate and SIC constraints.

    ``violations`` maps each candidate signature label to the list of
    conditions it broke.
    """

    def __init__(self, message: str, violations: dict[str, list[str]] | None = None):
        super().__init__(message)
        self.violations = violations or {}


@dataclass(frozen=True)
class SystemParams:
    """Cell-wide parameters. Defaults are the simulation values of the model cell.

    ``system_bandwidth`` is stored but never used in computation; the
    per-RB bandwidth and the RB count are treated as ground truth.
    """

    total_dl_power: float = dbm_to_watts(46.0)
    ue_power_budget: float = dbm_to_watts(24.0)
    sic_tolerance: float = dbm_to_watts(10.0)
    rb_bandwidth: float = 180e3
    total_rbs: int = 100
    system_bandwidth: float = 20e6

    def __post_init__(self):
        for name in ("total_dl_power", "ue_power_budget", "rb_bandwidth", "system_bandwidth"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        # zero is allowed so the ideal-SIC limit can be evaluated
        if not (math.isfinite(self.sic_tolerance) and self.sic_tolerance >= 0):
            raise ValueError(f"sic_tolerance must be >= 0, got {self.sic_tolerance}")
        if int(self.total_rbs) != self.total_rbs or self.total_rbs < 1:
            raise ValueError(f"total_rbs must be a positive integer, got {self.total_rbs}")

    def cluster_power_budget(self, rbs: int) -> float:
        """Downlink budget of a cluster on ``rbs`` blocks (uniform split over the RBs)."""
        return self.total_dl_power * rbs / self.total_rbs


@dataclass(frozen=True)
class UserChannel:
    user_id: str
    gain: float
    min_rate: float

    def __post_init__(self):
        if not (math.isfinite(self.gain) and self.gain > 0):
            raise ValueError(f"user {self.user_id}: gain must be > 0, got {self.gain}")
        if not (math.isfinite(self.min_rate) and self.min_rate > 0):
            raise ValueError(f"user {self.user_id}: min_rate must be > 0, got {self.min_rate}")

    @property
    def gain_db(self) -> float:
        return linear_to_db(self.gain)


@dataclass(frozen=True)
class Cluster:
    """Users sharing ``rbs`` resource blocks, strongest channel first.

    Gains must be strictly descending; ties and unsorted input are rejected
    rather than silently reordered. ``power_budget`` is the downlink cluster
    budget and is ignored for uplink clusters.
    """

    direction: Direction
    users: tuple[UserChannel, ...]
    rbs: int
    power_budget: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        if len(self.users) < 2:
            raise ValueError(f"a cluster needs at least 2 users, got {len(self.users)}")
        if int(self.rbs) != self.rbs or self.rbs < 1:
            raise ValueError(f"rbs must be a positive integer, got {self.rbs}")
        for a, b in zip(self.users, self.users[1:]):
            if not a.gain > b.gain:
                raise ValueError(
                    f"gains must be strictly descending: {a.user_id} ({a.gain}) "
                    f"then {b.user_id} ({b.gain})"
                )
        if self.direction is Direction.DOWNLINK:
            if self.power_budget is None or not self.power_budget > 0:
                raise ValueError("downlink clusters need a positive power_budget")

    @classmethod
    def build(
        cls,
        direction: Direction,
        gains: Sequence[float],
        min_rates: float | Sequence[float],
        rbs: int | None = None,
        power_budget: float | None = None,
        params: SystemParams | None = None,
    ) -> "Cluster":
        """Convenience constructor from linear gains.

        ``rbs`` defaults to the cluster size. A downlink budget left as None
        is derived from ``params`` (default cell parameters).
        """
        if np.ndim(min_rates) == 0:
            min_rates = [float(min_rates)] * len(gains)
        if len(min_rates) != len(gains):
            raise ValueError("min_rates must be a scalar or match gains in length")
        rbs = len(gains) if rbs is None else rbs
        if direction is Direction.DOWNLINK and power_budget is None:
            power_budget = (params or SystemParams()).cluster_power_budget(rbs)
        users = tuple(
            UserChannel(f"UE{k + 1}", float(g), float(r))
            for k, (g, r) in enumerate(zip(gains, min_rates))
        )
        return cls(direction, users, rbs, power_budget)

    @property
    def size(self) -> int:
        return len(self.users)

    @property
    def gains(self) -> np.ndarray:
        return np.array([u.gain for u in self.users])

    @property
    def min_rates(self) -> np.ndarray:
        return np.array([u.min_rate for u in self.users])


@dataclass(frozen=True)
class PowerAllocation:
    """Transmit powers in cluster order, with the signature that produced them."""

    powers: tuple[float, ...]
    signature: BindingSignature

    def __post_init__(self):
        object.__setattr__(self, "powers", tuple(float(p) for p in self.powers))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.powers)

    @property
    def label(self) -> str:
        return signature_label(self.signature)


@dataclass(frozen=True)
class Feasibility:
    """Verdict of a feasibility check; falsy when any condition is violated."""

    violations: tuple[str, ...] = field(default_factory=tuple)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.feasible
