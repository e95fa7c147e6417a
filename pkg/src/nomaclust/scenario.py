"""Scenario files: versioned INI text read with :mod:`configparser`.

The first non-blank line must be the header ``# nomaclust-scenario v1``.
Every section is one scenario; ``[DEFAULT]`` values are inherited by all of
them. Arrays are whitespace-separated numbers. Recognised keys::

    direction            downlink | uplink                      (required)
    gains_db             normalized channel gains, dB            (required)
    min_rate_bps         one value for everyone, or one per user (100000)
    cluster_mode         largest_gap | explicit | forced_size    (largest_gap)
    alpha                class-A size for explicit mode
    min_gap_db           class boundary threshold                 (10)
    cluster_size         users per cluster for forced_size mode
    rbs_per_cluster      resource blocks per cluster              (cluster size)
    total_dl_power_dbm, ue_power_budget_dbm, sic_tolerance_dbm,
    rb_bandwidth_hz, total_rbs, system_bandwidth_hz               (cell defaults)
    oma_compare          yes | no                                 (yes)
    oracle_check         yes | no                                 (no)
    sweep_user           1-based user number to vary
    sweep_start_db, sweep_stop_db, sweep_step_db

Table files add ``cluster_sizes`` and the reference columns
``reference_noma_mbps`` (one per size), ``reference_oma_mbps`` and
``reference_best_size``.

Users are numbered ``UE1..UEN`` in file order and then sorted by gain;
tied gains are rejected.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from nomaclust.clustering import EXPLICIT, FORCED_SIZE, LARGEST_GAP, ClusteringConfig
from nomaclust.domain import Direction, SystemParams, dbm_to_watts

HEADER = "# nomaclust-scenario v1"
DEFAULT_MIN_RATE = 100e3

def _dbm(text: str) -> float:
    return dbm_to_watts(float(text))


_PARAM_KEYS = {
    "total_dl_power_dbm": ("total_dl_power", _dbm),
    "ue_power_budget_dbm": ("ue_power_budget", _dbm),
    "sic_tolerance_dbm": ("sic_tolerance", _dbm),
    "rb_bandwidth_hz": ("rb_bandwidth", float),
    "total_rbs": ("total_rbs", int),
    "system_bandwidth_hz": ("system_bandwidth", float),
}
_SCENARIO_KEYS = {
    "direction", "gains_db", "min_rate_bps", "cluster_mode", "alpha", "min_gap_db",
    "cluster_size", "rbs_per_cluster", "oma_compare", "oracle_check",
    "sweep_user", "sweep_start_db", "sweep_stop_db", "sweep_step_db",
} | set(_PARAM_KEYS)
TABLE_KEYS = {"cluster_sizes", "reference_noma_mbps", "reference_oma_mbps", "reference_best_size"}


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario input."""


@dataclass(frozen=True)
class SweepSpec:
    user: int
    start_db: float
    stop_db: float
    step_db: float

    def __post_init__(self):
        if self.user < 1:
            raise ScenarioError("sweep user numbers start at 1")
        if not self.step_db > 0:
            raise ScenarioError("sweep step must be positive")

    def values(self) -> np.ndarray:
        """Grid from start towards stop (either direction), stop included when hit."""
        span = self.stop_db - self.start_db
        count = int(math.floor(abs(span) / self.step_db + 1e-9)) + 1
        return self.start_db + math.copysign(self.step_db, span or 1.0) * np.arange(count)


@dataclass(frozen=True)
class Scenario:
    name: str
    direction: Direction
    gains_db: tuple[float, ...]
    min_rates: tuple[float, ...] = (DEFAULT_MIN_RATE,)
    params: SystemParams = field(default_factory=SystemParams)
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    rbs_per_cluster: int | None = None
    oma_compare: bool = True
    oracle_check: bool = False
    sweep: SweepSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "gains_db", tuple(float(g) for g in self.gains_db))
        object.__setattr__(self, "min_rates", tuple(float(r) for r in self.min_rates))
        n = len(self.gains_db)
        if n < 2:
            raise ScenarioError(f"{self.name}: need at least 2 users")
        if not all(math.isfinite(g) for g in self.gains_db):
            raise ScenarioError(f"{self.name}: gains must be finite")
        if len(set(self.gains_db)) != n:
            raise ScenarioError(f"{self.name}: tied channel gains are not allowed")
        if len(self.min_rates) not in (1, n):
            raise ScenarioError(f"{self.name}: min_rate_bps needs 1 or {n} values")
        if not all(r > 0 for r in self.min_rates):
            raise ScenarioError(f"{self.name}: minimum rates must be positive")
        if self.rbs_per_cluster is not None and self.rbs_per_cluster < 1:
            raise ScenarioError(f"{self.name}: rbs_per_cluster must be >= 1")
        if self.clustering.direction is not self.direction:
            object.__setattr__(self, "clustering", replace(self.clustering, direction=self.direction))

    @property
    def num_users(self) -> int:
        return len(self.gains_db)

    def user_min_rates(self) -> tuple[float, ...]:
        if len(self.min_rates) == 1:
            return self.min_rates * self.num_users
        return self.min_rates

    def sorted_users(self) -> list[tuple[str, float, float]]:
        """``(user_id, gain_db, min_rate)`` strongest first."""
        users = [(f"UE{k + 1}", g, r) for k, (g, r) in enumerate(zip(self.gains_db, self.user_min_rates()))]
        return sorted(users, key=lambda u: -u[1])

    def with_gain(self, user: int, gain_db: float) -> "Scenario":
        gains = list(self.gains_db)
        gains[user - 1] = gain_db
        return replace(self, gains_db=tuple(gains))


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split())
    except ValueError as exc:
        raise ScenarioError(f"bad number list {text!r}") from exc


def _number(section, key, kind=float):
    try:
        return kind(section[key])
    except ValueError as exc:
        raise ScenarioError(f"[{section.name}] {key}: bad value {section[key]!r}") from exc


def _flag(section, key, default):
    if key not in section:
        return default
    try:
        return section.getboolean(key)
    except ValueError as exc:
        raise ScenarioError(f"[{section.name}] {key}: expected yes/no") from exc


def scenario_from_section(section: configparser.SectionProxy, allow_table_keys: bool = False) -> Scenario:
    allowed = _SCENARIO_KEYS | (TABLE_KEYS if allow_table_keys else set())
    unknown = set(section) - allowed
    if unknown:
        raise ScenarioError(f"[{section.name}] unknown keys: {', '.join(sorted(unknown))}")
    for key in ("direction", "gains_db"):
        if key not in section:
            raise ScenarioError(f"[{section.name}] missing {key}")
    try:
        direction = Direction.parse(section["direction"])
    except ValueError as exc:
        raise ScenarioError(f"[{section.name}] {exc}") from exc

    overrides = {attr: _number(section, key, conv) for key, (attr, conv) in _PARAM_KEYS.items() if key in section}
    mode = section.get("cluster_mode", LARGEST_GAP)
    try:
        params = replace(SystemParams(), **overrides)
        if mode == EXPLICIT:
            clustering = ClusteringConfig.explicit(_number(section, "alpha", int), direction)
        elif mode == FORCED_SIZE:
            clustering = ClusteringConfig.forced_size(_number(section, "cluster_size", int), direction)
        elif mode == LARGEST_GAP:
            gap = _number(section, "min_gap_db") if "min_gap_db" in section else 10.0
            clustering = ClusteringConfig.largest_gap(gap, direction)
        else:
            raise ScenarioError(f"[{section.name}] unknown cluster_mode {mode!r}")
    except KeyError as exc:
        raise ScenarioError(f"[{section.name}] cluster_mode {mode} needs {exc}") from exc
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(f"[{section.name}] {exc}") from exc

    sweep = None
    sweep_keys = ("sweep_user", "sweep_start_db", "sweep_stop_db", "sweep_step_db")
    present = [k in section for k in sweep_keys]
    if any(present):
        if not all(present):
            raise ScenarioError(f"[{section.name}] sweep needs all of {', '.join(sweep_keys)}")
        sweep = SweepSpec(
            _number(section, "sweep_user", int),
            _number(section, "sweep_start_db"),
            _number(section, "sweep_stop_db"),
            _number(section, "sweep_step_db"),
        )

    rbs = section.get("rbs_per_cluster")
    return Scenario(
        name=section.name,
        direction=direction,
        gains_db=_floats(section["gains_db"]),
        min_rates=_floats(section["min_rate_bps"]) if "min_rate_bps" in section else (DEFAULT_MIN_RATE,),
        params=params,
        clustering=clustering,
        rbs_per_cluster=None if rbs in (None, "size") else _number(section, "rbs_per_cluster", int),
        oma_compare=_flag(section, "oma_compare", True),
        oracle_check=_flag(section, "oracle_check", False),
        sweep=sweep,
    )


def parse_config(text: str) -> configparser.ConfigParser:
    first = next((line.strip() for line in text.splitlines() if line.strip()), "")
    if first != HEADER:
        raise ScenarioError(f"missing header line {HEADER!r}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(str(exc)) from exc
    if not parser.sections():
        raise ScenarioError("no scenario sections")
    return parser


def parse_scenarios(text: str, allow_table_keys: bool = False) -> list[Scenario]:
    parser = parse_config(text)
    return [scenario_from_section(parser[name], allow_table_keys) for name in parser.sections()]


def load_scenarios(path: str | Path) -> list[Scenario]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    return parse_scenarios(text)
