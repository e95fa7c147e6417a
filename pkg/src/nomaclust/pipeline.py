"""End-to-end runs: cluster, allocate, report, and write CSV."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from importlib import resources
from typing import Iterable, TextIO

import numpy as np

from nomaclust.clustering import ClusteringConfig, cluster_users
from nomaclust.domain import (
    Cluster,
    Direction,
    InfeasibleClusterError,
    UserChannel,
    db_to_linear,
    watts_to_dbm,
)
from nomaclust.oracle import NoFeasiblePointError
from nomaclust.scenario import Scenario, ScenarioError, SweepSpec, parse_config, scenario_from_section
from nomaclust.throughput import AllocationReport, oma_rates, report
from nomaclust.verification import ORACLE_GRID, numeric_optimum, optimize

OK = "ok"
INFEASIBLE = "infeasible"
ORDERING = "ordering"
ORACLE_MAX_SIZE = max(ORACLE_GRID)
TABLES = {"dl": "table_dl.ini", "ul": "table_ul.ini"}


@dataclass(frozen=True)
class ClusterResult:
    index: int
    cluster: Cluster
    report: AllocationReport | None
    oma_rates: tuple[float, ...]
    violations: dict
    oracle_sum: float | None = None

    @property
    def status(self) -> str:
        return OK if self.report is not None else INFEASIBLE

    @property
    def noma_sum(self) -> float:
        return self.report.noma_sum if self.report is not None else 0.0

    @property
    def oma_sum(self) -> float:
        return float(sum(self.oma_rates))


@dataclass(frozen=True)
class ScenarioResult:
    """Per-cluster results; infeasible clusters contribute nothing to the NOMA total."""

    scenario: Scenario
    clusters: tuple[ClusterResult, ...]

    @property
    def noma_total(self) -> float:
        return float(sum(c.noma_sum for c in self.clusters))

    @property
    def oma_total(self) -> float:
        return float(sum(c.oma_sum for c in self.clusters))

    @property
    def num_infeasible(self) -> int:
        return sum(c.status == INFEASIBLE for c in self.clusters)

    def user_rates(self) -> dict[str, tuple[float | None, float]]:
        """user_id -> (NOMA rate or None when infeasible, OMA rate)."""
        out = {}
        for c in self.clusters:
            for k, user in enumerate(c.cluster.users):
                noma = c.report.rates[k] if c.report is not None else None
                out[user.user_id] = (noma, c.oma_rates[k])
        return out


def build_clusters(scenario: Scenario) -> list[Cluster]:
    users = scenario.sorted_users()
    gains = [db_to_linear(g) for _, g, _ in users]
    assignment = cluster_users(gains, scenario.clustering)
    params = scenario.params
    clusters = []
    for members in assignment.clusters:
        rbs = scenario.rbs_per_cluster or len(members)
        budget = params.cluster_power_budget(rbs) if scenario.direction is Direction.DOWNLINK else None
        channels = tuple(UserChannel(users[i][0], gains[i], users[i][2]) for i in members)
        clusters.append(Cluster(scenario.direction, channels, rbs, budget))
    return clusters


def run_scenario(scenario: Scenario, oracle: bool | None = None) -> ScenarioResult:
    """Cluster, allocate and report every cluster of ``scenario``.

    ``oracle`` overrides the scenario's ``oracle_check`` flag. The oracle
    runs only on clusters of at most ``ORACLE_MAX_SIZE`` users.
    """
    oracle = scenario.oracle_check if oracle is None else oracle
    params = scenario.params
    results = []
    for index, cluster in enumerate(build_clusters(scenario), start=1):
        oma = tuple(float(r) for r in oma_rates(cluster, params))
        try:
            alloc = optimize(cluster, params)
        except InfeasibleClusterError as exc:
            results.append(ClusterResult(index, cluster, None, oma, exc.violations))
            continue
        oracle_sum = None
        if oracle and cluster.size <= ORACLE_MAX_SIZE:
            try:
                oracle_sum = numeric_optimum(cluster, params)[1]
            except NoFeasiblePointError:
                oracle_sum = math.nan
        results.append(ClusterResult(index, cluster, report(cluster, alloc, params), oma, {}, oracle_sum))
    return ScenarioResult(scenario, tuple(results))


@dataclass(frozen=True)
class SweepPoint:
    gain_db: float
    status: str
    result: ScenarioResult | None


def sweep(scenario: Scenario, spec: SweepSpec | None = None) -> list[SweepPoint]:
    """Re-run ``scenario`` while varying one user's gain.

    The varied user must stay strictly between its neighbours in the
    original gain order; points that would reorder users are flagged and
    skipped, and the sweep carries on.
    """
    spec = spec or scenario.sweep
    if spec is None:
        raise ScenarioError(f"{scenario.name}: no sweep specification")
    if spec.user > scenario.num_users:
        raise ScenarioError(f"{scenario.name}: no user {spec.user}")
    order = [u[0] for u in scenario.sorted_users()]
    pos = order.index(f"UE{spec.user}")
    gains = dict((u[0], u[1]) for u in scenario.sorted_users())
    upper = gains[order[pos - 1]] if pos > 0 else math.inf
    lower = gains[order[pos + 1]] if pos + 1 < len(order) else -math.inf

    points = []
    for value in spec.values():
        value = round(float(value), 9)
        if not lower < value < upper:
            points.append(SweepPoint(value, ORDERING, None))
            continue
        result = run_scenario(scenario.with_gain(spec.user, value))
        status = OK if result.num_infeasible == 0 else INFEASIBLE
        points.append(SweepPoint(value, status, result))
    return points


@dataclass(frozen=True)
class TableCase:
    table: str
    scenario: Scenario
    sizes: tuple[int, ...]
    reference_noma: tuple[float, ...]
    reference_oma: float
    reference_best: int


@dataclass(frozen=True)
class TableRow:
    case: TableCase
    size: int
    result: ScenarioResult

    @property
    def reference_noma(self) -> float:
        return self.case.reference_noma[self.case.sizes.index(self.size)]

    @property
    def rel_error(self) -> float:
        ref = self.reference_noma * 1e6
        return (self.result.noma_total - ref) / ref


def load_table(key: str) -> list[TableCase]:
    """Bundled reproduction cases; ``key`` is ``"dl"`` or ``"ul"``."""
    text = (resources.files("nomaclust") / "scenarios" / TABLES[key]).read_text()
    parser = parse_config(text)
    cases = []
    for name in parser.sections():
        section = parser[name]
        scenario = scenario_from_section(section, allow_table_keys=True)
        sizes = tuple(int(x) for x in section["cluster_sizes"].split())
        ref = tuple(float(x) for x in section["reference_noma_mbps"].split())
        if len(ref) != len(sizes):
            raise ScenarioError(f"[{name}] reference_noma_mbps needs one value per cluster size")
        cases.append(
            TableCase(
                key, scenario, sizes, ref,
                float(section["reference_oma_mbps"]), int(section["reference_best_size"]),
            )
        )
    return cases


def run_table_case(case: TableCase) -> list[TableRow]:
    rows = []
    for size in case.sizes:
        clustering = ClusteringConfig.forced_size(size, case.scenario.direction)
        rows.append(TableRow(case, size, run_scenario(replace(case.scenario, clustering=clustering))))
    return rows


def best_size(rows: list[TableRow]) -> int:
    """Cluster size with the largest system NOMA throughput (first listed wins ties)."""
    return max(rows, key=lambda r: r.result.noma_total).size


def run_tables(keys: Iterable[str] = ("dl", "ul")) -> list[list[TableRow]]:
    return [run_table_case(case) for key in keys for case in load_table(key)]


# CSV emission ---------------------------------------------------------------


def _mbps(value: float | None, precision: int) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return f"{value / 1e6:.{precision}f}"


def _num(value: float, digits: int) -> str:
    return f"{value:.{digits}f}"


RUN_HEADER = [
    "scenario", "cluster", "user", "gain_db", "rbs", "signature", "status",
    "power_dbm", "noma_mbps", "oma_mbps",
]
ORACLE_HEADER = ["oracle_cluster_mbps", "oracle_rel_gap"]


def write_run_csv(results: list[ScenarioResult], out: TextIO, precision: int = 2, oracle: bool = False):
    """One row per user, then a ``total`` row per scenario."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(RUN_HEADER + (ORACLE_HEADER if oracle else []))
    for res in results:
        show_oma = res.scenario.oma_compare
        for c in res.clusters:
            extra = []
            if oracle:
                if c.oracle_sum is None or math.isnan(c.oracle_sum):
                    extra = ["", ""]
                else:
                    gap = abs(c.noma_sum - c.oracle_sum) / c.oracle_sum
                    extra = [_mbps(c.oracle_sum, precision), f"{gap:.2e}"]
            for k, user in enumerate(c.cluster.users):
                feasible = c.report is not None
                writer.writerow([
                    res.scenario.name,
                    c.index,
                    user.user_id,
                    _num(user.gain_db, 2),
                    c.cluster.rbs,
                    c.report.signature if feasible else "",
                    c.status,
                    _num(watts_to_dbm(c.report.powers[k]), 4) if feasible else "",
                    _mbps(c.report.rates[k], precision) if feasible else "",
                    _mbps(c.oma_rates[k], precision) if show_oma else "",
                ] + extra)
        status = OK if res.num_infeasible == 0 else f"{res.num_infeasible} {INFEASIBLE}"
        writer.writerow(
            [res.scenario.name, "total", "", "", "", "", status, "",
             _mbps(res.noma_total, precision), _mbps(res.oma_total, precision) if show_oma else ""]
            + (["", ""] if oracle else [])
        )


SWEEP_HEADER = [
    "scenario", "swept_user", "swept_gain_db", "status", "user", "gain_db",
    "noma_mbps", "oma_mbps", "noma_sum_mbps", "oma_sum_mbps",
]


def write_sweep_csv(scenario: Scenario, spec: SweepSpec, points: list[SweepPoint], out: TextIO, precision: int = 2):
    """Long format: one row per (sweep point, user); flagged points get one row."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    swept = f"UE{spec.user}"
    for point in points:
        head = [scenario.name, swept, _num(point.gain_db, 2), point.status]
        if point.result is None:
            writer.writerow(head + [""] * 6)
            continue
        res = point.result
        rates = res.user_rates()
        for user_id, gain_db, _ in res.scenario.sorted_users():
            noma, oma = rates[user_id]
            writer.writerow(head + [
                user_id,
                _num(gain_db, 2),
                _mbps(noma, precision),
                _mbps(oma, precision) if scenario.oma_compare else "",
                _mbps(res.noma_total, precision),
                _mbps(res.oma_total, precision) if scenario.oma_compare else "",
            ])


TABLE_HEADER = [
    "table", "case", "direction", "cluster_size", "clusters", "infeasible_clusters",
    "noma_mbps", "oma_mbps", "best_size", "reference_noma_mbps", "reference_oma_mbps",
    "reference_best_size", "noma_rel_error",
]


def write_tables_csv(cases: list[list[TableRow]], out: TextIO, precision: int = 2):
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TABLE_HEADER)
    for rows in cases:
        best = best_size(rows)
        for row in rows:
            case = row.case
            writer.writerow([
                case.table,
                case.scenario.name,
                case.scenario.direction.value,
                row.size,
                len(row.result.clusters),
                row.result.num_infeasible,
                _mbps(row.result.noma_total, precision),
                _mbps(row.result.oma_total, precision),
                best,
                f"{row.reference_noma:.2f}",
                f"{case.reference_oma:.2f}",
                case.reference_best,
                f"{row.rel_error:+.4f}",
            ])


def worst_rel_error(cases: list[list[TableRow]]) -> float:
    return float(np.max([abs(r.rel_error) for rows in cases for r in rows]))
