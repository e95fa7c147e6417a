import csv
import io
import math
from dataclasses import replace

import pytest

from nomaclust.clustering import ClusteringConfig
from nomaclust.domain import Direction
from nomaclust.pipeline import (
    INFEASIBLE,
    OK,
    ORDERING,
    best_size,
    build_clusters,
    load_table,
    run_scenario,
    run_table_case,
    sweep,
    write_run_csv,
    write_sweep_csv,
    write_tables_csv,
)
from nomaclust.scenario import HEADER, Scenario, ScenarioError, SweepSpec, parse_scenarios

CASE_1 = (40, 15, 14.5, 14, 13.5, 13, 12.5, 12, 11.5, 11, 10.5, 10)


def forced(direction, gains, size, **kw):
    return Scenario("t", direction, gains, clustering=ClusteringConfig.forced_size(size), **kw)


def test_build_clusters_stride_and_budget():
    s = forced(Direction.DOWNLINK, CASE_1, 4)
    clusters = build_clusters(s)
    assert [u.user_id for u in clusters[0].users] == ["UE1", "UE4", "UE7", "UE10"]
    assert all(c.rbs == 4 for c in clusters)
    assert clusters[0].power_budget == pytest.approx(s.params.cluster_power_budget(4))


def test_input_order_does_not_matter():
    a = run_scenario(forced(Direction.UPLINK, (30, 40, 20, 10), 2))
    b = run_scenario(forced(Direction.UPLINK, (40, 30, 20, 10), 2))
    assert a.noma_total == pytest.approx(b.noma_total, rel=1e-14)
    assert set(a.user_rates()) == {"UE1", "UE2", "UE3", "UE4"}


def test_downlink_table_case_total():
    r = run_scenario(forced(Direction.DOWNLINK, CASE_1, 4))
    assert r.num_infeasible == 0
    assert r.noma_total / 1e6 == pytest.approx(12.785, abs=0.005)
    assert r.oma_total / 1e6 == pytest.approx(8.14, abs=0.01)


def test_uplink_table_case_total():
    gains = (40, 38.5, 20, 18.5, 17, 15.5, 14, 12.5, 11, 9.5, 8, 6.5)
    r = run_scenario(forced(Direction.UPLINK, gains, 6))
    assert r.noma_total / 1e6 == pytest.approx(18.343, abs=0.005)


def test_infeasible_cluster_counts_zero():
    r = run_scenario(forced(Direction.UPLINK, (40, 0), 2, min_rates=(1e6,)))
    (c,) = r.clusters
    assert c.status == INFEASIBLE and c.report is None
    assert set(c.violations) == {"full", "rate", "sic"}
    assert r.noma_total == 0.0 and r.oma_total > 0
    assert r.user_rates()["UE2"][0] is None


def test_oracle_column():
    r = run_scenario(forced(Direction.DOWNLINK, (40, 30, 20, 10), 2), oracle=True)
    for c in r.clusters:
        assert c.oracle_sum <= c.noma_sum * (1 + 1e-9)
        assert c.oracle_sum == pytest.approx(c.noma_sum, rel=1e-6)
    big = run_scenario(forced(Direction.UPLINK, (40, 35, 30, 25, 20, 15), 6), oracle=True)
    assert big.clusters[0].oracle_sum is None


def test_sweep_flags_reordering():
    s = forced(Direction.DOWNLINK, (40, 30, 20), 3)
    points = sweep(s, SweepSpec(2, 41, 19, 1))
    status = {p.gain_db: p.status for p in points}
    assert status[41] == ORDERING and status[40] == ORDERING and status[20] == ORDERING
    assert status[39] == OK and status[21] == OK
    assert len(points) == 23


def test_sweep_requires_spec():
    with pytest.raises(ScenarioError):
        sweep(forced(Direction.DOWNLINK, (40, 30), 2))
    with pytest.raises(ScenarioError):
        sweep(forced(Direction.DOWNLINK, (40, 30), 2), SweepSpec(3, 1, 2, 1))


def test_sweep_marks_infeasible_points():
    s = forced(Direction.UPLINK, (40, 20), 2, min_rates=(1e6,))
    points = sweep(s, SweepSpec(2, 10, 0, 5))
    assert points[-1].status == INFEASIBLE


def test_run_csv_layout():
    text = f"{HEADER}\n[a]\ndirection = dl\ngains_db = 40 30 20 10\ncluster_mode = forced_size\ncluster_size = 2\n"
    (s,) = parse_scenarios(text)
    out = io.StringIO()
    write_run_csv([run_scenario(s)], out, precision=3)
    rows = list(csv.DictReader(io.StringIO(out.getvalue())))
    assert len(rows) == 5
    assert rows[-1]["cluster"] == "total" and rows[-1]["status"] == "ok"
    per_user = sum(float(r["noma_mbps"]) for r in rows[:-1])
    assert per_user == pytest.approx(float(rows[-1]["noma_mbps"]), abs=0.005)
    assert len(rows[0]["noma_mbps"].split(".")[1]) == 3


def test_run_csv_infeasible_row():
    out = io.StringIO()
    write_run_csv([run_scenario(forced(Direction.UPLINK, (40, 0), 2, min_rates=(1e6,)))], out)
    rows = list(csv.DictReader(io.StringIO(out.getvalue())))
    assert rows[0]["status"] == "infeasible" and rows[0]["noma_mbps"] == ""
    assert rows[-1]["status"] == "1 infeasible"


def test_sweep_csv_zero_length():
    s = forced(Direction.DOWNLINK, (40, 30), 2)
    spec = SweepSpec(2, 25, 25, 0.5)
    out = io.StringIO()
    write_sweep_csv(s, spec, sweep(s, spec), out)
    rows = list(csv.DictReader(io.StringIO(out.getvalue())))
    assert {r["swept_gain_db"] for r in rows} == {"25.00"}


def test_tables_bundle():
    for key, n_sizes in (("dl", 3), ("ul", 4)):
        cases = load_table(key)
        assert len(cases) == 14
        assert all(len(c.sizes) == n_sizes for c in cases)
        assert all(len(c.scenario.gains_db) == 12 for c in cases)


def test_table_case_rows_and_best_size():
    case = load_table("ul")[1]
    rows = run_table_case(case)
    assert [r.size for r in rows] == [6, 4, 3, 2]
    assert best_size(rows) == case.reference_best
    assert all(abs(r.rel_error) < 0.01 for r in rows)
    out = io.StringIO()
    write_tables_csv([rows], out)
    lines = out.getvalue().splitlines()
    assert len(lines) == 5 and lines[0].startswith("table,case,direction")


def test_best_size_first_wins_ties():
    case = load_table("dl")[0]
    rows = run_table_case(case)
    tied = [replace(rows[1], size=9), rows[1]]
    assert best_size(tied) == 9
    assert not math.isnan(rows[0].rel_error)
