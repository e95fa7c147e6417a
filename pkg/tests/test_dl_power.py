from dataclasses import replace

import numpy as np
import pytest
from hypothesis import assume, given

from nomaclust import (
    Cluster,
    Direction,
    DlBinding,
    InfeasibleClusterError,
    SystemParams,
    db_to_linear,
    dl_candidate_powers,
    dl_check_feasibility,
    dl_max_power_bound,
    dl_optimize,
)
from nomaclust.dl_power import all_signatures, dl_enumerate, dl_rate_factors
from nomaclust.domain import PowerAllocation, signature_label
from nomaclust.oracle import dl_numeric_optimum
from nomaclust.throughput import sum_rate
from explicit_forms import dl_explicit
from strategies import dl_clusters

R, S = DlBinding.RATE, DlBinding.SIC


def two_user(params, rate=1e5):
    return Cluster.build(Direction.DOWNLINK, [1e4, 10**1.5], rate, params=params)


def test_rate_factor_has_no_minus_one(params):
    c = two_user(params)
    np.testing.assert_allclose(dl_rate_factors(c, params), 2 ** (1e5 / (2 * 180e3)))


def test_two_user_rate_row(params):
    c = two_user(params)
    pt, w, g2 = c.power_budget, 2, c.gains[1]
    phi = dl_rate_factors(c, params)[1]
    p = dl_candidate_powers(c, [R], params).powers
    assert p[0] == pytest.approx(pt / phi - w * (phi - 1) / (phi * g2), rel=1e-14)
    assert p[1] == pytest.approx(pt * (phi - 1) / phi + w * (phi - 1) / (phi * g2), rel=1e-14)


def test_two_user_sic_row(params):
    c = two_user(params)
    pt, tol, g1 = c.power_budget, params.sic_tolerance, c.gains[0]
    p = dl_candidate_powers(c, [S], params).powers
    assert p == pytest.approx((pt / 2 - tol / (2 * g1), pt / 2 + tol / (2 * g1)), rel=1e-14)


def test_four_user_ideal_sic_is_geometric():
    params = SystemParams(sic_tolerance=0.0)
    c = Cluster.build(Direction.DOWNLINK, [1e4, 1e3, 1e2, 1e1], 1e5, power_budget=8.0)
    alloc = dl_candidate_powers(c, [S, S, S], params)
    assert alloc.powers == pytest.approx((1.0, 1.0, 2.0, 4.0), rel=1e-15)
    assert sum(alloc.powers) == 8.0


def test_signature_length_checked(params):
    with pytest.raises(ValueError):
        dl_candidate_powers(two_user(params), [R, R], params)


def test_uplink_cluster_rejected(params):
    c = Cluster.build(Direction.UPLINK, [1e4, 1e2], 1e5)
    with pytest.raises(ValueError):
        dl_candidate_powers(c, [R], params)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_general_form_matches_explicit_rows(m, rng):
    for _ in range(5):
        gdb = np.sort(rng.uniform(0, 50, m))[::-1]
        params = replace(SystemParams(), sic_tolerance=rng.uniform(1e-4, 1.0))
        c = Cluster.build(Direction.DOWNLINK, 10 ** (gdb / 10), list(rng.uniform(1e4, 2e6, m)), power_budget=rng.uniform(0.1, 10))
        rows = dl_explicit(m, c.power_budget, params.sic_tolerance, c.rbs, c.gains, dl_rate_factors(c, params))
        assert len(rows) == 2 ** (m - 1)
        for sig in all_signatures(m):
            got = dl_candidate_powers(c, sig, params).powers
            np.testing.assert_allclose(got, rows[signature_label(sig)], rtol=1e-11)


def test_sic_row_feasible_for_distinct_gains(params):
    c = Cluster.build(Direction.DOWNLINK, [1e4, 10**1.5], 1e5, params=params)
    alloc = dl_candidate_powers(c, [S], params)
    verdict = dl_check_feasibility(c, alloc, params)
    assert verdict.feasible, verdict.violations
    assert dl_optimize(c, params).signature == (S,)


def test_budget_too_small_gives_negative_strong_power():
    params = SystemParams()
    c = Cluster.build(Direction.DOWNLINK, [10.0, 1.0], 5e6, power_budget=0.01)
    alloc = dl_candidate_powers(c, [R], params)
    assert alloc.powers[0] < 0
    verdict = dl_check_feasibility(c, alloc, params)
    assert not verdict and any("not positive" in v for v in verdict.violations)


def test_claimed_binding_must_hold(params):
    c = two_user(params)
    alloc = dl_candidate_powers(c, [S], params)
    mislabeled = PowerAllocation(alloc.powers, (R,))
    verdict = dl_check_feasibility(c, mislabeled, params)
    assert any("should bind" in v for v in verdict.violations)


def test_budget_violation_detected(params):
    c = two_user(params)
    alloc = dl_candidate_powers(c, [S], params)
    short = PowerAllocation((alloc.powers[0] * 0.9, alloc.powers[1]), alloc.signature)
    assert any("budget" in v for v in dl_check_feasibility(c, short, params).violations)


def test_enumeration_count(params):
    c = Cluster.build(Direction.DOWNLINK, [1e4, 1e3, 1e2, 1e1], 1e5, params=params)
    assert len(dl_enumerate(c, params)) == 8


def test_infeasible_cluster_reports_every_signature():
    params = SystemParams()
    c = Cluster.build(Direction.DOWNLINK, [10.0, 1.0, 0.1], 5e6, power_budget=0.01)
    with pytest.raises(InfeasibleClusterError) as info:
        dl_optimize(c, params)
    assert set(info.value.violations) == {"RR", "RS", "SR", "SS"}
    assert all(info.value.violations.values())


def test_two_user_matches_oracle(params):
    c = two_user(params)
    alloc = dl_optimize(c, params)
    _, best = dl_numeric_optimum(c, params, grid=200, refinements=3)
    assert sum_rate(c, alloc.powers, params) == pytest.approx(best, rel=1e-6)


def test_table_cluster_sum(params):
    # 4-user clusters of the widely spread 12-user layout
    total = 0.0
    for gains in ([40, 31, 22, 13], [37, 28, 19, 10], [34, 25, 16, 7]):
        c = Cluster.build(Direction.DOWNLINK, [db_to_linear(x) for x in gains], 1e5, params=params)
        total += sum_rate(c, dl_optimize(c, params).powers, params)
    assert total / 1e6 == pytest.approx(22.84, abs=0.01)


def test_tiny_rates_select_all_sic(params):
    c = Cluster.build(Direction.DOWNLINK, [1e4, 1e3, 1e2, 1e1], 1.0, params=params)
    assert dl_optimize(c, params).signature == (S, S, S)


@pytest.mark.parametrize("m, pt, bound", [(2, 1.0, 0.5), (4, 8.0, 1.0), (6, 1.0, 0.03125)])
def test_max_power_bound(m, pt, bound):
    assert dl_max_power_bound(m, pt) == bound


def test_max_power_bound_rejects_single_user():
    with pytest.raises(ValueError):
        dl_max_power_bound(1, 1.0)


@given(dl_clusters())
def test_optimum_properties(cp):
    cluster, params = cp
    try:
        alloc = dl_optimize(cluster, params)
    except InfeasibleClusterError:
        assume(False)
    p = alloc.array
    assert np.all(p > 0)
    assert np.all(np.diff(p) > 0)
    assert p.sum() == pytest.approx(cluster.power_budget, rel=1e-9)
    if all(s is S for s in alloc.signature):
        assert p[0] <= dl_max_power_bound(cluster.size, cluster.power_budget)


@given(dl_clusters())
def test_exactly_one_signature_passes(cp):
    cluster, params = cp
    feasible = [c for c in dl_enumerate(cluster, params) if c.verdict]
    assert len(feasible) <= 1
