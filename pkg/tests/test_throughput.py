import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from nomaclust import Cluster, Direction, InfeasibleClusterError, dl_user_rate, ul_user_rate
from nomaclust.dl_power import dl_optimize
from nomaclust.throughput import dl_rates, oma_cluster_sum, oma_rates, report, sum_rate, ul_rates
from nomaclust.ul_power import ul_optimize
from strategies import dl_clusters, ul_clusters

B = 180e3


def spreadsheet_dl(p, g, w):
    # written out per user, no vectorization
    out = []
    for i in range(len(p)):
        interference = sum(p[j] for j in range(i)) * g[i]
        out.append(w * B * math.log2(1 + p[i] * g[i] / (interference + w)))
    return out


def spreadsheet_ul(p, g, w):
    out = []
    for i in range(len(p)):
        interference = sum(p[j] * g[j] for j in range(i + 1, len(p)))
        out.append(w * B * math.log2(1 + p[i] * g[i] / (interference + w)))
    return out


def test_dl_strongest_user_is_interference_free(params):
    c = Cluster.build(Direction.DOWNLINK, [1e4, 1e2], 1e5)
    assert dl_user_rate(c, [0.3, 0.5], 0, params) == pytest.approx(2 * B * math.log2(1 + 0.3 * 1e4 / 2))


def test_zero_power_gives_zero_rate(params):
    c = Cluster.build(Direction.DOWNLINK, [1e4, 1e2], 1e5)
    assert dl_user_rate(c, [0.0, 0.5], 0, params) == 0.0
    u = Cluster.build(Direction.UPLINK, [1e4, 1e2], 1e5)
    assert ul_user_rate(u, [0.2, 0.0], 1, params) == 0.0


def test_dl_three_user_hand_evaluation(params):
    g = [10**4, 10**2.5, 10**1.2]
    p = [0.05, 0.3, 0.8]
    c = Cluster.build(Direction.DOWNLINK, g, 1e5)
    np.testing.assert_allclose(dl_rates(c, p, params), spreadsheet_dl(p, g, 3), rtol=1e-13)


def test_ul_weakest_user_is_interference_free(params):
    c = Cluster.build(Direction.UPLINK, [1e4, 1e3, 1e2, 10.0], 1e5)
    p = [0.25, 0.2, 0.1, 0.05]
    assert ul_user_rate(c, p, 3, params) == pytest.approx(4 * B * math.log2(1 + 0.05 * 10 / 4))
    np.testing.assert_allclose(ul_rates(c, p, params), spreadsheet_ul(p, c.gains, 4), rtol=1e-13)


def test_ul_single_active_user(params):
    c = Cluster.build(Direction.UPLINK, [1e4, 1e3, 1e2], 1e5)
    rates = ul_rates(c, [0.0, 0.2, 0.0], params)
    assert rates[0] == 0.0 and rates[2] == 0.0
    assert rates[1] == pytest.approx(3 * B * math.log2(1 + 0.2 * 1e3 / 3))


def test_ul_sum_rate_telescopes(params):
    c = Cluster.build(Direction.UPLINK, [1e4, 1e3, 1e2, 10.0], 1e5)
    p = np.array([0.25, 0.2, 0.1, 0.05])
    expected = 4 * B * math.log2(1 + p @ c.gains / 4)
    assert sum_rate(c, p, params) == pytest.approx(expected, rel=1e-13)


def test_oma_two_user_downlink(params):
    c = Cluster.build(Direction.DOWNLINK, [1e4, 10**1.5], 1e5, params=params)
    half = c.power_budget / 2
    expected = [B * math.log2(1 + half * g) for g in c.gains]
    np.testing.assert_allclose(oma_rates(c, params), expected, rtol=1e-13)


def test_oma_uplink_uses_full_power_on_share(params):
    c = Cluster.build(Direction.UPLINK, [1e4, 1e2, 1e1], 1e5, rbs=6)
    share = 2.0
    expected = [share * B * math.log2(1 + params.ue_power_budget * g / share) for g in c.gains]
    np.testing.assert_allclose(oma_rates(c, params), expected, rtol=1e-13)
    assert oma_cluster_sum(c, params) == pytest.approx(sum(expected))


def test_oma_vanishes_with_gain(params):
    c = Cluster.build(Direction.DOWNLINK, [1e-6, 1e-9], 1e5, params=params)
    assert oma_cluster_sum(c, params) < 1.0


@given(
    st.lists(st.floats(1e-3, 5.0), min_size=3, max_size=3),
    st.integers(0, 2),
    st.floats(1.01, 2.0),
)
def test_dl_rate_monotonicity(p, k, factor):
    c = Cluster.build(Direction.DOWNLINK, [1e4, 1e2, 1e1], 1e5)
    base = dl_rates(c, p)
    bumped = list(p)
    bumped[k] *= factor
    after = dl_rates(c, bumped)
    assert after[k] > base[k]
    assert np.all(after[k + 1 :] < base[k + 1 :])
    np.testing.assert_array_equal(after[:k], base[:k])


@given(
    st.lists(st.floats(1e-3, 0.25), min_size=3, max_size=3),
    st.integers(0, 2),
    st.floats(1.01, 2.0),
)
def test_ul_rate_monotonicity(p, k, factor):
    c = Cluster.build(Direction.UPLINK, [1e4, 1e2, 1e1], 1e5)
    base = ul_rates(c, p)
    bumped = list(p)
    bumped[k] *= factor
    after = ul_rates(c, bumped)
    assert after[k] > base[k]
    assert np.all(after[:k] < base[:k])
    np.testing.assert_array_equal(after[k + 1 :], base[k + 1 :])


@given(dl_clusters())
def test_dl_optimum_meets_min_rates(cp):
    cluster, params = cp
    try:
        alloc = dl_optimize(cluster, params)
    except InfeasibleClusterError:
        assume(False)
    rates = dl_rates(cluster, alloc.powers, params)
    assert np.all(rates >= cluster.min_rates * (1 - 1e-9))
    for k, flag in enumerate(alloc.signature, start=1):
        if flag.code == "R":
            assert rates[k] == pytest.approx(cluster.min_rates[k], rel=1e-9)


@given(ul_clusters())
def test_ul_optimum_meets_min_rates(cp):
    cluster, params = cp
    try:
        alloc = ul_optimize(cluster, params)
    except InfeasibleClusterError:
        assume(False)
    rates = ul_rates(cluster, alloc.powers, params)
    assert np.all(rates >= cluster.min_rates * (1 - 1e-9))
    if alloc.label == "rate":
        assert rates[-2] == pytest.approx(cluster.min_rates[-2], rel=1e-9)


def test_report_fields(params):
    c = Cluster.build(Direction.DOWNLINK, [1e4, 10**2.5, 10**1.2], 1e5, params=params)
    alloc = dl_optimize(c, params)
    r = report(c, alloc, params)
    assert r.size == 3 and r.user_ids == ("UE1", "UE2", "UE3")
    assert r.noma_sum == sum(r.rates)
    assert r.oma_sum == pytest.approx(sum(r.oma_rates))
    assert r.gains_db[0] == pytest.approx(40.0)
    assert r.signature == alloc.label and r.rbs == 3


def test_report_uplink(params):
    c = Cluster.build(Direction.UPLINK, [1e4, 1e2], 1e5)
    r = report(c, ul_optimize(c, params), params)
    assert r.signature == "full"
    assert r.noma_sum == pytest.approx(sum_rate(c, r.powers, params))
