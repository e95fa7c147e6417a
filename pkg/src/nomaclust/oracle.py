"""Independent numerical checks for the closed-form allocations.

Two tools, neither of which reuses the closed-form machinery:

* grid search with local refinement over the raw powers, evaluating the
  rate formulas and constraints directly (a lower bound on the optimum);
* recovery of the Lagrange multipliers implied by a claimed binding
  signature, by solving the stationarity equations, followed by sign and
  complementary-slackness checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from nomaclust.domain import Cluster, Direction, DlBinding, PowerAllocation, SystemParams, UlVariant

DEFAULT_GRID = 200
DEFAULT_REFINEMENTS = 3
REFINE_FACTOR = 10.0
CHUNK = 1 << 18


class NoFeasiblePointError(Exception):
    """The search grid contains no point satisfying every constraint."""


class SingularSystemError(Exception):
    """Stationarity equations for the claimed signature have no unique solution."""


def _dl_eval(cluster: Cluster, params: SystemParams, free: np.ndarray):
    """Sum rate of each row of free powers (P_1..P_{m-1}), -inf where infeasible."""
    p_t = cluster.power_budget
    g = cluster.gains
    w = cluster.rbs
    p = np.column_stack((free, p_t - free.sum(axis=1)))
    before = np.cumsum(p, axis=1) - p
    # cheap linear conditions first; logs only for the survivors
    ok = np.all(p > 0, axis=1)
    ok &= np.all((p[:, 1:] - before[:, 1:]) * g[:-1] >= params.sic_tolerance, axis=1)
    out = np.full(p.shape[0], -np.inf)
    keep = np.flatnonzero(ok)
    pk, bk = p[keep], before[keep]
    rates = w * params.rb_bandwidth * np.log2(1.0 + pk * g / (bk * g + w))
    good = np.all(rates >= cluster.min_rates, axis=1)
    out[keep[good]] = rates[good].sum(axis=1)
    return out, p


def _ul_eval(cluster: Cluster, params: SystemParams, p: np.ndarray):
    g = cluster.gains
    w = cluster.rbs
    rx = p * g
    weaker = rx[:, ::-1].cumsum(axis=1)[:, ::-1] - rx
    ok = np.all(p > 0, axis=1) & np.all(p <= params.ue_power_budget, axis=1)
    ok &= np.all(rx[:, :-1] - weaker[:, :-1] >= params.sic_tolerance, axis=1)
    out = np.full(p.shape[0], -np.inf)
    keep = np.flatnonzero(ok)
    rates = w * params.rb_bandwidth * np.log2(1.0 + rx[keep] / (weaker[keep] + w))
    good = np.all(rates >= cluster.min_rates, axis=1)
    out[keep[good]] = rates[good].sum(axis=1)
    return out, p


def _grid_search(evaluate, lo, hi, grid, refinements, bounds, max_moves=20):
    """Maximize ``evaluate`` on a box grid, then zoom in around the best point.

    Each refinement shrinks the box by ``REFINE_FACTOR`` around the incumbent,
    clipped to ``bounds``. If the incumbent sits on an edge of the current box
    (the optimum may lie outside it) the box is re-centred at the same width
    first, at most ``max_moves`` times per refinement. Ties go to the
    lexicographically smallest grid index, so chunking does not matter.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    b_lo, b_hi = (np.asarray(b, dtype=float) for b in bounds)
    dims = lo.size
    best_val, best_p, best_x = -np.inf, None, None
    width = hi - lo
    rounds = moves = 0
    while True:
        axes = [np.linspace(lo[k], hi[k], grid) for k in range(dims)]
        total = grid**dims
        on_edge = False
        for start in range(0, total, CHUNK):
            idx = np.arange(start, min(start + CHUNK, total))
            coords = np.unravel_index(idx, (grid,) * dims)
            x = np.column_stack([axes[k][coords[k]] for k in range(dims)])
            vals, p = evaluate(x)
            k = int(np.argmax(vals))
            if vals[k] > best_val:
                best_val, best_p, best_x = float(vals[k]), p[k].copy(), x[k].copy()
                c = [coords[d][k] for d in range(dims)]
                on_edge = any(
                    (c[d] == 0 and lo[d] > b_lo[d]) or (c[d] == grid - 1 and hi[d] < b_hi[d])
                    for d in range(dims)
                )
        if best_x is None:
            raise NoFeasiblePointError("no feasible grid point")
        if on_edge and moves < max_moves:
            moves += 1
        elif rounds < refinements:
            rounds += 1
            moves = 0
            width = width / REFINE_FACTOR
        else:
            break
        lo = np.maximum(best_x - width / 2, b_lo)
        hi = np.minimum(best_x + width / 2, b_hi)
    return best_p, best_val


def dl_numeric_optimum(
    cluster: Cluster,
    params: SystemParams,
    grid: int = DEFAULT_GRID,
    refinements: int = DEFAULT_REFINEMENTS,
) -> tuple[np.ndarray, float]:
    """Best feasible downlink allocation found by refined grid search.

    The budget is spent in full: the search runs over P_1..P_{m-1} in
    ``[0, P_t]`` and the weakest user takes the remainder.
    """
    if cluster.direction is not Direction.DOWNLINK:
        raise ValueError("expected a downlink cluster")
    if grid < 2:
        raise ValueError("grid must be >= 2")
    d = cluster.size - 1
    p_t = cluster.power_budget
    return _grid_search(
        lambda x: _dl_eval(cluster, params, x),
        [0.0] * d,
        [p_t] * d,
        grid,
        refinements,
        ([0.0] * d, [p_t] * d),
    )


def ul_numeric_optimum(
    cluster: Cluster,
    params: SystemParams,
    grid: int = DEFAULT_GRID,
    refinements: int = DEFAULT_REFINEMENTS,
    coarse_grid: int = 16,
) -> tuple[np.ndarray, float]:
    """Best feasible uplink allocation found by grid search.

    A fine refined search over the weakest user's power (others at full
    budget) is combined with a coarse search over the full power box, so a
    better point off the full-power structure would still be found.
    """
    if cluster.direction is not Direction.UPLINK:
        raise ValueError("expected an uplink cluster")
    m = cluster.size
    p_max = params.ue_power_budget
    results = []

    def weakest_only(x):
        p = np.column_stack([np.full((x.shape[0], m - 1), p_max), x])
        return _ul_eval(cluster, params, p)

    try:
        results.append(_grid_search(weakest_only, [0.0], [p_max], grid, refinements, ([0.0], [p_max])))
    except NoFeasiblePointError:
        pass
    try:
        results.append(
            _grid_search(
                lambda x: _ul_eval(cluster, params, x),
                [0.0] * m,
                [p_max] * m,
                coarse_grid,
                0,
                ([0.0] * m, [p_max] * m),
            )
        )
    except NoFeasiblePointError:
        pass
    if not results:
        raise NoFeasiblePointError("no feasible grid point")
    # first result wins ties
    return max(results, key=lambda r: r[1])


# --- multiplier recovery ----------------------------------------------------


@dataclass(frozen=True)
class KKTReport:
    """Recovered multipliers (bits/s per unit of constraint) and residuals.

    ``slackness`` holds, per active constraint, its value relative to the
    magnitude of its terms; it should vanish when the constraint binds.
    """

    multipliers: dict[str, float]
    slackness: dict[str, float]
    stationarity: float
    multiplier_tol: float = 1e-8
    slackness_tol: float = 1e-8
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems


def _dl_gradient(cluster: Cluster, p: np.ndarray, params: SystemParams) -> np.ndarray:
    g = cluster.gains
    w = cluster.rbs
    s = np.cumsum(p)
    s_prev = s - p
    coef = w * params.rb_bandwidth / math.log(2.0)
    grad = np.empty(cluster.size)
    for k in range(cluster.size):
        up = np.sum(g[k:] / (s[k:] * g[k:] + w))
        down = np.sum(g[k + 1 :] / (s_prev[k + 1 :] * g[k + 1 :] + w))
        grad[k] = coef * (up - down)
    return grad


def _ul_gradient(cluster: Cluster, p: np.ndarray, params: SystemParams) -> np.ndarray:
    g = cluster.gains
    w = cluster.rbs
    return w * params.rb_bandwidth * g / (math.log(2.0) * (np.dot(p, g) + w))


def _dl_constraints(cluster: Cluster, p: np.ndarray, params: SystemParams, sig):
    """(name, value, scale, gradient) of each active downlink constraint."""
    m = cluster.size
    g = cluster.gains
    w = cluster.rbs
    phi = 2.0 ** (cluster.min_rates / (w * params.rb_bandwidth))
    p_t = cluster.power_budget
    p_tol = params.sic_tolerance
    out = [("lambda", p_t - p.sum(), p_t, -np.ones(m))]
    for i in range(1, m):
        before = p[:i].sum()
        grad = np.zeros(m)
        if sig[i - 1] is DlBinding.RATE:
            interference = (before * g[i] + w) * (phi[i] - 1.0)
            grad[i] = g[i]
            grad[:i] = -(phi[i] - 1.0) * g[i]
            out.append((f"mu{i + 1}", p[i] * g[i] - interference, abs(p[i] * g[i]) + abs(interference), grad))
        else:
            grad[i] = g[i - 1]
            grad[:i] = -g[i - 1]
            value = (p[i] - before) * g[i - 1] - p_tol
            scale = (abs(p[i]) + abs(before)) * g[i - 1] + p_tol
            out.append((f"psi{i + 1}", value, scale, grad))
    return out


def _ul_constraints(cluster: Cluster, p: np.ndarray, params: SystemParams, variant):
    m = cluster.size
    g = cluster.gains
    w = cluster.rbs
    p_max = params.ue_power_budget
    out = []
    last = m if variant is UlVariant.ALL_FULL_POWER else m - 1
    for i in range(last):
        grad = np.zeros(m)
        grad[i] = -1.0
        out.append((f"lambda{i + 1}", p_max - p[i], p_max, grad))
    if variant is UlVariant.ALL_FULL_POWER:
        return out
    i = m - 2
    grad = np.zeros(m)
    grad[i] = g[i]
    rx_weaker = p[i + 1 :] @ g[i + 1 :]
    if variant is UlVariant.RATE_CONTROLLED:
        phi = 2.0 ** (cluster.min_rates[i] / (w * params.rb_bandwidth)) - 1.0
        grad[i + 1 :] = -phi * g[i + 1 :]
        value = p[i] * g[i] - phi * (rx_weaker + w)
        scale = abs(p[i] * g[i]) + phi * (abs(rx_weaker) + w)
        out.append((f"mu{i + 1}", value, scale, grad))
    else:
        grad[i + 1 :] = -g[i + 1 :]
        value = p[i] * g[i] - rx_weaker - params.sic_tolerance
        scale = abs(p[i] * g[i]) + abs(rx_weaker) + params.sic_tolerance
        out.append((f"psi{i + 1}", value, scale, grad))
    return out


def kkt_residuals(
    cluster: Cluster,
    alloc: PowerAllocation,
    params: SystemParams,
    direction: Direction | None = None,
) -> KKTReport:
    """Solve stationarity for the multipliers of the signature's active set.

    With all powers positive, stationarity gives one equation per user and
    the active set has exactly one multiplier per user, so the system is
    square. Raises SingularSystemError when it is rank deficient.
    """
    direction = cluster.direction if direction is None else direction
    p = alloc.array
    if direction is Direction.DOWNLINK:
        if len(alloc.signature) != cluster.size - 1:
            raise SingularSystemError(
                f"signature {alloc.label!r} gives {len(alloc.signature) + 1} equations for {cluster.size} users"
            )
        grad_f = _dl_gradient(cluster, p, params)
        active = _dl_constraints(cluster, p, params, alloc.signature)
    else:
        grad_f = _ul_gradient(cluster, p, params)
        active = _ul_constraints(cluster, p, params, UlVariant(alloc.signature))

    jac = np.column_stack([a[3] for a in active])
    if jac.shape[1] != cluster.size or np.linalg.matrix_rank(jac) < cluster.size:
        raise SingularSystemError(f"stationarity system for {alloc.label!r} is singular")
    nu = np.linalg.solve(jac, -grad_f)
    stationarity = float(np.linalg.norm(jac @ nu + grad_f) / np.linalg.norm(grad_f))

    multipliers = {a[0]: float(v) for a, v in zip(active, nu)}
    slackness = {a[0]: float(abs(a[1]) / a[2]) for a in active}
    report = KKTReport(multipliers, slackness, stationarity)
    for name, value in multipliers.items():
        if value < -report.multiplier_tol:
            report.problems.append(f"{name} = {value:.3g} is negative")
    for name, value in slackness.items():
        if value > report.slackness_tol:
            report.problems.append(f"{name} constraint not tight (rel. residual {value:.3g})")
    if stationarity > report.slackness_tol:
        report.problems.append(f"stationarity residual {stationarity:.3g}")
    return report
