import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import solve_banded

from flowexec.myopic import (
    InventoryRisk,
    information_cost_O,
    leakage_profile_A,
    myopic_solve,
    myopic_value,
    optimal_initial_imbalance,
)
from flowexec.ou_flow import FlowParams


@pytest.fixture
def params():
    return FlowParams(beta=0.05, sigma=0.14, kappa=10.0, eta=0.05)


# --- independent discretized calculus-of-variations oracle -----------------

def cov_oracle(risk: InventoryRisk, x: float, T: float, n: int = 10_000):
    """Minimize sum((dx/h)^2 h + lambda(x) h) over an n-point grid.

    Interior optimality gives a tridiagonal system; for linear risk with the
    positivity constraint, the liquidation endpoint is found by ternary
    search over the grid (the cost is unimodal in the endpoint).
    """
    h = T / n

    def solve_fixed_end(k_end, lam_quad, lam_lin):
        # Stationarity at interior node k (after dividing by 2):
        #   x_k (2/h + lam_quad h) - x_{k-1}/h - x_{k+1}/h + lam_lin h / 2 = 0,
        # with x_0 = x and x_{k_end} = 0.
        m = k_end - 1
        if m <= 0:
            return np.array([x, 0.0])
        diag = np.full(m, 2.0 / h + lam_quad * h)
        off = np.full(m, -1.0 / h)
        ab = np.zeros((3, m))
        ab[0, 1:] = off[:-1]
        ab[1] = diag
        ab[2, :-1] = off[:-1]
        rhs = np.full(m, -lam_lin * h / 2.0)
        rhs[0] += x / h
        sol = solve_banded((1, 1), ab, rhs)
        return np.concatenate(([x], sol, [0.0]))

    def total_cost(xs, k_end):
        kinetic = np.sum(np.diff(xs) ** 2) / h
        lam = risk.penalty(xs)
        # trapezoid on the running penalty, zero beyond liquidation
        run = h * (np.sum(lam) - 0.5 * lam[0] - 0.5 * lam[-1])
        if risk.kind == "constant":
            run = risk.c * T  # accrues to T regardless of the curve
        return kinetic + run

    lam_quad = risk.c if risk.kind == "quadratic" else 0.0
    lam_lin = risk.c if risk.kind == "linear" else 0.0

    if risk.kind != "linear":
        xs = solve_fixed_end(n, lam_quad, lam_lin)
        return total_cost(xs, n), xs

    # positivity constraint: pick the best liquidation node
    def cost_at(k_end):
        xs = solve_fixed_end(k_end, lam_quad, lam_lin)
        if np.any(xs < -1e-12):
            return np.inf, xs
        return total_cost(xs, k_end), xs

    lo, hi = 2, n
    while hi - lo > 2:
        m1 = lo + (hi - lo) // 3
        m2 = hi - (hi - lo) // 3
        if cost_at(m1)[0] <= cost_at(m2)[0]:
            hi = m2
        else:
            lo = m1
    best = min(range(lo, hi + 1), key=lambda k: cost_at(k)[0])
    c, xs = cost_at(best)
    full = np.concatenate((xs, np.zeros(n + 1 - len(xs))))
    return c, full


def test_ml_trivial():
    sol = myopic_solve(InventoryRisk.zero(), 3.0, 3.0)
    assert sol.kind == "ML"
    assert float(sol.rate(1.0)) == pytest.approx(1.0)
    assert sol.impact_cost == pytest.approx(3.0)
    assert sol.effective_horizon == 3.0


def test_mq_early_liquidation_time():
    sol = myopic_solve(InventoryRisk.linear(2.0), 3.0, 3.0)
    assert sol.effective_horizon == pytest.approx(2.0 * math.sqrt(3.0) / math.sqrt(2.0), rel=1e-12)
    assert sol.effective_horizon == pytest.approx(2.45, abs=0.005)
    t = np.linspace(0, 3, 301)
    xs = sol.trajectory(t)
    assert np.all(xs[t >= sol.effective_horizon] == 0.0)


@pytest.mark.parametrize(
    "risk,T",
    [
        (InventoryRisk.zero(), 3.0),
        (InventoryRisk.quadratic(2.0), 3.0),
        (InventoryRisk.quadratic(0.1), 5.0),
        (InventoryRisk.linear(2.0), 3.0),   # constrained regime T_hat < T
        (InventoryRisk.linear(2.0), 2.0),   # unconstrained regime T_hat = T
        (InventoryRisk.constant(0.1), 3.0),
    ],
)
def test_impact_cost_vs_cov_oracle(risk, T):
    x = 3.0
    sol = myopic_solve(risk, x, T)
    cost, xs = cov_oracle(risk, x, T)
    assert sol.impact_cost == pytest.approx(cost, rel=1e-4)
    # trajectory agreement on the grid
    t = np.linspace(0, T, len(xs))
    np.testing.assert_allclose(sol.trajectory(t), xs, atol=2e-4 * x)


def test_mh_frozen_value():
    sol = myopic_solve(InventoryRisk.quadratic(2.0), 3.0, 3.0)
    expected = math.sqrt(2.0) * 9.0 / math.tanh(3.0 * math.sqrt(2.0))
    assert sol.impact_cost == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(12.733, abs=5e-4)


@pytest.mark.parametrize("risk", [InventoryRisk.zero(), InventoryRisk.quadratic(2.0),
                                  InventoryRisk.linear(2.0)])
def test_trajectory_structure(risk):
    sol = myopic_solve(risk, 3.0, 3.0)
    t = np.linspace(0, 3, 2001)
    xs = sol.trajectory(t)
    rates = sol.rate(t)
    assert np.all(np.diff(xs) <= 1e-12)
    assert np.all(rates >= -1e-12)
    assert xs[0] == pytest.approx(3.0)
    assert abs(float(sol.trajectory(sol.effective_horizon))) < 1e-9
    # rate integrates back to the full inventory
    total, _ = quad(lambda s: float(sol.rate(s)), 0.0, sol.effective_horizon,
                    epsabs=1e-10, limit=200)
    assert total == pytest.approx(3.0, abs=1e-8)


def test_rate_integrates_to_inventory_quadrature():
    for risk in (InventoryRisk.quadratic(0.7), InventoryRisk.linear(1.3)):
        sol = myopic_solve(risk, 2.0, 4.0)
        val, _ = quad(lambda s: float(sol.rate(s)), 0.0, sol.effective_horizon,
                      epsabs=1e-10, limit=200)
        assert val == pytest.approx(2.0, abs=1e-8)


def test_large_horizon_limits():
    x = 3.0
    assert myopic_solve(InventoryRisk.zero(), x, 1e6).impact_cost == pytest.approx(0.0, abs=1e-5)
    c = 0.4
    mh = myopic_solve(InventoryRisk.quadratic(c), x, 1e3)
    assert mh.impact_cost == pytest.approx(math.sqrt(c) * x * x, rel=1e-10)
    mq = myopic_solve(InventoryRisk.linear(c), x, 1e3)
    assert mq.impact_cost == pytest.approx(4.0 / 3.0 * x**1.5 * math.sqrt(c), rel=1e-12)
    # T-independence once T_hat < T
    mq2 = myopic_solve(InventoryRisk.linear(c), x, 50.0)
    assert mq.impact_cost == pytest.approx(mq2.impact_cost, rel=1e-12)


def a_quadrature(kind, t, x, T, c, params):
    risk = {"ML": InventoryRisk.zero(), "MQ": InventoryRisk.linear(c),
            "MH": InventoryRisk.quadratic(c)}[kind]
    sol = myopic_solve(risk, x, T)
    pts = [sol.effective_horizon] if (kind == "MQ" and t > sol.effective_horizon) else None
    val, _ = quad(lambda s: math.exp(-params.beta * (t - s)) * params.eta * float(sol.rate(s)),
                  0.0, t, epsabs=1e-12, limit=200, points=pts)
    return val


def test_leakage_profile_zero_at_origin(params):
    for kind, c in (("ML", 0.0), ("MQ", 2.0), ("MH", 2.0)):
        assert float(leakage_profile_A(kind, 0.0, 3.0, 3.0, c, params)) == pytest.approx(0.0, abs=1e-15)


def test_leakage_profile_ml_frozen(params):
    val = float(leakage_profile_A("ML", 3.0, 3.0, 3.0, 0.0, params))
    assert val == pytest.approx(1.0 - math.exp(-0.15), rel=1e-12)
    assert val == pytest.approx(0.139292, abs=5e-7)


@pytest.mark.parametrize("kind,c", [("ML", 0.0), ("MQ", 2.0), ("MQ", 0.3),
                                    ("MH", 2.0), ("MH", 0.1)])
def test_leakage_profile_matches_quadrature(kind, c, params):
    for t in (0.3, 1.1, 2.45, 2.9):
        closed = float(leakage_profile_A(kind, t, 3.0, 3.0, c, params))
        assert closed >= 0.0
        assert closed == pytest.approx(a_quadrature(kind, t, 3.0, 3.0, c, params), abs=1e-10)


def test_leakage_profile_mh_degenerate_switch(params):
    # sqrt(c) == beta exactly triggers the separate closed form
    c = params.beta**2
    for t in (0.5, 1.7, 3.0):
        closed = float(leakage_profile_A("MH", t, 3.0, 3.0, c, params))
        assert closed == pytest.approx(a_quadrature("MH", t, 3.0, 3.0, c, params), abs=1e-8)


def o_quadrature(kind, T, x, y, c, params):
    def f(t):
        a_t = float(leakage_profile_A(kind, t, x, T, c, params)) if kind else 0.0
        mu = y * math.exp(-params.beta * t) - a_t
        return mu * mu + params.stationary_variance * -math.expm1(-2.0 * params.beta * t)

    pts = None
    if kind == "MQ":
        t_hat = min(T, 2.0 * math.sqrt(x / c))
        if t_hat < T:
            pts = [t_hat]
    val, _ = quad(f, 0.0, T, epsabs=1e-12, limit=400, points=pts)
    return params.kappa * val


def test_information_cost_zero_kappa():
    p = FlowParams(beta=0.05, sigma=0.14, kappa=0.0, eta=0.05)
    assert information_cost_O("ML", 3.0, 3.0, 0.5, 0.0, p) == 0.0


def test_information_cost_zero_leakage_frozen(params):
    val = information_cost_O(None, 3.0, 3.0, 0.0, 0.0, params)
    assert val == pytest.approx(19.6 * (0.3 + math.exp(-0.3) - 1.0), rel=1e-12)
    assert val == pytest.approx(0.80004, abs=5e-6)


@pytest.mark.parametrize("kind,c,y", [(None, 0.0, -0.5), (None, 0.0, 0.8),
                                      ("ML", 0.0, 0.0), ("ML", 0.0, -0.4),
                                      ("MQ", 2.0, 0.3), ("MH", 0.1, -0.2)])
def test_information_cost_vs_quadrature(kind, c, y, params):
    got = information_cost_O(kind, 3.0, 3.0, y, c, params)
    assert got == pytest.approx(o_quadrature(kind, 3.0, 3.0, y, c, params), abs=1e-8)


def test_myopic_value_composition(params):
    p0 = FlowParams(beta=0.05, sigma=0.14, kappa=0.0, eta=0.05)
    assert myopic_value(InventoryRisk.zero(), 3.0, 3.0, 0.2, p0) == pytest.approx(3.0)
    # x = 0: the cost of sitting in the market
    assert myopic_value(InventoryRisk.zero(), 3.0, 0.0, 0.1, params) == pytest.approx(
        information_cost_O(None, 3.0, 0.0, 0.1, 0.0, params))
    v = myopic_value(InventoryRisk.quadratic(0.1), 3.0, 3.0, 0.0, params)
    assert np.isfinite(v) and v > 0


def test_myopic_value_quadratic_in_y(params):
    ys = np.array([-0.4, 0.05, 0.65])
    risk = InventoryRisk.quadratic(0.1)
    vals = [myopic_value(risk, 3.0, 3.0, y, params) for y in ys]
    coeffs = np.polyfit(ys, vals, 2)
    lead = params.kappa * -math.expm1(-2 * params.beta * 3.0) / (2 * params.beta)
    assert coeffs[0] == pytest.approx(lead, rel=1e-9)
    # a fourth evaluation falls on the same parabola
    y4 = 0.3
    assert np.polyval(coeffs, y4) == pytest.approx(myopic_value(risk, 3.0, 3.0, y4, params), rel=1e-9)


def test_optimal_initial_imbalance(params):
    # no leakage -> pure quadratic in y -> minimizer 0
    p0 = FlowParams(beta=0.05, sigma=0.14, kappa=10.0, eta=0.0)
    assert optimal_initial_imbalance(InventoryRisk.zero(), 3.0, 3.0, p0) == pytest.approx(0.0, abs=1e-15)
    # with leakage the minimizer is strictly positive
    for risk in (InventoryRisk.zero(), InventoryRisk.quadratic(0.5), InventoryRisk.linear(2.0)):
        y_star = optimal_initial_imbalance(risk, 3.0, 3.0, params)
        assert y_star > 0


def test_optimal_initial_imbalance_vs_golden_section(params):
    risk = InventoryRisk.zero()
    y_star = optimal_initial_imbalance(risk, 3.0, 3.0, params)
    # golden-section oracle over y in [-1, 1]
    invphi = (math.sqrt(5) - 1) / 2
    a, b = -1.0, 1.0
    f = lambda y: myopic_value(risk, 3.0, 3.0, y, params)
    x1, x2 = b - invphi * (b - a), a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > 1e-9:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    assert y_star == pytest.approx(0.5 * (a + b), abs=1e-6)


def test_domain_errors(params):
    with pytest.raises(ValueError):
        myopic_solve(InventoryRisk.zero(), 0.0, 3.0)
    with pytest.raises(ValueError):
        myopic_solve(InventoryRisk.zero(), 3.0, -1.0)
    with pytest.raises(ValueError):
        InventoryRisk.quadratic(-0.1)
    with pytest.raises(ValueError):
        InventoryRisk("nonsense")
    with pytest.raises(ValueError):
        leakage_profile_A("XX", 1.0, 3.0, 3.0, 0.1, params)


def test_constant_risk_maps_to_ml():
    sol = myopic_solve(InventoryRisk.constant(0.1), 3.0, 3.0)
    assert sol.kind == "ML"
    assert sol.impact_cost == pytest.approx(3.0 + 0.1 * 3.0)
