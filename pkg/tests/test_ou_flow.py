import math

import numpy as np
import pytest

from flowexec.errors import SimulationError
from flowexec.ou_flow import (
    DeterministicLeakage,
    FlowParams,
    ParameterWarning,
    ProportionalLeakage,
    ZeroLeakage,
    moments,
    simulate_path,
    simulate_paths,
    step_moments,
)


@pytest.fixture
def params():
    return FlowParams(beta=0.05, sigma=0.14)


def test_parameter_validation():
    with pytest.raises(ValueError):
        FlowParams(beta=0.0, sigma=0.1)
    with pytest.raises(ValueError):
        FlowParams(beta=0.1, sigma=-0.1)
    with pytest.raises(ValueError):
        FlowParams(beta=0.1, sigma=0.1, kappa=-1.0)
    with pytest.raises(ValueError):
        FlowParams(beta=0.1, sigma=0.1, eta=-1.0)


def test_stationary_variance_warning():
    with pytest.warns(ParameterWarning):
        FlowParams(beta=0.05, sigma=1.0)  # variance 10, far above plausible
    with pytest.warns(ParameterWarning):
        FlowParams(beta=5.0, sigma=0.01)


def test_moments_trivial(params):
    m = moments(0.0, 0.37, params, DeterministicLeakage(phi=lambda t: 1.0))
    assert m.mean == 0.37
    assert m.variance == 0.0
    for t in (0.5, 2.0, 10.0):
        m = moments(t, 0.0, params, ZeroLeakage())
        assert m.mean == 0.0


def test_moments_frozen_values(params):
    # beta=0.05, sigma=0.14, y=0.1, t=3, phi=0.
    m = moments(3.0, 0.1, params)
    assert m.mean == pytest.approx(0.0860708, abs=5e-8)
    assert m.variance == pytest.approx(0.0508, abs=5e-5)


def test_moments_against_euler_maruyama_mc(params):
    # Independent oracle: plain Euler-Maruyama of the SDE.
    n, dt, t_end, y0 = 100_000, 1e-3, 3.0, 0.1
    g = np.random.default_rng(42)
    y = np.full(n, y0)
    for _ in range(int(t_end / dt)):
        y += -params.beta * y * dt + params.sigma * math.sqrt(dt) * g.standard_normal(n)
    m = moments(t_end, y0, params)
    se_mean = y.std(ddof=1) / math.sqrt(n)
    assert abs(y.mean() - m.mean) < 3 * se_mean
    se_var = y.var(ddof=1) * math.sqrt(2.0 / (n - 1))
    assert abs(y.var(ddof=1) - m.variance) < 3 * se_var


def test_moments_piecewise_constant_exact(params):
    pw = DeterministicLeakage.piecewise_constant([0.0, 1.0, 2.5], [0.3, 0.1])
    generic = DeterministicLeakage(phi=pw.phi)
    for t in (0.5, 1.0, 2.0, 4.0):
        exact = moments(t, 0.2, params, pw)
        quadr = moments(t, 0.2, params, generic)
        assert exact.mean == pytest.approx(quadr.mean, abs=1e-9)


def test_moments_domain_errors(params):
    with pytest.raises(ValueError):
        moments(-0.1, 0.0, params)
    with pytest.raises(ValueError):
        moments(1.0, 0.0, params, ProportionalLeakage(eta=0.05))


def test_variance_monotone_and_saturates(params):
    ts = np.linspace(0.0, 200.0, 400)
    var = np.array([moments(t, 0.0, params).variance for t in ts])
    assert np.all(np.diff(var) >= 0)
    assert var[-1] == pytest.approx(params.stationary_variance, rel=1e-6)
    assert np.all(var <= params.stationary_variance + 1e-15)


def test_simulate_path_noiseless_decay():
    with pytest.warns(ParameterWarning):
        params = FlowParams(beta=0.05, sigma=0.0)
    path = simulate_path(params, 1.0, lambda t, y: 0.0, dt=0.01, horizon=3.0, seed=1)
    assert len(path.values) == 301
    expected = np.exp(-0.05 * path.times)
    np.testing.assert_allclose(path.values, expected, rtol=1e-12)


def test_simulate_path_deterministic_given_seed(params):
    a = simulate_path(params, 0.1, lambda t, y: 0.02, dt=0.01, horizon=1.0, seed=9)
    b = simulate_path(params, 0.1, lambda t, y: 0.02, dt=0.01, horizon=1.0, seed=9)
    np.testing.assert_array_equal(a.values, b.values)
    c = simulate_path(params, 0.1, lambda t, y: 0.02, dt=0.01, horizon=1.0, seed=9, path_index=1)
    assert not np.array_equal(a.values, c.values)


def test_simulate_path_bad_callback(params):
    with pytest.raises(SimulationError) as exc:
        simulate_path(params, 0.0, lambda t, y: float("nan") if t > 0.5 else 0.0,
                      dt=0.1, horizon=2.0, seed=0)
    assert exc.value.step is not None


def test_batch_variance_matches_moments(params):
    paths = simulate_paths(params, 0.0, lambda t, y: 0.0, dt=0.01, horizon=3.0,
                           n_paths=100_000, seed=5)
    terminal = paths[-1]
    m = moments(3.0, 0.0, params)
    se_var = terminal.var(ddof=1) * math.sqrt(2.0 / (len(terminal) - 1))
    assert abs(terminal.var(ddof=1) - m.variance) < 3 * se_var
    se_mean = terminal.std(ddof=1) / math.sqrt(len(terminal))
    assert abs(terminal.mean() - m.mean) < 3 * se_mean


def test_batch_mean_matches_moments_with_leakage(params):
    leak = 0.05
    paths = simulate_paths(params, 0.3, lambda t, y: leak, dt=0.01, horizon=2.0,
                           n_paths=50_000, seed=6)
    m = moments(2.0, 0.3, params, DeterministicLeakage(phi=lambda t: leak))
    terminal = paths[-1]
    se = terminal.std(ddof=1) / math.sqrt(len(terminal))
    # The Euler leakage deduction phi*dt is biased at O(dt) relative to the
    # exact convolution; allow for it alongside the Monte Carlo error.
    euler_bias = leak * 0.01
    assert abs(terminal.mean() - m.mean) < 3 * se + euler_bias


def test_exact_transition_vs_euler_halving(params):
    """Euler-Maruyama terminal variance converges to the exact transition's
    at first order in dt (analytic propagation, no sampling)."""
    t_end = 3.0
    exact = moments(t_end, 0.0, params).variance

    def euler_var(dt):
        n = int(round(t_end / dt))
        var = 0.0
        for _ in range(n):
            var = var * (1.0 - params.beta * dt) ** 2 + params.sigma**2 * dt
        return var

    e1 = abs(euler_var(0.01) - exact)
    e2 = abs(euler_var(0.005) - exact)
    assert e1 / e2 == pytest.approx(2.0, rel=0.15)


def test_one_step_exact_transition(params):
    decay, sd = step_moments(params, 0.01)
    assert decay == pytest.approx(math.exp(-0.05 * 0.01), rel=1e-14)
    assert sd**2 == pytest.approx(params.stationary_variance * (1 - math.exp(-2 * 0.05 * 0.01)),
                                  rel=1e-12)


def test_path_csv_export(tmp_path, params):
    path = simulate_path(params, 0.1, lambda t, y: 0.0, dt=0.5, horizon=1.0, seed=2)
    out = tmp_path / "path.csv"
    path.write_csv(out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "t,Y"
    assert len(lines) == len(path.times) + 1
