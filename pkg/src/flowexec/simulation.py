"""Monte Carlo evaluation of execution strategies.

All strategies are simulated on a common grid of volume-time steps with
common random numbers: the k-th Gaussian increment of path i is the same
for every strategy run with the same seed, which sharpens cost comparisons.
The flow state uses the exact one-step OU transition plus the explicit
Euler leakage deduction eta * alpha * dt; realized costs accumulate by the
left-endpoint rule on alpha^2 + kappa Y^2 + lambda(x).

Accounting follows the two cost conventions of the model: strategies tied
to a fixed horizon keep accruing the flow and inventory penalties until
their terminal time even after liquidation completes, while
indefinite-horizon strategies (finite-difference feedback and the receding
families) stop all accrual at the liquidation time T0.

Receding strategies need argmin_T u(T, x, y) at every step of every path;
the engine precomputes T* on an (x, y) grid by a vectorized coarse scan
plus golden-section refinement and interpolates bilinearly during the run.
Because du/dT vanishes at the optimum, interpolation error in T* enters
realized costs only at second order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SimulationError
from .horizon import T_FLOOR, find_t_bar, optimize_T
from .hjb_solver import ValueSurface
from .myopic import InventoryRisk, myopic_solve, myopic_value
from .ou_flow import FlowParams, step_moments
from .riccati import RiccatiCoefficients, rate_alphaD, solve_riccati, value_uD

__all__ = [
    "CostStats",
    "Trajectory",
    "TstarTable",
    "Table1Dependencies",
    "FDFeedback",
    "RecedingDL",
    "RecedingML",
    "TwoStageML",
    "StaticDL",
    "StaticML",
    "MyopicMH",
    "DynamicDH",
    "build_tstar_table",
    "build_table1_dependencies",
    "make_strategy",
    "run_strategy",
    "monte_carlo",
    "table1",
    "comparative_statics",
    "horizon_distribution",
    "TABLE1_ORDER",
]

# Paper column order: v, u~D, u~ML, uML_(2), uD, uML.
TABLE1_ORDER = ("fd", "receding-dl", "receding-ml", "two-stage-ml", "static-dl", "static-ml")

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class CostStats:
    """Summary of realized costs J and horizons T0 over a batch of paths."""

    mean: float
    sd: float
    q05: float
    q95: float
    mean_t0: float
    n_paths: int
    se: float
    clamp_fraction: float = 0.0


@dataclass(frozen=True)
class Trajectory:
    """One realized path: states, rate, running cost and realized horizon."""

    times: np.ndarray
    inventory: np.ndarray
    rate: np.ndarray
    imbalance: np.ndarray
    cumulative_cost: np.ndarray
    t0: float
    total_cost: float
    clamp_events: int

    def write_csv(self, path, strategy_name=""):
        with open(path, "w") as fh:
            fh.write("strategy,t,x,alpha,y,cumcost\n")
            for row in zip(self.times, self.inventory, self.rate, self.imbalance, self.cumulative_cost):
                fh.write(strategy_name + "," + ",".join(f"{v:.12g}" for v in row) + "\n")


# ---------------------------------------------------------------------------
# Vectorized fixed-horizon values and the T* lookup table
# ---------------------------------------------------------------------------

def _u_ml_vec(T, x, y, params: FlowParams, c_const: float):
    """Fixed-horizon VWAP value x^2/T + c T + O^ML(T, x, y); broadcasts."""
    T = np.asarray(T, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    beta, sigma, kappa, eta = params.beta, params.sigma, params.kappa, params.eta
    a = beta * T
    w = -np.expm1(-a)
    e2m = np.expm1(-2.0 * a)
    o = (
        kappa * y * y / (2.0 * beta) * -e2m
        + kappa * sigma**2 / (4.0 * beta**2) * (2.0 * a + e2m)
        + kappa * eta * x * y / (beta**2 * T) * -(w * w)
        + kappa * eta**2 * x * x / (2.0 * beta**3 * T * T) * (2.0 * (a - w) - w * w)
    )
    return x * x / T + c_const * T + o


def _u_dl_vec(T, x, y, coef: RiccatiCoefficients):
    a, b, c, f = coef.coeffs(T)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return x * x * a + y * y * b + x * y * c + f


def _golden_vec(f, lo, hi, tol):
    """Golden-section minimization run in lockstep over arrays of brackets."""
    span = float(np.max(hi - lo))
    iters = max(int(math.ceil(math.log(tol / span) / math.log(_INV_PHI))), 1) if span > tol else 1
    a, b = lo.astype(float).copy(), hi.astype(float).copy()
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        take1 = f1 <= f2
        b = np.where(take1, x2, b)
        a = np.where(take1, a, x1)
        x1n = b - _INV_PHI * (b - a)
        x2n = a + _INV_PHI * (b - a)
        x_new = np.where(take1, x1n, x2n)
        f_new = f(x_new)
        x1, f1, x2, f2 = (
            np.where(take1, x1n, x2),
            np.where(take1, f_new, f2),
            np.where(take1, x1, x2n),
            np.where(take1, f1, f_new),
        )
    return np.where(f1 <= f2, x1, x2)


@dataclass
class TstarTable:
    """Bilinear lookup of the optimal horizon over the (x, y) state box."""

    x_nodes: np.ndarray
    y_nodes: np.ndarray
    values: np.ndarray
    floor: float = T_FLOOR

    def __call__(self, x, y):
        x = np.clip(np.asarray(x, dtype=float), self.x_nodes[0], self.x_nodes[-1])
        y = np.clip(np.asarray(y, dtype=float), self.y_nodes[0], self.y_nodes[-1])
        ix = np.clip(np.searchsorted(self.x_nodes, x) - 1, 0, len(self.x_nodes) - 2)
        iy = np.clip(np.searchsorted(self.y_nodes, y) - 1, 0, len(self.y_nodes) - 2)
        tx = (x - self.x_nodes[ix]) / (self.x_nodes[ix + 1] - self.x_nodes[ix])
        ty = (y - self.y_nodes[iy]) / (self.y_nodes[iy + 1] - self.y_nodes[iy])
        v = self.values
        out = (
            v[ix, iy] * (1 - tx) * (1 - ty)
            + v[ix + 1, iy] * tx * (1 - ty)
            + v[ix, iy + 1] * (1 - tx) * ty
            + v[ix + 1, iy + 1] * tx * ty
        )
        return np.maximum(out, self.floor)


def build_tstar_table(
    value_fn,
    x_hi: float,
    t_hi: float,
    y_lo: float,
    y_hi: float,
    n_x: int = 241,
    n_y: int = 161,
    n_scan: int = 64,
    tol: float = 1e-6,
    t_floor: float = T_FLOOR,
) -> TstarTable:
    """Tabulate argmin_T value_fn(T, x, y) over the state box.

    ``value_fn(T, x, y)`` must broadcast.  The x-nodes are square-spaced so
    the table resolves the near-liquidation region where T* is linear in x.
    """
    x_nodes = x_hi * np.linspace(0.0, 1.0, n_x) ** 2
    y_nodes = np.linspace(y_lo, y_hi, n_y)
    X = np.repeat(x_nodes, n_y)
    Y = np.tile(y_nodes, n_x)

    ts = np.linspace(t_floor, t_hi, n_scan)
    vals = value_fn(ts[None, :], X[:, None], Y[:, None])
    k = np.argmin(vals, axis=1)
    lo = ts[np.maximum(k - 1, 0)]
    hi = ts[np.minimum(k + 1, n_scan - 1)]
    tstar = _golden_vec(lambda T: value_fn(T, X, Y), lo, hi, tol)
    return TstarTable(
        x_nodes=x_nodes,
        y_nodes=y_nodes,
        values=tstar.reshape(n_x, n_y),
        floor=t_floor,
    )


# ---------------------------------------------------------------------------
# Strategy kinds
# ---------------------------------------------------------------------------


class _Strategy:
    """Per-path selling rate; ``rates`` returns unclamped values and the
    engine floors them at zero, counting the clamping events."""

    name = "?"
    fixed_accounting = False

    def prepare(self, n_paths: int, x0: float, y0: float, dt: float):
        self.t_end = None

    def rates(self, t, x, y, alive):
        raise NotImplementedError


class FDFeedback(_Strategy):
    """Feedback rate (v_x + eta v_y)/2 read off the marched value surface."""

    name = "fd"

    def __init__(self, surface: ValueSurface):
        self.surface = surface

    def prepare(self, n_paths, x0, y0, dt):
        self.t_end = None
        if x0 > self.surface.grid.x_max + 1e-12:
            raise ValueError("initial inventory outside the solved surface")
        g = self.surface.grid
        self._ylim = (g.y_lo, g.y_hi)
        vx, vy = self.surface._quotients()
        self._vx, self._vy = vx, vy
        self._eta = self.surface.params.eta

    def rates(self, t, x, y, alive):
        s = self.surface
        yq = np.clip(y, *self._ylim)
        gx = s._bilinear(self._vx, np.clip(x, 0.0, s.grid.x_max), yq)
        gy = s._bilinear(self._vy, np.clip(x, 0.0, s.grid.x_max), yq)
        return 0.5 * (gx + self._eta * gy)


class RecedingDL(_Strategy):
    """Riccati feedback at the per-state optimal time-to-go T*(x, y)."""

    name = "receding-dl"

    def __init__(self, coef: RiccatiCoefficients, tstar: TstarTable):
        self.coef = coef
        self.tstar = tstar

    def prepare(self, n_paths, x0, y0, dt):
        self.t_end = None

    def rates(self, t, x, y, alive):
        tau = self.tstar(np.where(alive, x, self.tstar.floor), y)
        tau = np.maximum(tau, self.coef.epsilon)
        return rate_alphaD(self.coef, tau, x, y, clamp=False)


class RecedingML(_Strategy):
    """VWAP rate x / T*(x, y) recomputed every step."""

    name = "receding-ml"

    def __init__(self, tstar: TstarTable):
        self.tstar = tstar

    def prepare(self, n_paths, x0, y0, dt):
        self.t_end = None

    def rates(self, t, x, y, alive):
        tau = self.tstar(np.where(alive, x, self.tstar.floor), y)
        return x / tau


class StaticML(_Strategy):
    """Constant rate x0 / T* with T* fixed at time zero."""

    name = "static-ml"
    fixed_accounting = True

    def __init__(self, t_star: float):
        self.t_star = t_star

    def prepare(self, n_paths, x0, y0, dt):
        self._rate = x0 / self.t_star
        self.t_end = np.full(n_paths, self.t_star)

    def rates(self, t, x, y, alive):
        return np.full(x.shape, self._rate)


class TwoStageML(_Strategy):
    """VWAP that recomputes its horizon once, when inventory reaches x0/2."""

    name = "two-stage-ml"
    fixed_accounting = True

    def __init__(self, t_star: float, params: FlowParams, risk: InventoryRisk, t_hi: float):
        if risk.strategy_kind != "ML":
            raise ValueError("two-stage VWAP needs zero or constant inventory risk")
        self.t_star1 = t_star
        self.params = params
        self.risk = risk
        self.t_hi = t_hi

    def prepare(self, n_paths, x0, y0, dt):
        self._rate = np.full(n_paths, x0 / self.t_star1)
        self._t_half = 0.5 * self.t_star1
        self._done = False
        self.t_end = np.full(n_paths, self.t_star1)

    def rates(self, t, x, y, alive):
        if not self._done and t >= self._t_half - 1e-12:
            self._done = True
            lo = np.full(x.shape, T_FLOOR)
            hi = np.full(x.shape, self.t_hi)
            xs = x.copy()
            t2 = _golden_vec(
                lambda T: _u_ml_vec(T, xs, y, self.params, self.risk.c), lo, hi, 1e-6
            )
            t2 = np.maximum(t2, T_FLOOR)
            self._rate = x / t2
            self.t_end = t + t2
        return self._rate


class StaticDL(_Strategy):
    """Riccati feedback over a horizon fixed at time zero."""

    name = "static-dl"
    fixed_accounting = True

    def __init__(self, coef: RiccatiCoefficients, t_star: float):
        self.coef = coef
        self.t_star = t_star

    def prepare(self, n_paths, x0, y0, dt):
        self.t_end = np.full(n_paths, self.t_star)
        self._dt = dt

    def rates(self, t, x, y, alive):
        tau = self.t_star - t
        if tau <= self._dt * (1.0 + 1e-9) or tau < self.coef.epsilon:
            # Final step: liquidate the remainder linearly over the exact
            # remaining time, per the short-time rate x/tau.
            return x / max(tau, 1e-9)
        return rate_alphaD(self.coef, tau, x, y, clamp=False)


class MyopicMH(_Strategy):
    """Deterministic hyperbolic-sine schedule for quadratic inventory risk."""

    name = "myopic-mh"
    fixed_accounting = True

    def __init__(self, risk: InventoryRisk, x0: float, T: float):
        self.solution = myopic_solve(risk, x0, T)
        self.T = T

    def prepare(self, n_paths, x0, y0, dt):
        self.t_end = np.full(n_paths, self.T)

    def rates(self, t, x, y, alive):
        return np.full(x.shape, float(self.solution.rate(t)))


class DynamicDH(_Strategy):
    """Riccati feedback with quadratic inventory risk over a fixed horizon."""

    name = "dynamic-dh"
    fixed_accounting = True

    def __init__(self, coef: RiccatiCoefficients, T: float):
        if coef.variant != "DH":
            raise ValueError("DynamicDH needs DH (quadratic-risk) coefficients")
        self.coef = coef
        self.T = T

    def prepare(self, n_paths, x0, y0, dt):
        self.t_end = np.full(n_paths, self.T)
        self._dt = dt

    def rates(self, t, x, y, alive):
        tau = self.T - t
        if tau <= self._dt * (1.0 + 1e-9) or tau < self.coef.epsilon:
            return x / max(tau, 1e-9)
        return rate_alphaD(self.coef, tau, x, y, clamp=False)


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

def _simulate(strategy, params, risk, x0, y0, dt, n_paths, seed, record=False):
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if x0 <= 0:
        raise ValueError("x0 must be > 0")
    decay, noise_sd = step_moments(params, dt)
    rng = np.random.Generator(np.random.Philox(seed))
    kappa, eta = params.kappa, params.eta

    strategy.prepare(n_paths, x0, y0, dt)
    x = np.full(n_paths, float(x0))
    y = np.full(n_paths, float(y0))
    cost = np.zeros(n_paths)
    t0 = np.full(n_paths, np.nan)
    y_t0 = np.full(n_paths, np.nan)
    clamp_events = 0
    rate_evals = 0
    guard_steps = None
    records = [] if record else None

    t = 0.0
    k = 0
    while True:
        alive = x > 0.0
        if strategy.t_end is not None:
            accruing = t < strategy.t_end - 1e-12
        else:
            accruing = alive
        if not alive.any() and not accruing.any():
            break

        raw = strategy.rates(t, x, y, alive)
        raw = np.where(alive, raw, 0.0)
        clamp_events += int(np.count_nonzero(alive & (raw < 0.0)))
        rate_evals += int(np.count_nonzero(alive))
        alpha = np.maximum(raw, 0.0)

        with np.errstate(divide="ignore", invalid="ignore"):
            theta = np.where(alpha > 0.0, x / alpha, np.inf)
        sell_time = np.where(alive, np.minimum(theta, dt), 0.0)
        finishing = alive & (theta <= dt)

        if strategy.t_end is not None:
            acc_dt = np.clip(strategy.t_end - t, 0.0, dt)
        else:
            acc_dt = sell_time
        cost += alpha * alpha * sell_time + (kappa * y * y + risk.penalty(x)) * acc_dt

        if record:
            records.append((t, x.copy(), alpha.copy(), y.copy(), cost.copy()))

        t0[finishing] = t + theta[finishing]
        x = np.where(finishing, 0.0, x - alpha * dt)

        z = rng.standard_normal(n_paths)
        y = y * decay - eta * alpha * sell_time + noise_sd * z
        y_t0[finishing] = y[finishing]

        t += dt
        k += 1
        if k == 1:
            rate0 = float(alpha.mean())
            guard_steps = int(100.0 * x0 / max(rate0, 1e-9) / dt) + 10
        if k > guard_steps:
            raise SimulationError(
                f"strategy {strategy.name!r} did not terminate within "
                f"t = 100 x0 / initial rate = {guard_steps * dt:.3g}",
                step=k,
            )

    clamp_fraction = clamp_events / rate_evals if rate_evals else 0.0
    out = {
        "cost": cost,
        "t0": t0,
        "y_t0": y_t0,
        "clamp_events": clamp_events,
        "clamp_fraction": clamp_fraction,
        "steps": k,
    }
    if record:
        out["records"] = records
    return out


def run_strategy(strategy, params, risk, x0, y0, dt, seed) -> Trajectory:
    """Simulate a single path and return its full trajectory."""
    res = _simulate(strategy, params, risk, x0, y0, dt, n_paths=1, seed=seed, record=True)
    rec = res["records"]
    times = np.array([r[0] for r in rec])
    inv = np.array([r[1][0] for r in rec])
    rate = np.array([r[2][0] for r in rec])
    imb = np.array([r[3][0] for r in rec])
    cum = np.array([r[4][0] for r in rec])
    return Trajectory(
        times=times,
        inventory=inv,
        rate=rate,
        imbalance=imb,
        cumulative_cost=cum,
        t0=float(res["t0"][0]),
        total_cost=float(res["cost"][0]),
        clamp_events=res["clamp_events"],
    )


def monte_carlo(strategy, params, risk, x0, y0, dt, n_paths, seed) -> CostStats:
    """Cost statistics over n_paths common-random-number paths."""
    if n_paths < 100:
        raise ValueError("need at least 100 paths for stable statistics")
    res = _simulate(strategy, params, risk, x0, y0, dt, n_paths=n_paths, seed=seed)
    return _stats_from(res, n_paths)


def _stats_from(res, n_paths) -> CostStats:
    cost = res["cost"]
    sd = float(np.std(cost, ddof=1))
    return CostStats(
        mean=float(np.mean(cost)),
        sd=sd,
        q05=float(np.quantile(cost, 0.05)),
        q95=float(np.quantile(cost, 0.95)),
        mean_t0=float(np.nanmean(res["t0"])),
        n_paths=n_paths,
        se=sd / math.sqrt(n_paths),
        clamp_fraction=res["clamp_fraction"],
    )


# ---------------------------------------------------------------------------
# Table-1 orchestration
# ---------------------------------------------------------------------------

@dataclass
class Table1Dependencies:
    """Everything the six strategies need, built once and shared."""

    params: FlowParams
    risk: InventoryRisk
    x0: float
    coef: RiccatiCoefficients
    surface: ValueSurface
    tstar_ml: TstarTable
    tstar_dl: TstarTable
    static_t_ml: float
    static_t_dl: float
    t_hi: float


def build_table1_dependencies(
    params: FlowParams,
    risk: InventoryRisk,
    x0: float,
    grid=None,
    epsilon: float = 1e-3,
    rk_step: float = 1e-4,
    table_nx: int = 241,
    table_ny: int = 161,
) -> Table1Dependencies:
    from .hjb_solver import GridSpec, solve_indefinite  # local to avoid cycle at import time

    if risk.kind != "constant" or risk.c <= 0:
        raise ValueError("the six-strategy comparison is defined for constant inventory risk c > 0")
    # With kappa >= 0 the VWAP horizon never exceeds x/sqrt(c).
    t_hi = 1.05 * x0 / math.sqrt(risk.c)
    coef = solve_riccati(params, risk, t_max=t_hi + 0.5, epsilon=epsilon, step=rk_step)
    if grid is None:
        grid = GridSpec.default(params, x_max=x0)
    surface = solve_indefinite(params, risk, grid)
    y_span = 5.0 * math.sqrt(params.stationary_variance)
    tstar_ml = build_tstar_table(
        lambda T, x, y: _u_ml_vec(T, x, y, params, risk.c),
        x_hi=x0, t_hi=t_hi, y_lo=-y_span, y_hi=y_span, n_x=table_nx, n_y=table_ny,
    )
    tstar_dl = build_tstar_table(
        lambda T, x, y: _u_dl_vec(T, x, y, coef),
        x_hi=x0, t_hi=t_hi, y_lo=-y_span, y_hi=y_span, n_x=table_nx, n_y=table_ny,
        t_floor=max(T_FLOOR, epsilon),
    )
    return Table1Dependencies(
        params=params, risk=risk, x0=x0, coef=coef, surface=surface,
        tstar_ml=tstar_ml, tstar_dl=tstar_dl,
        static_t_ml=float("nan"), static_t_dl=float("nan"), t_hi=t_hi,
    )


def _static_horizons(deps: Table1Dependencies, y0: float):
    """Time-zero optimal horizons for the static strategies."""
    params, risk, x0 = deps.params, deps.risk, deps.x0
    f_ml = lambda T: myopic_value(risk, T, x0, y0, params)
    t_bar = find_t_bar(f_ml, t_seed=max(deps.t_hi / 16.0, 0.25))
    res_ml = optimize_T(f_ml, min(t_bar * 2.0, deps.t_hi), tol=1e-6)
    f_dl = lambda T: value_uD(deps.coef, T, x0, y0)
    res_dl = optimize_T(f_dl, deps.coef.tau_max, tol=1e-6, t_floor=deps.coef.epsilon)
    return res_ml.t_star, res_dl.t_star


def make_strategy(name: str, deps: Table1Dependencies, y0: float):
    if name == "fd":
        return FDFeedback(deps.surface)
    if name == "receding-dl":
        return RecedingDL(deps.coef, deps.tstar_dl)
    if name == "receding-ml":
        return RecedingML(deps.tstar_ml)
    t_ml, t_dl = _static_horizons(deps, y0)
    if name == "static-ml":
        return StaticML(t_ml)
    if name == "two-stage-ml":
        return TwoStageML(t_ml, deps.params, deps.risk, deps.t_hi)
    if name == "static-dl":
        return StaticDL(deps.coef, t_dl)
    raise ValueError(f"unknown strategy name {name!r}")


def table1(params, risk, x0, y0, n_paths, seed, dt=0.01, deps=None):
    """All six strategy rows with common random numbers.

    Returns a list of (name, CostStats) in the paper's column order.
    """
    if deps is None:
        deps = build_table1_dependencies(params, risk, x0)
    rows = []
    for name in TABLE1_ORDER:
        strat = make_strategy(name, deps, y0)
        rows.append((name, monte_carlo(strat, params, risk, x0, y0, dt, n_paths, seed)))
    return rows


def comparative_statics(kappas, etas, ys, params: FlowParams, risk: InventoryRisk,
                        x0: float, epsilon: float = 1e-3, rk_step: float = 1e-4):
    """Receding-DL trading rate over a (kappa, eta, y) grid at fixed inventory.

    Returns rows (kappa, eta, y, rate).
    """
    if risk.kind != "constant":
        raise ValueError("comparative statics follow the constant-risk receding strategy")
    t_hi = 1.05 * x0 / math.sqrt(risk.c)
    rows = []
    for kap in kappas:
        for eta in etas:
            p = FlowParams(beta=params.beta, sigma=params.sigma, kappa=kap, eta=eta)
            coef = solve_riccati(p, risk, t_max=t_hi + 0.5, epsilon=epsilon, step=rk_step)
            for y in ys:
                res = optimize_T(lambda T: value_uD(coef, T, x0, y),
                                 coef.tau_max, tol=1e-6, t_floor=coef.epsilon)
                rate = rate_alphaD(coef, max(res.t_star, coef.epsilon), x0, y, clamp=True)
                rows.append((kap, eta, float(y), float(rate)))
    return rows


def horizon_distribution(params, risk, x0, y0_values, n_paths, seed, dt=0.01, deps=None):
    """Realized-horizon samples of the receding-DL strategy per initial y0.

    Returns {y0: (T0 array, Y_{T0} array)}.
    """
    if deps is None:
        deps = build_table1_dependencies(params, risk, x0)
    out = {}
    for y0 in y0_values:
        strat = RecedingDL(deps.coef, deps.tstar_dl)
        res = _simulate(strat, params, risk, x0, y0, dt, n_paths, seed)
        out[float(y0)] = (res["t0"], res["y_t0"])
    return out
