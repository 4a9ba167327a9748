"""Execution-horizon optimization and receding-horizon stepping.

Any fixed-horizon value u(T, x, y) grows at least linearly for large T
(the flow-variance cost accrues at rate >= kappa sigma^2/(2 beta)), so the
optimal horizon T* = argmin_T u is finite.  ``find_t_bar`` locates an upper
bound by doubling, ``optimize_T`` localizes the global minimum on a coarse
grid and then refines by golden section, and ``receding_step`` recomputes T*
at the current state and returns the matching first-step trading rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import erf

from . import riccati as _riccati
from .errors import SearchError
from .myopic import InventoryRisk, myopic_value
from .ou_flow import FlowParams

__all__ = [
    "HorizonResult",
    "RebalanceSchedule",
    "find_t_bar",
    "optimize_T",
    "receding_step",
    "elo_static_horizon",
    "folded_normal_mean",
]

# Horizons are never pushed below this floor; it keeps the Riccati boundary
# layer valid and caps the endgame rate at x/T_FLOOR.
T_FLOOR = 1e-3

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class HorizonResult:
    t_star: float
    value_at_star: float
    t_bar: float
    evaluations: int


@dataclass(frozen=True)
class RebalanceSchedule:
    """When a receding strategy recomputes T*.

    mode 'continuous': every ``dt`` of volume-time.
    mode 'inventory':  at the thresholds x0 * (K - k) / K, k = 1..K-1.
    """

    mode: str
    dt: float = None
    k: int = None

    def __post_init__(self):
        if self.mode == "continuous":
            if self.dt is None or self.dt <= 0:
                raise ValueError("continuous rebalancing needs dt > 0")
        elif self.mode == "inventory":
            if self.k is None or self.k < 1:
                raise ValueError("inventory rebalancing needs K >= 1")
        else:
            raise ValueError(f"unknown rebalance mode {self.mode!r}")

    @classmethod
    def continuous(cls, dt: float):
        return cls("continuous", dt=dt)

    @classmethod
    def inventory_fraction(cls, k: int):
        return cls("inventory", k=k)


def find_t_bar(value_fn: Callable[[float], float], t_seed: float = 1.0,
               samples: int = 64) -> float:
    """Doubling search for a T beyond which the value is increasing.

    Returns the first T = t_seed * 2^k such that the forward differences of
    value_fn over ``samples`` points of [T, 2T] are all positive.  The
    certificate needs a dense sampling: a shallow dip right of T can hide
    between 8 coarse probes, making the returned bound fall short of the
    true minimizer.  Raises SearchError after 2^15 * t_seed -- the signature
    of a cost that never turns up (for example kappa = 0 with pure impact
    cost x^2/T).
    """
    if t_seed <= 0:
        raise ValueError("t_seed must be > 0")
    t = t_seed
    for _ in range(16):
        probes = np.linspace(t, 2.0 * t, samples)
        vals = np.array([value_fn(p) for p in probes])
        if np.all(np.diff(vals) > 0.0):
            return t
        t *= 2.0
    raise SearchError(
        f"no increasing stretch of the value function found up to T = {t_seed * 2**15:g}; "
        "the cost may be monotone decreasing in T"
    )


def _golden(f, lo: float, hi: float, tol: float):
    """Golden-section minimization on [lo, hi]; returns (x, f(x), evals)."""
    a, b = lo, hi
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    evals = 2
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (b - a)
            f2 = f(x2)
        evals += 1
    return (x1, f1, evals) if f1 <= f2 else (x2, f2, evals)


def optimize_T(
    value_fn: Callable[[float], float],
    t_bar: float,
    tol: float = 1e-5,
    t_floor: float = T_FLOOR,
) -> HorizonResult:
    """Minimize value_fn over [t_floor, t_bar].

    A 64-point coarse scan localizes the global minimum (the value need not
    be convex), then golden section refines the bracketing interval to the
    requested absolute tolerance.
    """
    if t_bar <= t_floor:
        raise ValueError("t_bar must exceed the horizon floor")
    grid = np.linspace(t_floor, t_bar, 64)
    vals = np.array([value_fn(t) for t in grid])
    k = int(np.argmin(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    t_star, v_star, evals = _golden(value_fn, lo, hi, tol)
    if vals[k] < v_star:
        t_star, v_star = float(grid[k]), float(vals[k])
    return HorizonResult(
        t_star=float(t_star),
        value_at_star=float(v_star),
        t_bar=float(t_bar),
        evaluations=len(grid) + evals,
    )


def receding_step(
    state,
    strategy_family: str,
    params: FlowParams,
    risk: InventoryRisk,
    coef: "_riccati.RiccatiCoefficients" = None,
    t_seed: float = 1.0,
    tol: float = 1e-5,
) -> float:
    """One receding-horizon step: T* at the current state, then its rate.

    ``state`` is the pair (x, y).  For 'myopic-ML' the rate is x / T*; for
    'dynamic-DL' / 'dynamic-DH' it is the Riccati feedback rate at time-to-go
    T* (clamped at zero).  Dynamic families need pre-built coefficients; if
    none are passed the system is solved here with default settings.
    """
    x, y = state
    if x <= 0:
        raise ValueError("receding step needs positive inventory")

    if strategy_family == "myopic-ML":
        if risk.strategy_kind != "ML":
            raise ValueError("myopic-ML receding requires zero or constant inventory risk")
        value_fn = lambda T: myopic_value(risk, T, x, y, params)
        t_bar = find_t_bar(value_fn, t_seed)
        res = optimize_T(value_fn, t_bar, tol=tol)
        return x / max(res.t_star, T_FLOOR)

    if strategy_family in ("dynamic-DL", "dynamic-DH"):
        want = "constant" if strategy_family == "dynamic-DL" else "quadratic"
        if risk.kind != want:
            raise ValueError(f"{strategy_family} requires {want} inventory risk")
        if coef is None:
            coef = _riccati.solve_riccati(params, risk, t_max=16.0)
        value_fn = lambda T: _riccati.value_uD(coef, T, x, y)
        res = optimize_T(value_fn, coef.tau_max, tol=tol, t_floor=coef.epsilon)
        return _riccati.rate_alphaD(coef, max(res.t_star, coef.epsilon), x, y, clamp=True)

    raise ValueError(f"unknown strategy family {strategy_family!r}")


def folded_normal_mean(mu: float, sigma: float) -> float:
    """E|Z| for Z ~ N(mu, sigma^2)."""
    if sigma == 0.0:
        return abs(mu)
    z = mu / (sigma * math.sqrt(2.0))
    return sigma * math.sqrt(2.0 / math.pi) * math.exp(-z * z) + mu * erf(z)


def elo_static_horizon(
    x: float,
    y: float,
    c: float,
    params: FlowParams,
    t_seed: float = 1.0,
    tol: float = 1e-5,
) -> HorizonResult:
    """Static horizon that minimizes E|Y_T| + c sqrt(T) under a VWAP schedule.

    The VWAP rate x/T leaks at the constant rate eta x / T, so Y_T is
    Gaussian with the closed-form moments of the drained flow; its absolute
    mean follows from the folded-normal identity.
    """
    if x <= 0:
        raise ValueError("x must be > 0")
    if c <= 0:
        raise ValueError("timing coefficient c must be > 0")
    beta, eta = params.beta, params.eta

    def objective(T: float) -> float:
        mu = y * math.exp(-beta * T) - (eta * x / (beta * T)) * -math.expm1(-beta * T)
        var = params.stationary_variance * -math.expm1(-2.0 * beta * T)
        return folded_normal_mean(mu, math.sqrt(var)) + c * math.sqrt(T)

    t_bar = find_t_bar(objective, t_seed)
    return optimize_T(objective, t_bar, tol=tol)
