"""Closed-form myopic execution strategies and their informational costs.

A myopic strategy fixes a deterministic selling schedule on [0, T] that
minimizes instantaneous impact plus inventory risk, ignoring the feedback of
its own trading on the flow imbalance.  The schedule depends on the form of
the inventory penalty:

    lambda = 0 or constant  ->  linear selling   (ML, the VWAP/TWAP curve)
    lambda = c x^2          ->  hyperbolic-sine  (MH, Almgren-Chriss)
    lambda = c x            ->  quadratic-in-t   (MQ), may finish early at
                                T_hat = min(T, 2 sqrt(x/c))

On top of the impact cost I(T, x), the trader pays the informational cost

    O(T, x, y) = kappa * integral_0^T (y e^{-beta t} - A_t)^2 + sigma_t^2 dt,

where A_t is the exponentially-decaying convolution of the leakage schedule
phi_t = eta * alpha_t.  O is available in closed form for zero leakage and
for the ML schedule; the MQ/MH cases are integrated numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .ou_flow import FlowParams, QUAD_ABS_TOL

__all__ = [
    "InventoryRisk",
    "MyopicSolution",
    "myopic_solve",
    "leakage_profile_A",
    "information_cost_O",
    "myopic_value",
    "optimal_initial_imbalance",
]

# Below this gap between sqrt(c) and beta the hyperbolic leakage profile
# switches to its degenerate closed form.
MH_DEGENERATE_TOL = 1e-9

_RISK_KINDS = ("zero", "quadratic", "linear", "constant")


@dataclass(frozen=True)
class InventoryRisk:
    """Running inventory penalty lambda(x), tagged by functional form."""

    kind: str
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in _RISK_KINDS:
            raise ValueError(f"unknown risk kind {self.kind!r}")
        if self.c < 0:
            raise ValueError("risk coefficient c must be >= 0")
        if self.kind == "zero" and self.c != 0.0:
            raise ValueError("zero risk cannot carry a coefficient")

    @classmethod
    def zero(cls):
        return cls("zero", 0.0)

    @classmethod
    def quadratic(cls, c: float):
        return cls("quadratic", c)

    @classmethod
    def linear(cls, c: float):
        return cls("linear", c)

    @classmethod
    def constant(cls, c: float):
        return cls("constant", c)

    def penalty(self, x):
        """lambda(x); broadcasts over arrays."""
        x = np.asarray(x, dtype=float)
        if self.kind == "quadratic":
            return self.c * x * x
        if self.kind == "linear":
            return self.c * x
        if self.kind == "constant":
            return np.full(x.shape, self.c)
        return np.zeros(x.shape)

    @property
    def strategy_kind(self) -> str:
        """Which myopic schedule this penalty induces."""
        if self.kind == "quadratic" and self.c > 0:
            return "MH"
        if self.kind == "linear" and self.c > 0:
            return "MQ"
        # A penalty that does not depend on x leaves the variational problem
        # unchanged, so the linear curve is optimal.
        return "ML"


@dataclass(frozen=True)
class MyopicSolution:
    """A deterministic execution schedule on [0, T]."""

    kind: str
    trajectory: Callable[[np.ndarray], np.ndarray]
    rate: Callable[[np.ndarray], np.ndarray]
    impact_cost: float
    effective_horizon: float
    x: float
    T: float
    c: float

    def sample(self, n: int = 301):
        """(t, x_t, alpha_t) on a uniform grid; drives trajectory exports."""
        t = np.linspace(0.0, self.T, n)
        return t, self.trajectory(t), self.rate(t)


def _sinh_ratio(a, b):
    """sinh(a)/sinh(b) for 0 <= a <= b, overflow-safe."""
    return np.exp(a - b) * np.expm1(-2.0 * a) / np.expm1(-2.0 * b)


def _cosh_over_sinh(a, b):
    """cosh(a)/sinh(b) for 0 <= a <= b, overflow-safe."""
    return np.exp(a - b) * (1.0 + np.exp(-2.0 * a)) / -np.expm1(-2.0 * b)


def myopic_solve(risk: InventoryRisk, x: float, T: float) -> MyopicSolution:
    """Optimal deterministic schedule for the given inventory penalty."""
    if x <= 0:
        raise ValueError(f"initial inventory must be > 0, got {x}")
    if T <= 0:
        raise ValueError(f"horizon must be > 0, got {T}")
    kind = risk.strategy_kind
    c = risk.c

    if kind == "ML":
        def trajectory(t):
            t = np.asarray(t, dtype=float)
            return np.clip(x * (T - t) / T, 0.0, None)

        def rate(t):
            t = np.asarray(t, dtype=float)
            return np.where(t < T, x / T, 0.0)

        impact = x * x / T
        if risk.kind == "constant":
            impact += c * T
        return MyopicSolution(kind, trajectory, rate, impact, T, x, T, c)

    if kind == "MH":
        q = math.sqrt(c)

        def trajectory(t):
            t = np.asarray(t, dtype=float)
            tt = np.clip(t, 0.0, T)
            return x * _sinh_ratio(q * (T - tt), q * T)

        def rate(t):
            t = np.asarray(t, dtype=float)
            tt = np.clip(t, 0.0, T)
            return np.where(t < T, q * x * _cosh_over_sinh(q * (T - tt), q * T), 0.0)

        impact = q * x * x / math.tanh(q * T)
        return MyopicSolution(kind, trajectory, rate, impact, T, x, T, c)

    # MQ: the positivity constraint may end liquidation at T_hat < T.
    t_hat = min(T, 2.0 * math.sqrt(x) / math.sqrt(c))
    a = c * t_hat / 4.0 + x / t_hat

    def trajectory(t):
        t = np.asarray(t, dtype=float)
        val = c * t * t / 4.0 - a * t + x
        return np.where(t < t_hat, val, 0.0)

    def rate(t):
        t = np.asarray(t, dtype=float)
        return np.where(t < t_hat, a - c * t / 2.0, 0.0)

    impact = -(c * c * t_hat**3) / 48.0 + c * t_hat * x / 2.0 + x * x / t_hat
    return MyopicSolution("MQ", trajectory, rate, impact, t_hat, x, T, c)


def leakage_profile_A(kind: str, t, x: float, T: float, c: float, params: FlowParams):
    """Convolution A_t = integral_0^t e^{-beta(t-s)} eta alpha_s ds in closed form.

    ``kind`` selects the schedule alpha (ML, MQ or MH).  The MH branch
    degenerates when sqrt(c) = beta and switches automatically to the
    separate formula that is continuous in c.  Vectorized over t.
    """
    if T <= 0:
        raise ValueError("horizon must be > 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > T + 1e-12):
        raise ValueError("t must lie in [0, T]")
    beta, eta = params.beta, params.eta

    if kind == "ML":
        return (eta * x / (beta * T)) * -np.expm1(-beta * t)

    if kind == "MQ":
        t_hat = min(T, 2.0 * math.sqrt(x) / math.sqrt(c))
        a = c * t_hat / 4.0 + x / t_hat
        tt = np.minimum(t, t_hat)
        w = -np.expm1(-beta * tt)
        val = (eta / beta**2) * (beta * w * a + 0.5 * c * (w - beta * tt))
        # After T_hat nothing is sold and the footprint decays exponentially.
        return val * np.exp(-beta * np.clip(t - t_hat, 0.0, None))

    if kind != "MH":
        raise ValueError(f"unknown leakage kind {kind!r}")

    q = math.sqrt(c)
    if abs(q - beta) < MH_DEGENERATE_TOL:
        # Degenerate case sqrt(c) = beta.
        num = 2.0 * beta * t + np.exp(2.0 * beta * (t - T)) - math.exp(-2.0 * beta * T)
        return eta * x * np.exp(-beta * t) * num / (2.0 * -math.expm1(-2.0 * beta * T))

    # sinh/cosh ratios against sinh(qT) keep the expression finite for large qT.
    sr = _sinh_ratio(q * (T - t), q * T)
    cr = _cosh_over_sinh(q * (T - t), q * T)
    coth = 1.0 / math.tanh(q * T)
    ebt = np.exp(-beta * t)
    return (eta * q * x / (c - beta**2)) * (
        q * ebt + beta * ebt * coth - q * sr - beta * cr
    )


def _o_zero(T: float, y: float, params: FlowParams) -> float:
    """Closed-form O for phi = 0."""
    kappa, beta, sigma = params.kappa, params.beta, params.sigma
    a = 2.0 * beta * T
    return (
        kappa * y * y / (2.0 * beta) * -math.expm1(-a)
        + kappa * sigma**2 / (4.0 * beta**2) * (a + math.expm1(-a))
    )


def _o_ml(T: float, x: float, y: float, params: FlowParams) -> float:
    """Closed-form O for the ML leakage profile."""
    kappa, beta, eta = params.kappa, params.beta, params.eta
    w = -math.expm1(-beta * T)           # 1 - e^{-bT}
    cross = -(w * w)                     # 2 e^{-bT} - 1 - e^{-2bT}
    # 2bT + 4 e^{-bT} - e^{-2bT} - 3 without cancellation:
    curv = 2.0 * (beta * T - w) - w * w
    return (
        _o_zero(T, y, params)
        + kappa * eta * x * y / (beta**2 * T) * cross
        + kappa * eta**2 * x * x / (2.0 * beta**3 * T * T) * curv
    )


def information_cost_O(kind, T: float, x: float, y: float, c: float, params: FlowParams) -> float:
    """Expected informational cost kappa * integral (mu_t^2 + sigma_t^2) dt.

    ``kind`` is None (or "zero") for no leakage, else one of ML/MQ/MH.
    ML and the zero case use the closed forms; MQ and MH integrate the
    general expression by adaptive quadrature.
    """
    if T <= 0:
        raise ValueError("horizon must be > 0")
    if kind is None or kind == "zero":
        return _o_zero(T, y, params)
    if kind == "ML":
        return _o_ml(T, x, y, params)
    if kind not in ("MQ", "MH"):
        raise ValueError(f"unknown leakage kind {kind!r}")

    beta, kappa = params.beta, params.kappa
    stat = params.stationary_variance

    def integrand(t):
        a_t = float(leakage_profile_A(kind, t, x, T, c, params))
        mu = y * math.exp(-beta * t) - a_t
        return mu * mu + stat * -math.expm1(-2.0 * beta * t)

    points = None
    if kind == "MQ":
        t_hat = min(T, 2.0 * math.sqrt(x) / math.sqrt(c))
        if t_hat < T:
            points = [t_hat]
    val, _ = quad(integrand, 0.0, T, epsabs=QUAD_ABS_TOL, limit=200, points=points)
    return kappa * val


def myopic_value(risk: InventoryRisk, T: float, x: float, y: float, params: FlowParams) -> float:
    """u^M(T, x, y) = impact cost + informational cost of the matching schedule."""
    if x < 0:
        raise ValueError("inventory must be >= 0")
    if x == 0.0:
        # Sitting in the market: no trading, no footprint.
        base = T * risk.c if risk.kind == "constant" else 0.0
        return base + _o_zero(T, y, params)
    sol = myopic_solve(risk, x, T)
    return sol.impact_cost + information_cost_O(sol.kind, T, x, y, c=risk.c, params=params)


def optimal_initial_imbalance(risk: InventoryRisk, T: float, x: float, params: FlowParams) -> float:
    """argmin_y u^M(T, x, y).

    u^M is quadratic in y with leading coefficient kappa (1 - e^{-2 beta T})
    / (2 beta) > 0, so the minimizer is the ratio of the linear to twice the
    quadratic coefficient; it is nonnegative because A_t >= 0.
    """
    if x <= 0 or T <= 0:
        raise ValueError("x and T must be > 0")
    kind = risk.strategy_kind
    beta = params.beta

    def integrand(t):
        return math.exp(-beta * t) * float(leakage_profile_A(kind, t, x, T, risk.c, params))

    points = None
    if kind == "MQ":
        t_hat = min(T, 2.0 * math.sqrt(x) / math.sqrt(risk.c))
        if t_hat < T:
            points = [t_hat]
    num, _ = quad(integrand, 0.0, T, epsabs=QUAD_ABS_TOL, limit=200, points=points)
    den = -math.expm1(-2.0 * beta * T) / (2.0 * beta)
    return num / den
