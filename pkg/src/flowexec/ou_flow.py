"""Order-flow imbalance dynamics.

The market imbalance Y mean-reverts to zero and is drained by the trader's
own selling:

    dY_t = -beta * Y_t dt - phi_t dt + sigma dW_t.

With a deterministic drain phi the law of Y_t stays Gaussian, so first and
second moments are available in closed form.  Path simulation composes the
exact Gaussian transition of the mean-reverting part with an explicit Euler
deduction of the drain, which removes discretization bias from the dominant
stochastic term.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import SimulationError

__all__ = [
    "FlowParams",
    "ZeroLeakage",
    "DeterministicLeakage",
    "ProportionalLeakage",
    "FlowMoments",
    "FlowPath",
    "ParameterWarning",
    "moments",
    "simulate_path",
    "simulate_paths",
]

# Convolution integrals are resolved to this absolute tolerance.
QUAD_ABS_TOL = 1e-10


class ParameterWarning(UserWarning):
    """Model constants outside their empirically plausible range."""


@dataclass(frozen=True)
class FlowParams:
    """Constants of the imbalance model.

    beta   mean-reversion rate (per unit volume-time)
    sigma  flow volatility (per sqrt volume-time)
    kappa  weight of the informational cost kappa * Y^2
    eta    strength of the trader's leakage phi = eta * alpha
    """

    beta: float
    sigma: float
    kappa: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        # sigma = 0 (a noiseless flow) is admitted for deterministic runs.
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        var = self.stationary_variance
        if not 0.01 <= var <= 0.2:
            warnings.warn(
                f"stationary imbalance variance sigma^2/(2 beta) = {var:.4g} "
                "lies outside the plausible range [0.01, 0.2]",
                ParameterWarning,
                stacklevel=2,
            )

    @property
    def stationary_variance(self) -> float:
        return self.sigma**2 / (2.0 * self.beta)


@dataclass(frozen=True)
class ZeroLeakage:
    """No informational footprint: phi = 0."""

    def rate(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class DeterministicLeakage:
    """Time-dependent drain phi_t that does not react to the state.

    Either wraps an arbitrary nonnegative callable, or -- via
    :meth:`piecewise_constant` -- a step schedule for which the moment
    convolution is evaluated exactly instead of by quadrature.
    """

    phi: Callable[[float], float]
    breakpoints: tuple = field(default=None)
    levels: tuple = field(default=None)

    @classmethod
    def piecewise_constant(cls, times: Sequence[float], rates: Sequence[float]):
        """Schedule equal to rates[k] on [times[k], times[k+1]), 0 after the end."""
        times = tuple(float(t) for t in times)
        rates = tuple(float(r) for r in rates)
        if len(times) != len(rates) + 1:
            raise ValueError("need len(times) == len(rates) + 1")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("times must be strictly increasing")
        if any(r < 0 for r in rates):
            raise ValueError("leakage rates must be nonnegative")

        def phi(t, _times=times, _rates=rates):
            if t < _times[0] or t >= _times[-1]:
                return 0.0
            k = np.searchsorted(_times, t, side="right") - 1
            return _rates[min(k, len(_rates) - 1)]

        return cls(phi=phi, breakpoints=times, levels=rates)

    def rate(self, t):
        return self.phi(t)


@dataclass(frozen=True)
class ProportionalLeakage:
    """Leakage proportional to the selling rate: phi(alpha) = eta * alpha."""

    eta: float

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be >= 0")


@dataclass(frozen=True)
class FlowMoments:
    """Mean and variance of Y_t under a deterministic drain."""

    mean: float
    variance: float


@dataclass(frozen=True)
class FlowPath:
    """One sampled imbalance path on a uniform time grid."""

    times: np.ndarray
    values: np.ndarray

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,Y\n")
            for t, y in zip(self.times, self.values):
                fh.write(f"{t:.12g},{y:.12g}\n")


def _leakage_convolution(t: float, beta: float, leakage) -> float:
    """integral_0^t exp(-beta (t - s)) phi_s ds."""
    if isinstance(leakage, ZeroLeakage):
        return 0.0
    if leakage.breakpoints is not None:
        # Exact segment-by-segment integration of the step schedule.
        total = 0.0
        for a, b, r in zip(leakage.breakpoints, leakage.breakpoints[1:], leakage.levels):
            if a >= t:
                break
            b = min(b, t)
            total += r * (math.exp(-beta * (t - b)) - math.exp(-beta * (t - a))) / beta
        return total

    def integrand(s):
        phi = leakage.phi(s)
        if phi < 0:
            raise ValueError(f"leakage schedule is negative at t={s}")
        return math.exp(-beta * (t - s)) * phi

    val, _ = quad(integrand, 0.0, t, epsabs=QUAD_ABS_TOL, limit=200)
    return val


def moments(t: float, y: float, params: FlowParams, leakage=ZeroLeakage()) -> FlowMoments:
    """Exact Gaussian moments of Y_t given Y_0 = y and a deterministic drain.

    mean     = y e^{-beta t} - integral_0^t e^{-beta(t-s)} phi_s ds
    variance = sigma^2/(2 beta) (1 - e^{-2 beta t})
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if isinstance(leakage, ProportionalLeakage):
        raise ValueError(
            "proportional leakage has no closed moments; supply the realized "
            "rate schedule as a DeterministicLeakage"
        )
    beta = params.beta
    mean = y * math.exp(-beta * t) - _leakage_convolution(t, beta, leakage)
    variance = params.stationary_variance * -math.expm1(-2.0 * beta * t)
    return FlowMoments(mean=mean, variance=variance)


def _path_rng(seed: int, path_index: int) -> np.random.Generator:
    """Counter-based stream for one path, independent of any thread layout."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, path_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def step_moments(params: FlowParams, dt: float) -> tuple[float, float]:
    """(decay, noise standard deviation) of the exact one-step OU transition."""
    decay = math.exp(-params.beta * dt)
    sd = math.sqrt(params.stationary_variance * -math.expm1(-2.0 * params.beta * dt))
    return decay, sd


def simulate_path(
    params: FlowParams,
    y0: float,
    leakage: Callable[[float, float], float],
    dt: float,
    horizon: float,
    seed: int,
    path_index: int = 0,
) -> FlowPath:
    """Sample one imbalance path.

    ``leakage(t, y)`` returns the drain rate phi applied over [t, t+dt); the
    update is the exact OU transition composed with the explicit Euler
    deduction phi*dt.  Reproducible given (seed, path_index).
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    n_steps = math.ceil(horizon / dt)
    rng = _path_rng(seed, path_index)
    decay, sd = step_moments(params, dt)

    values = np.empty(n_steps + 1)
    values[0] = y0
    y = y0
    for k in range(n_steps):
        phi = float(leakage(k * dt, y))
        if not math.isfinite(phi):
            raise SimulationError(
                f"leakage callback returned {phi} at step {k} (t={k * dt:.6g})",
                step=k,
            )
        y = y * decay - phi * dt + sd * rng.standard_normal()
        values[k + 1] = y
    times = np.arange(n_steps + 1) * dt
    return FlowPath(times=times, values=values)


def simulate_paths(
    params: FlowParams,
    y0: float,
    leakage: Callable[[float, np.ndarray], np.ndarray],
    dt: float,
    horizon: float,
    n_paths: int,
    seed: int,
) -> np.ndarray:
    """Batch variant of :func:`simulate_path`; returns (n_steps+1, n_paths).

    Columns share one counter-based generator keyed by ``seed`` (row k holds
    the k-th increment of every path), which is what the Monte Carlo engine
    uses for common random numbers across strategies.
    """
    if dt <= 0 or horizon <= 0:
        raise ValueError("dt and horizon must be > 0")
    n_steps = math.ceil(horizon / dt)
    rng = np.random.Generator(np.random.Philox(seed))
    decay, sd = step_moments(params, dt)

    out = np.empty((n_steps + 1, n_paths))
    out[0] = y0
    y = np.full(n_paths, float(y0))
    for k in range(n_steps):
        phi = np.asarray(leakage(k * dt, y), dtype=float)
        if not np.all(np.isfinite(phi)):
            raise SimulationError(f"leakage callback returned non-finite value at step {k}", step=k)
        y = y * decay - phi * dt + sd * rng.standard_normal(n_paths)
        out[k + 1] = y
    return out
