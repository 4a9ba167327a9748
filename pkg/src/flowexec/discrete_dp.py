"""Discrete-time, volume-bucket execution with participation-rate controls.

Time advances one volume bucket of V shares per step; the trader picks a
participation rate alpha in (0, 1] and sells alpha * V into the bucket.
Participation displaces other volume, so the next bucket imbalance drops by
alpha * psi(alpha) * (Y + 1) on top of the exogenous dynamics
F(y, eps) = y * exp(-beta * bucket_time) + eps, where eps is a truncated
Gaussian keeping Y inside [-1, 1].

The indefinite-horizon value is recovered by backward dynamic programming
against the terminal cost H(x) = a_term * x^2 (one-shot liquidation); since
the minimum participation liquidates any on-grid inventory in finitely many
buckets, the iteration reaches an exact fixed point.

Grids are coupled so the inventory update never needs interpolation:
alpha_grid = {1/N, ..., 1} and x_grid holds multiples of V/N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import truncnorm

from .errors import SolverError
from .myopic import InventoryRisk
from .ou_flow import FlowParams

__all__ = ["DPModel", "ValueTable", "StationaryValue", "build_model", "value_iteration",
           "stationary_value", "bellman_update", "mean_next_imbalance"]


@dataclass
class DPModel:
    """Precomputed grids and transition kernel; treat as immutable."""

    y_grid: np.ndarray            # (ny,) imbalance levels in [-1, 1]
    x_grid: np.ndarray            # (nx,) inventory levels, multiples of V/N
    alpha_grid: np.ndarray        # (na,) participation rates (0, 1]
    bucket_volume: float
    kernel: np.ndarray            # (na, ny, ny): P(Y1 = y_grid[j'] | y_grid[j], alpha)
    kappa: float
    risk: InventoryRisk
    a_term: float
    psi: Callable[[float], float]
    noise_sd: float
    decay: float

    @property
    def shape(self):
        return len(self.x_grid), len(self.y_grid)

    def terminal_cost(self) -> np.ndarray:
        return self.a_term * self.x_grid**2

    def stage_cost(self) -> np.ndarray:
        """(na, nx, ny) cost alpha^2 + kappa y^2 + lambda(x) of one bucket."""
        a2 = (self.alpha_grid**2)[:, None, None]
        ky2 = (self.kappa * self.y_grid**2)[None, None, :]
        lam = self.risk.penalty(self.x_grid)[None, :, None]
        return a2 + ky2 + lam


def mean_next_imbalance(y, alpha, psi, decay: float):
    """Deterministic part of the bucket update: y decay minus displacement."""
    y = np.asarray(y, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    return y * decay - alpha * psi(alpha) * (y + 1.0)


def build_model(
    params: FlowParams,
    risk: InventoryRisk,
    bucket_volume: float = 1.0,
    n_alpha: int = 20,
    n_y: int = 41,
    x_max_buckets: float = 2.0,
    psi: Callable[[float], float] = None,
    bucket_time: float = 1.0,
    n_quantiles: int = 400,
    a_term: float = 1.0,
) -> DPModel:
    """Assemble grids and the Markov-chain approximation of the Y transition.

    The noise quantiles of the truncated Gaussian are snapped to the nearest
    imbalance level, so kernel rows sum to one by construction.
    """
    if bucket_volume <= 0:
        raise ValueError("bucket volume must be > 0")
    if n_alpha < 1 or n_y < 2:
        raise ValueError("grids must be non-empty")
    if psi is None:
        psi = lambda a: np.asarray(a, dtype=float)
    y_grid = np.linspace(-1.0, 1.0, n_y)
    alpha_grid = np.arange(1, n_alpha + 1) / n_alpha
    n_x_steps = int(round(x_max_buckets * n_alpha))
    x_grid = (bucket_volume / n_alpha) * np.arange(n_x_steps + 1)

    psi_vals = np.asarray(psi(alpha_grid), dtype=float)
    if np.any(psi_vals < 0) or np.any(psi_vals > 1) or np.any(np.diff(psi_vals) < 0):
        raise ValueError("psi must be non-decreasing with values in [0, 1]")

    decay = math.exp(-params.beta * bucket_time)
    noise_var = params.stationary_variance * -math.expm1(-2.0 * params.beta * bucket_time)
    noise_sd = math.sqrt(noise_var)

    span = y_grid[-1] - y_grid[0]
    shifts = alpha_grid * psi_vals  # displacement coefficient per alpha
    if np.any(shifts * (np.abs(y_grid).max() + 1.0) > span + 1e-12):
        raise SolverError("leakage shift exceeds the imbalance grid span; refine the grid")

    # mu[m, j]: deterministic next-step mean given (alpha_m, y_j).
    mu = mean_next_imbalance(y_grid[None, :], alpha_grid[:, None], psi, decay)
    na, ny = n_alpha, n_y
    kernel = np.zeros((na, ny, ny))
    probs = (np.arange(n_quantiles) + 0.5) / n_quantiles
    if noise_sd == 0.0:
        samples = mu[..., None] * np.ones(n_quantiles)
    else:
        lo = (y_grid[0] - mu) / noise_sd
        hi = (y_grid[-1] - mu) / noise_sd
        samples = truncnorm.ppf(probs[None, None, :], lo[..., None], hi[..., None],
                                loc=mu[..., None], scale=noise_sd)
    idx = np.clip(np.rint((samples - y_grid[0]) / (y_grid[1] - y_grid[0])).astype(int), 0, ny - 1)
    for m in range(na):
        for j in range(ny):
            counts = np.bincount(idx[m, j], minlength=ny)
            kernel[m, j] = counts / n_quantiles

    return DPModel(
        y_grid=y_grid, x_grid=x_grid, alpha_grid=alpha_grid,
        bucket_volume=bucket_volume, kernel=kernel, kappa=params.kappa,
        risk=risk, a_term=a_term, psi=psi, noise_sd=noise_sd, decay=decay,
    )


@dataclass
class ValueTable:
    """Stage values v^(t) and the minimizing participation rates."""

    values: np.ndarray    # (t_max+1, nx, ny); values[0] is the terminal cost
    policies: np.ndarray  # (t_max, nx, ny); rate chosen at each stage, 0 at x=0


@dataclass
class StationaryValue:
    value: np.ndarray
    policy: np.ndarray
    converged: bool
    gap: float
    iterations: int


def bellman_update(model: DPModel, v_prev: np.ndarray):
    """One backward step of the dynamic program; returns (v_next, policy)."""
    nx, ny = model.shape
    na = len(model.alpha_grid)
    stage = model.stage_cost()
    cand = np.full((na, nx, ny), np.inf)
    for m in range(na):
        shift = m + 1  # selling alpha_m V moves the inventory index down by m+1
        if shift >= nx:
            break
        ev = v_prev[: nx - shift] @ model.kernel[m].T
        cand[m, shift:, :] = stage[m, shift:, :] + ev
    v_next = cand.min(axis=0)
    policy = model.alpha_grid[cand.argmin(axis=0)]
    v_next[0, :] = 0.0
    policy[0, :] = 0.0
    return v_next, policy


def value_iteration(model: DPModel, t_max: int) -> ValueTable:
    """Backward recursion for t_max stages from the terminal cost H."""
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    nx, ny = model.shape
    values = np.empty((t_max + 1, nx, ny))
    policies = np.empty((t_max, nx, ny))
    v = np.broadcast_to(model.terminal_cost()[:, None], (nx, ny)).copy()
    v[0, :] = 0.0
    values[0] = v
    for t in range(1, t_max + 1):
        v, pol = bellman_update(model, v)
        values[t] = v
        policies[t - 1] = pol
    return ValueTable(values=values, policies=policies)


def stationary_value(model: DPModel, tol: float = 1e-6, t_cap: int = 500) -> StationaryValue:
    """Iterate the Bellman update until the sup-norm gap falls below tol.

    Liquidation consumes at least V/N inventory per bucket, so the horizon
    constraint stops binding after finitely many stages and the gap drops to
    zero exactly; non-convergence within t_cap is reported, not raised.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    nx, ny = model.shape
    v = np.broadcast_to(model.terminal_cost()[:, None], (nx, ny)).copy()
    v[0, :] = 0.0
    gap = math.inf
    policy = np.zeros_like(v)
    for it in range(1, t_cap + 1):
        v_next, policy = bellman_update(model, v)
        gap = float(np.max(np.abs(v_next - v)))
        v = v_next
        if gap < tol:
            return StationaryValue(value=v, policy=policy, converged=True, gap=gap, iterations=it)
    return StationaryValue(value=v, policy=policy, converged=False, gap=gap, iterations=t_cap)


def write_policy_csv(result: StationaryValue, model: DPModel, path):
    with open(path, "w") as fh:
        fh.write("x,y,alpha,v\n")
        for i, x in enumerate(model.x_grid):
            for j, y in enumerate(model.y_grid):
                fh.write(f"{x:.12g},{y:.12g},{result.policy[i, j]:.12g},{result.value[i, j]:.12g}\n")
