"""Fixed-horizon linear-quadratic value via a matrix Riccati ODE system.

With quadratic impact, proportional leakage and inventory risk of the form
c x^2 (variant DH) or constant c (variant DL), the fixed-horizon value is the
polynomial

    u(T, x, y) = x^2 A(T) + y^2 B(T) + x y C(T) + F(T),

whose coefficients solve, in time-to-go T,

    A' = -A^2 - eta A C - (eta^2/4) C^2 [+ c in DH]
    B' = -eta^2 B^2 - B (eta C + 2 beta) + kappa - C^2/4
    C' = -(eta/2) C^2 - C (eta^2 B + A + beta) - 2 eta A B
    F' = sigma^2 B            [+ c in DL]

The terminal condition is singular (A -> infinity as T -> 0), so the first
boundary-layer interval [0, epsilon] is replaced by the short-time expansion

    A = 1/eps,  B = kappa eps,  C = -eta kappa eps,  F = sigma^2 kappa eps^2/2,

and the system is integrated from tau = eps by classical fixed-step RK4.
The fixed step keeps the coefficient grid uniform for interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import SolverError
from .myopic import InventoryRisk
from .ou_flow import FlowParams

__all__ = ["RiccatiCoefficients", "solve_riccati", "value_uD", "rate_alphaD", "pde_residual"]


@dataclass
class RiccatiCoefficients:
    """Solved coefficient grids on [epsilon, tau_max]; treat as immutable."""

    variant: str                 # 'DH' (quadratic risk) or 'DL' (constant risk)
    epsilon: float
    step: float
    tau: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    F: np.ndarray
    params: FlowParams
    risk: InventoryRisk
    _splines: dict = field(default_factory=dict, repr=False)

    @property
    def tau_max(self) -> float:
        return float(self.tau[-1])

    def _spline(self, name: str) -> PchipInterpolator:
        # Cubic-monotone interpolation avoids overshoot near the 1/tau layer.
        if name not in self._splines:
            self._splines[name] = PchipInterpolator(self.tau, getattr(self, name), extrapolate=False)
        return self._splines[name]

    def _check_range(self, tau):
        tau = np.asarray(tau, dtype=float)
        if np.any(tau < self.epsilon - 1e-12) or np.any(tau > self.tau_max + 1e-12):
            raise ValueError(
                f"time-to-go outside the solved range [{self.epsilon:g}, {self.tau_max:g}]"
            )
        return np.clip(tau, self.epsilon, self.tau_max)

    def coeffs(self, tau):
        """(A, B, C, F) interpolated at tau; vectorized."""
        tau = self._check_range(tau)
        return tuple(self._spline(n)(tau) for n in "ABCF")

    def write_csv(self, path, stride: int = 1):
        with open(path, "w") as fh:
            fh.write("tau,A,B,C,F\n")
            for k in range(0, len(self.tau), stride):
                fh.write(
                    f"{self.tau[k]:.12g},{self.A[k]:.12g},{self.B[k]:.12g},"
                    f"{self.C[k]:.12g},{self.F[k]:.12g}\n"
                )


def solve_riccati(
    params: FlowParams,
    risk: InventoryRisk,
    t_max: float,
    epsilon: float = 1e-3,
    step: float = 1e-4,
) -> RiccatiCoefficients:
    """Integrate the coefficient system from the boundary layer out to t_max."""
    if risk.kind == "quadratic":
        variant, c_quad, c_flat = "DH", risk.c, 0.0
    elif risk.kind == "constant":
        variant, c_quad, c_flat = "DL", 0.0, risk.c
    else:
        raise ValueError(
            "riccati solver supports quadratic or constant inventory risk only "
            f"(got {risk.kind!r}); linear risk admits unconstrained buying"
        )
    if not 0.0 < epsilon < t_max:
        raise ValueError("need 0 < epsilon < t_max")
    if step > epsilon / 10.0 + 1e-15:
        raise ValueError("integrator step must be <= epsilon/10")

    beta, sigma, kappa, eta = params.beta, params.sigma, params.kappa, params.eta
    n = int(round((t_max - epsilon) / step))
    tau = epsilon + step * np.arange(n + 1)

    grid_a = np.empty(n + 1)
    grid_b = np.empty(n + 1)
    grid_c = np.empty(n + 1)
    grid_f = np.empty(n + 1)

    # Boundary-layer initial values from the short-time expansion.
    a = 1.0 / epsilon
    b = kappa * epsilon
    cc = -eta * kappa * epsilon
    f = 0.5 * sigma**2 * kappa * epsilon**2 + c_flat * epsilon
    grid_a[0], grid_b[0], grid_c[0], grid_f[0] = a, b, cc, f

    sig2 = sigma * sigma
    eta2 = eta * eta
    blow_up = 1.0 / epsilon**2

    def rhs(a, b, cc, f):
        da = -a * a - eta * a * cc - 0.25 * eta2 * cc * cc + c_quad
        db = -eta2 * b * b - b * (eta * cc + 2.0 * beta) + kappa - 0.25 * cc * cc
        dc = -0.5 * eta * cc * cc - cc * (eta2 * b + a + beta) - 2.0 * eta * a * b
        df = sig2 * b + c_flat
        return da, db, dc, df

    # Near the layer A ~ 1/tau, so the RK4 local error scales as h^5/tau^6;
    # stored nodes stay on the fixed step, but each stored step is integrated
    # with internal substeps until tau clears the layer.
    layer_end = 50.0 * epsilon
    for k in range(1, n + 1):
        m = 16 if tau[k - 1] < layer_end else 1
        h = step / m
        for _ in range(m):
            k1 = rhs(a, b, cc, f)
            k2 = rhs(a + 0.5 * h * k1[0], b + 0.5 * h * k1[1], cc + 0.5 * h * k1[2], f + 0.5 * h * k1[3])
            k3 = rhs(a + 0.5 * h * k2[0], b + 0.5 * h * k2[1], cc + 0.5 * h * k2[2], f + 0.5 * h * k2[3])
            k4 = rhs(a + h * k3[0], b + h * k3[1], cc + h * k3[2], f + h * k3[3])
            a += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            b += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            cc += h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
            f += h / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
        if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(cc) and math.isfinite(f)) or abs(a) > blow_up:
            raise SolverError(f"riccati integration blew up at tau = {tau[k]:.6g}")
        grid_a[k], grid_b[k], grid_c[k], grid_f[k] = a, b, cc, f

    return RiccatiCoefficients(
        variant=variant,
        epsilon=epsilon,
        step=step,
        tau=tau,
        A=grid_a,
        B=grid_b,
        C=grid_c,
        F=grid_f,
        params=params,
        risk=risk,
    )


def value_uD(coef: RiccatiCoefficients, T, x, y):
    """u(T, x, y) = x^2 A + y^2 B + x y C + F; vectorized over any argument."""
    a, b, c, f = coef.coeffs(T)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = x * x * a + y * y * b + x * y * c + f
    return float(out) if out.ndim == 0 else out


def rate_alphaD(coef: RiccatiCoefficients, tau, x, y, clamp: bool = False):
    """Feedback selling rate [x (2A + eta C) + y (C + 2 eta B)] / 2.

    With ``clamp`` the rate is floored at zero; callers that need the
    clamping frequency should compare against the unclamped value.
    """
    a, b, c, _ = coef.coeffs(tau)
    eta = coef.params.eta
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    alpha = 0.5 * (x * (2.0 * a + eta * c) + y * (c + 2.0 * eta * b))
    if clamp:
        alpha = np.maximum(alpha, 0.0)
    return float(alpha) if alpha.ndim == 0 else alpha


def pde_residual(coef: RiccatiCoefficients, T, x, y, params: FlowParams, risk: InventoryRisk):
    """Absolute residual of the value PDE at (T, x, y).

    Checks u_T = sigma^2 u_yy / 2 - beta y u_y + kappa y^2 + lambda(x)
                 - ((u_x + eta u_y) / 2)^2
    using the polynomial's exact spatial derivatives and central finite
    differences of the coefficient grids for u_T.  T snaps to the nearest
    interior grid node.
    """
    k = int(round((float(T) - coef.epsilon) / coef.step))
    k = min(max(k, 1), len(coef.tau) - 2)
    h = coef.step
    da = (coef.A[k + 1] - coef.A[k - 1]) / (2.0 * h)
    db = (coef.B[k + 1] - coef.B[k - 1]) / (2.0 * h)
    dc = (coef.C[k + 1] - coef.C[k - 1]) / (2.0 * h)
    df = (coef.F[k + 1] - coef.F[k - 1]) / (2.0 * h)
    a, b, c = coef.A[k], coef.B[k], coef.C[k]

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u_t = x * x * da + y * y * db + x * y * dc + df
    u_x = 2.0 * x * a + y * c
    u_y = 2.0 * y * b + x * c
    u_yy = 2.0 * b
    rhs = (
        0.5 * params.sigma**2 * u_yy
        - params.beta * y * u_y
        + params.kappa * y * y
        + risk.penalty(x)
        - (0.5 * (u_x + params.eta * u_y)) ** 2
    )
    res = np.abs(u_t - rhs)
    return float(res) if res.ndim == 0 else res
