"""Indefinite-horizon value by explicit finite differences, marching in x.

Substituting the feedback rate alpha* = (v_x + eta v_y)/2 into the
stationary HJB equation and solving for v_x gives

    v_x = 2 sqrt(kappa y^2 + lambda(x) - beta y v_y + (sigma^2/2) v_yy)
          - eta v_y,

so the value surface can be marched upward in inventory from the boundary
row v(0, y) = 0, one explicit step of size dx at a time.  Central
differences are used in y; at the two y-edges the surface is extended
linearly (v_yy = 0).  The scheme is valid while the radicand stays
nonnegative, i.e. while the unconstrained feedback rate is positive; a
negative radicand aborts the march rather than silently corrupting the
surface.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .errors import SolverError
from .myopic import InventoryRisk
from .ou_flow import FlowParams

__all__ = ["GridSpec", "ValueSurface", "solve_indefinite", "feedback_rate"]

# Stationary probability mass allowed outside the y-bounds.
_MASS_TOL = 1e-6


@dataclass(frozen=True)
class GridSpec:
    """Rectangular (inventory x imbalance) grid for the marching scheme."""

    n_x: int
    dx: float
    n_y: int
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if self.n_x < 1 or self.n_y < 4:
            raise ValueError("grid too small")
        if self.dx <= 0:
            raise ValueError("dx must be > 0")
        if not self.y_lo < 0.0 < self.y_hi:
            raise ValueError("y bounds must straddle zero")

    @property
    def dy(self) -> float:
        return (self.y_hi - self.y_lo) / self.n_y

    @property
    def x_max(self) -> float:
        return self.n_x * self.dx

    def x_nodes(self) -> np.ndarray:
        return self.dx * np.arange(self.n_x + 1)

    def y_nodes(self) -> np.ndarray:
        return self.y_lo + self.dy * np.arange(self.n_y + 1)

    @classmethod
    def default(cls, params: FlowParams, x_max: float, n_x: int = 1000, n_y: int = 160):
        """dx = x_max/n_x (1e-3 x_max by default), y spanning +/- 5 stationary sd.

        The explicit march amplifies checkerboard noise unless
        dx <= sqrt(radicand) dy^2 / sigma^2, so dy cannot be made small
        relative to dx; n_y = 160 leaves a 4x stability margin at the default
        dx and a 2x margin after one simultaneous (dx, dy) halving.
        """
        span = 5.0 * np.sqrt(params.stationary_variance)
        return cls(n_x=n_x, dx=x_max / n_x, n_y=n_y, y_lo=-span, y_hi=span)


@dataclass
class ValueSurface:
    """Solved surface v_{i,j} plus the difference-quotient fields used by the
    feedback rate; treat as immutable."""

    grid: GridSpec
    values: np.ndarray            # (n_x+1, n_y+1)
    params: FlowParams
    risk: InventoryRisk
    _vx: np.ndarray = field(default=None, repr=False)
    _vy: np.ndarray = field(default=None, repr=False)

    def _quotients(self):
        if self._vx is None:
            v = self.values
            dx, dy = self.grid.dx, self.grid.dy
            vx = np.empty_like(v)
            vx[:-1] = (v[1:] - v[:-1]) / dx      # forward, matching the march
            vx[-1] = vx[-2]
            vy = np.empty_like(v)
            vy[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2.0 * dy)
            vy[:, 0] = (v[:, 1] - v[:, 0]) / dy
            vy[:, -1] = (v[:, -1] - v[:, -2]) / dy
            self._vx, self._vy = vx, vy
        return self._vx, self._vy

    def _locate(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        g = self.grid
        if np.any(x < -1e-12) or np.any(x > g.x_max + 1e-12):
            raise ValueError("inventory query outside the solved grid")
        if np.any(y < g.y_lo - 1e-12) or np.any(y > g.y_hi + 1e-12):
            raise ValueError("imbalance query outside the solved grid")
        fx = np.clip(x / g.dx, 0.0, g.n_x)
        fy = np.clip((y - g.y_lo) / g.dy, 0.0, g.n_y)
        ix = np.minimum(fx.astype(int), g.n_x - 1)
        iy = np.minimum(fy.astype(int), g.n_y - 1)
        return ix, iy, fx - ix, fy - iy

    def _bilinear(self, field2d, x, y):
        ix, iy, tx, ty = self._locate(x, y)
        f00 = field2d[ix, iy]
        f10 = field2d[ix + 1, iy]
        f01 = field2d[ix, iy + 1]
        f11 = field2d[ix + 1, iy + 1]
        out = (
            f00 * (1 - tx) * (1 - ty)
            + f10 * tx * (1 - ty)
            + f01 * (1 - tx) * ty
            + f11 * tx * ty
        )
        return float(out) if out.ndim == 0 else out

    def value(self, x, y):
        """Bilinear interpolation of v at (x, y); vectorized."""
        return self._bilinear(self.values, x, y)

    def write_csv(self, path, stride_x: int = 1, stride_y: int = 1):
        xs, ys = self.grid.x_nodes(), self.grid.y_nodes()
        with open(path, "w") as fh:
            fh.write("x,y,v\n")
            for i in range(0, len(xs), stride_x):
                for j in range(0, len(ys), stride_y):
                    fh.write(f"{xs[i]:.12g},{ys[j]:.12g},{self.values[i, j]:.12g}\n")

    def write_binary(self, path):
        """Header (n_x, n_y, dx, dy, y_lo) followed by row-major float64 values."""
        with open(path, "wb") as fh:
            fh.write(struct.pack("<qqddd", self.grid.n_x, self.grid.n_y,
                                 self.grid.dx, self.grid.dy, self.grid.y_lo))
            fh.write(self.values.astype("<f8").tobytes())

    @classmethod
    def read_binary(cls, path, params: FlowParams, risk: InventoryRisk):
        with open(path, "rb") as fh:
            n_x, n_y, dx, dy, y_lo = struct.unpack("<qqddd", fh.read(40))
            values = np.frombuffer(fh.read(), dtype="<f8").reshape(n_x + 1, n_y + 1)
        grid = GridSpec(n_x=n_x, dx=dx, n_y=n_y, y_lo=y_lo, y_hi=y_lo + n_y * dy)
        return cls(grid=grid, values=values.copy(), params=params, risk=risk)


def solve_indefinite(params: FlowParams, risk: InventoryRisk, grid: GridSpec) -> ValueSurface:
    """March the value surface upward in inventory from v(0, y) = 0."""
    sd = np.sqrt(params.stationary_variance)
    if sd > 0:
        outside = norm.cdf(grid.y_lo / sd) + norm.sf(grid.y_hi / sd)
        if outside > _MASS_TOL:
            raise ValueError(
                f"stationary mass outside the y-bounds is {outside:.2e} > {_MASS_TOL:g}; "
                "widen [y_lo, y_hi] to at least 5 standard deviations"
            )

    beta, sigma, kappa, eta = params.beta, params.sigma, params.kappa, params.eta
    ys = grid.y_nodes()
    dy, dx = grid.dy, grid.dx
    y_int = ys[1:-1]
    source = kappa * y_int * y_int

    v = np.zeros((grid.n_x + 1, grid.n_y + 1))
    row = v[0]
    for i in range(grid.n_x):
        lam = float(risk.penalty(i * dx))
        d1 = (row[2:] - row[:-2]) / (2.0 * dy)
        d2 = (row[2:] - 2.0 * row[1:-1] + row[:-2]) / (dy * dy)
        radicand = source + lam - beta * y_int * d1 + 0.5 * sigma * sigma * d2
        if np.any(radicand < 0.0):
            j = 1 + int(np.argmin(radicand))
            raise SolverError(
                f"negative radicand at grid point (i={i}, j={j}) "
                f"(x={i * dx:.6g}, y={ys[j]:.6g}): the unconstrained feedback "
                "rate is not positive there; widen the y-bounds or reduce dx"
            )
        nxt = v[i + 1]
        nxt[1:-1] = row[1:-1] + dx * (2.0 * np.sqrt(radicand) - eta * d1)
        # Linear extension at the y-edges realizes v_yy = 0.
        nxt[0] = 2.0 * nxt[1] - nxt[2]
        nxt[-1] = 2.0 * nxt[-2] - nxt[-3]
        row = nxt

    return ValueSurface(grid=grid, values=v, params=params, risk=risk)


def feedback_rate(surface: ValueSurface, x, y, clamp: bool = True):
    """alpha*(x, y) = max(0, (v_x + eta v_y)/2) from interpolated quotients.

    The forward/central difference quotients are formed on the grid and then
    interpolated bilinearly, which keeps the rate continuous across cells.
    Queries outside the grid raise ValueError.
    """
    vx, vy = surface._quotients()
    gx = surface._bilinear(vx, x, y)
    gy = surface._bilinear(vy, x, y)
    alpha = 0.5 * (gx + surface.params.eta * gy)
    if clamp:
        alpha = np.maximum(alpha, 0.0)
    return float(alpha) if np.ndim(alpha) == 0 else alpha
