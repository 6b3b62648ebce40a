"""Spatial discretization of the real line on a truncated symmetric interval.

Provides the uniform grid with 4th-order finite-difference operators,
trapezoid quadrature, the eps-weighted inner products of the two-component
state space, and the translation operator used to shift fields along the
axis. The continuum problem lives on the whole line; the grid truncates it
to [-L, L] with decaying fields, so homogeneous Dirichlet data at the ends
is the default boundary treatment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline


class GridMismatchError(ValueError):
    """Two fields that must share a grid do not."""


class OutOfWindowError(ValueError):
    """A translation would push significant mass off the truncated domain."""


def fd_weights(x: np.ndarray, x0: float, deriv: int) -> np.ndarray:
    """Finite-difference weights for the ``deriv``-th derivative at ``x0``.

    Fornberg's recursion on arbitrary nodes ``x``; exact for polynomials of
    degree ``len(x) - 1``.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if deriv >= n:
        raise ValueError("need more nodes than the derivative order")
    c = np.zeros((n, deriv + 1))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, deriv)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, deriv]


def _diff_matrix(n: int, h: float, deriv: int) -> sp.csr_matrix:
    """4th-order differentiation matrix: centered interior, one-sided ends."""
    interior = fd_weights(np.arange(-2, 3) * h, 0.0, deriv)
    edge_pts = 5 if deriv == 1 else 6  # one extra node keeps the D2 closure 4th order
    rows, cols, vals = [], [], []
    for i in range(n):
        if 2 <= i <= n - 3:
            idx = np.arange(i - 2, i + 3)
            w = interior
        elif i < 2:
            idx = np.arange(edge_pts)
            w = fd_weights(idx * h, i * h, deriv)
        else:
            idx = np.arange(n - edge_pts, n)
            w = fd_weights((idx - idx[0]) * h, (i - idx[0]) * h, deriv)
        rows.extend([i] * len(idx))
        cols.extend(idx.tolist())
        vals.extend(w.tolist())
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


class Grid:
    """Uniform mesh on [-L, L] with difference operators and quadrature.

    Attributes:
        half_width: L, the domain is [-L, L]
        n_points:   number of nodes N
        bc:         'dirichlet0' or 'neumann0'; controls which nodes the
                    evolution/eigenvalue operators treat as unknowns
        x:          node coordinates, shape (N,)
        h:          spacing 2L/(N-1)
        D1, D2:     sparse first/second difference operators (full grid)
        w:          trapezoid quadrature weights, shape (N,)

    Instances are immutable by convention and safe to share.
    """

    def __init__(self, half_width: float, n_points: int, bc: str = "dirichlet0"):
        if n_points < 5:
            raise ValueError(f"n_points must be >= 5, got {n_points}")
        if half_width <= 0:
            raise ValueError(f"half_width must be positive, got {half_width}")
        if bc not in ("dirichlet0", "neumann0"):
            raise ValueError(f"unknown bc {bc!r}")
        self.half_width = float(half_width)
        self.n_points = int(n_points)
        self.bc = bc
        self.x = np.linspace(-self.half_width, self.half_width, self.n_points)
        self.h = 2.0 * self.half_width / (self.n_points - 1)
        self.D1 = _diff_matrix(self.n_points, self.h, 1)
        self.D2 = _diff_matrix(self.n_points, self.h, 2)
        self.w = np.full(self.n_points, self.h)
        self.w[0] = self.w[-1] = 0.5 * self.h

    def __repr__(self):
        return f"Grid(L={self.half_width}, N={self.n_points}, bc={self.bc!r})"

    def compatible(self, other: "Grid") -> bool:
        return (
            self.n_points == other.n_points
            and self.half_width == other.half_width
            and self.bc == other.bc
        )

    @property
    def interior(self) -> slice:
        """Unknown nodes for operators: Dirichlet drops the two end nodes."""
        return slice(1, -1) if self.bc == "dirichlet0" else slice(0, self.n_points)

    def field(self, values) -> np.ndarray:
        """Validate and return a scalar field living on this grid."""
        arr = np.asarray(values, dtype=float)
        if arr.shape != (self.n_points,):
            raise GridMismatchError(
                f"field has shape {arr.shape}, grid has {self.n_points} nodes"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("field contains non-finite entries")
        return arr

    def integrate(self, values: np.ndarray) -> float:
        """Trapezoid quadrature of a nodal field over [-L, L]."""
        return float(self.w @ values)


@dataclass
class StateUV:
    """A pair (u, v) of scalar fields on one grid."""

    grid: Grid
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = self.grid.field(self.u)
        self.v = self.grid.field(self.v)

    @classmethod
    def zeros(cls, grid: Grid) -> "StateUV":
        return cls(grid, np.zeros(grid.n_points), np.zeros(grid.n_points))

    def copy(self) -> "StateUV":
        return StateUV(self.grid, self.u.copy(), self.v.copy())

    def __add__(self, other: "StateUV") -> "StateUV":
        _check_shared_grid(self, other)
        return StateUV(self.grid, self.u + other.u, self.v + other.v)

    def __sub__(self, other: "StateUV") -> "StateUV":
        _check_shared_grid(self, other)
        return StateUV(self.grid, self.u - other.u, self.v - other.v)

    def __mul__(self, scalar: float) -> "StateUV":
        return StateUV(self.grid, scalar * self.u, scalar * self.v)

    __rmul__ = __mul__

    def __neg__(self) -> "StateUV":
        return StateUV(self.grid, -self.u, -self.v)

    def stack(self) -> np.ndarray:
        """Concatenated [u; v] vector of length 2N."""
        return np.concatenate([self.u, self.v])

    @classmethod
    def from_stack(cls, grid: Grid, y: np.ndarray) -> "StateUV":
        n = grid.n_points
        return cls(grid, y[:n].copy(), y[n:].copy())


@dataclass(frozen=True)
class SpaceWeights:
    """eps-weighting and normalization of the state-space inner products.

    Z is the reciprocal of the weighted energy of the pulse derivative; it
    is 1.0 until a wave profile fixes it.
    """

    eps: float
    Z: float = 1.0

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.Z <= 0:
            raise ValueError("Z must be positive")


def _check_shared_grid(a: StateUV, b: StateUV):
    if a.grid is not b.grid and not a.grid.compatible(b.grid):
        raise GridMismatchError(f"grids differ: {a.grid} vs {b.grid}")


def inner_h(a: StateUV, b: StateUV, w: SpaceWeights) -> float:
    """Weighted L2 pairing:  Z * integral(eps * a_u b_u + a_v b_v)."""
    _check_shared_grid(a, b)
    g = a.grid
    return w.Z * (w.eps * float((g.w * a.u) @ b.u) + float((g.w * a.v) @ b.v))


def inner_v(a: StateUV, b: StateUV, w: SpaceWeights) -> float:
    """inner_h plus the eps-weighted pairing of the u-derivatives."""
    _check_shared_grid(a, b)
    g = a.grid
    du_a, du_b = g.D1 @ a.u, g.D1 @ b.u
    return inner_h(a, b, w) + w.Z * w.eps * float((g.w * du_a) @ du_b)


def inner_vv(a: StateUV, b: StateUV, w: SpaceWeights) -> float:
    """inner_v plus the pairing of the v-derivatives (strong norm)."""
    _check_shared_grid(a, b)
    g = a.grid
    dv_a, dv_b = g.D1 @ a.v, g.D1 @ b.v
    return inner_v(a, b, w) + w.Z * float((g.w * dv_a) @ dv_b)


def norm_h(a: StateUV, w: SpaceWeights) -> float:
    return float(np.sqrt(max(inner_h(a, a, w), 0.0)))


def norm_v(a: StateUV, w: SpaceWeights) -> float:
    return float(np.sqrt(max(inner_v(a, a, w), 0.0)))


def norm_vv(a: StateUV, w: SpaceWeights) -> float:
    return float(np.sqrt(max(inner_vv(a, a, w), 0.0)))


def translate_field(grid: Grid, values: np.ndarray, c: float) -> np.ndarray:
    """Shift one scalar field: result(x) = values(x + c), zero off-domain."""
    if abs(c) >= grid.half_width / 2:
        raise OutOfWindowError(
            f"|c|={abs(c):g} exceeds half the window half-width {grid.half_width / 2:g}"
        )
    if c == 0.0:
        return values.copy()
    spline = CubicSpline(grid.x, values)
    xs = grid.x + c
    out = spline(xs)
    out[(xs < grid.x[0]) | (xs > grid.x[-1])] = 0.0
    return out


def translate(a: StateUV, c: float) -> StateUV:
    """Translation T_c: (T_c Y)(x) = Y(x + c), cubic-spline interpolated.

    Values requested outside [-L, L] are filled with 0; the fields this is
    used on have exponentially decaying tails, so the fill error is at the
    level of the truncation itself. Requires |c| < L/2.
    """
    return StateUV(
        a.grid,
        translate_field(a.grid, a.u, c),
        translate_field(a.grid, a.v, c),
    )
