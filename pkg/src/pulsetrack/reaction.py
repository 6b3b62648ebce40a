"""Bistable reaction nonlinearity with a polynomial-decay cutoff at minus infinity.

The core nonlinearity is the cubic w (1 - w) (w - a) with 0 < a < 1. To keep
it globally well-behaved it is multiplied by a cutoff chi(w) that equals 1 on
[-c1, inf), equals c2^2 / w^2 on (-inf, -c2], and is bridged smoothly in
between. The bridge interpolates the two branches of f = chi * cubic directly
with a quintic Hermite polynomial matching value, first, and second
derivative at both joints, so f is C^2 everywhere and f1/f2 below are the
exact derivatives of the implemented f, not of the uncut cubic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _cubic(w, a):
    return w * (1.0 - w) * (w - a)


def _cubic_d1(w, a):
    return -3.0 * w**2 + 2.0 * (1.0 + a) * w - a


def _cubic_d2(w, a):
    return -6.0 * w + 2.0 * (1.0 + a)


def _left(w, a, c2):
    # (c2^2 / w^2) * w (1-w)(w-a)  ==  c2^2 (1 + a - a/w - w)
    return c2**2 * (1.0 + a - a / w - w)


def _left_d1(w, a, c2):
    return c2**2 * (a / w**2 - 1.0)


def _left_d2(w, a, c2):
    return c2**2 * (-2.0 * a / w**3)


def _quintic_hermite(w0, f0, d0, s0, w1, f1_, d1, s1):
    """Coefficients of the degree-5 polynomial with given value/slope/curvature
    at w0 and w1, in the local variable t = w - w0."""
    L = w1 - w0
    # rows: value/d1/d2 at t=0 and t=L applied to sum c_k t^k
    A = np.zeros((6, 6))
    A[0, 0] = 1.0
    A[1, 1] = 1.0
    A[2, 2] = 2.0
    powers = L ** np.arange(6)
    A[3, :] = powers
    A[4, 1:] = np.arange(1, 6) * L ** np.arange(5)
    A[5, 2:] = np.arange(2, 6) * np.arange(1, 5) * L ** np.arange(4)
    rhs = np.array([f0, d0, s0, f1_, d1, s1])
    return np.linalg.solve(A, rhs)


@dataclass
class ReactionParams:
    """Parameters of the cut-off bistable cubic.

    a is the middle zero of the cubic; c1 < c2 bound the bridge interval
    [-c2, -c1] on which the cutoff interpolates between 1 and c2^2/w^2.
    """

    a: float = 0.25
    c1: float = 2.0
    c2: float = 3.0
    _bridge: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"a must be in (0, 1), got {self.a}")
        if not 1.0 < self.c1 < self.c2:
            raise ValueError(f"need 1 < c1 < c2, got c1={self.c1}, c2={self.c2}")
        w0, w1 = -self.c2, -self.c1
        self._bridge = _quintic_hermite(
            w0,
            _left(w0, self.a, self.c2),
            _left_d1(w0, self.a, self.c2),
            _left_d2(w0, self.a, self.c2),
            w1,
            _cubic(w1, self.a),
            _cubic_d1(w1, self.a),
            _cubic_d2(w1, self.a),
        )


def _piecewise(w, p: ReactionParams, cubic_fn, left_fn, bridge_deriv: int):
    w_arr = np.asarray(w, dtype=float)
    out = np.empty_like(w_arr)
    right = w_arr >= -p.c1
    left = w_arr <= -p.c2
    mid = ~(right | left)
    out[right] = cubic_fn(w_arr[right], p.a)
    out[left] = left_fn(w_arr[left], p.a, p.c2)
    if np.any(mid):
        t = w_arr[mid] + p.c2
        coeffs = np.polynomial.polynomial.polyder(p._bridge, bridge_deriv) if bridge_deriv else p._bridge
        out[mid] = np.polynomial.polynomial.polyval(t, coeffs)
    return out if np.ndim(w) else float(out)


def f(w, p: ReactionParams):
    """Reaction term chi(w) * w (1 - w) (w - a); total on the real line."""
    return _piecewise(w, p, _cubic, _left, 0)


def f1(w, p: ReactionParams):
    """First derivative of the implemented (cut-off) reaction term."""
    return _piecewise(w, p, _cubic_d1, _left_d1, 1)


def f2(w, p: ReactionParams):
    """Second derivative of the implemented (cut-off) reaction term."""
    return _piecewise(w, p, _cubic_d2, _left_d2, 2)


@dataclass(frozen=True)
class EtaBounds:
    """Sampled suprema of the growth/difference ratios that the global
    assumptions on f require to be finite."""

    eta1: float
    eta2: float
    eta3: float
    eta4: float
    eta5: float
    eta6: float
    eta7: float

    def as_dict(self):
        return {k: getattr(self, k) for k in ("eta1", "eta2", "eta3", "eta4", "eta5", "eta6", "eta7")}


def eta_bounds(p: ReactionParams, box: float, n: int = 400) -> EtaBounds:
    """Sampled suprema of the seven defining ratios on [-box, box]^2.

    One-variable quantities use a dense 1-D grid of n*n points; two-variable
    ratios use an n-by-n lattice with the singular diagonals masked out.
    Sampled suprema lower-bound the true ones; finiteness of the result is
    the point.
    """
    if box <= 0:
        raise ValueError("box must be positive")
    w_dense = np.linspace(-box, box, n * n)
    eta1 = float(np.max(f1(w_dense, p)))
    eta3 = float(np.max(np.abs(f1(w_dense, p)) / (1.0 + w_dense**2)))

    w = np.linspace(-box, box, n)
    w1g, w2g = np.meshgrid(w, w, indexing="ij")
    fw1, fw2 = f(w1g, p), f(w2g, p)
    d1w1, d1w2 = f1(w1g, p), f1(w2g, p)
    d2w1, d2w2 = f2(w1g, p), f2(w2g, p)
    fsum = f(w1g + w2g, p)
    d1sum = f1(w1g + w2g, p)

    nz2 = np.abs(w2g) > 1e-12
    diff = np.abs(w1g - w2g) > 1e-12

    def sup(num, den, mask):
        r = np.zeros_like(num)
        r[mask] = np.abs(num[mask]) / den[mask]
        return float(np.max(r))

    eta2 = sup(fsum - fw1 - d1w1 * w2g, (1.0 + np.abs(w1g) + np.abs(w2g)) * w2g**2, nz2)
    eta4 = sup(fw1 - fw2, np.abs(w1g - w2g) * (1.0 + w1g**2 + w2g**2), diff)
    eta5 = sup(d1sum - d1w1 - d2w1 * w2g, w2g**2, nz2)
    eta6 = sup(d1w1 - d1w2, np.abs(w1g - w2g) * (1.0 + np.abs(w1g) + np.abs(w2g)), diff)
    eta7 = sup(d2w1 - d2w2, np.abs(w1g - w2g), diff)
    return EtaBounds(eta1, eta2, eta3, eta4, eta5, eta6, eta7)
