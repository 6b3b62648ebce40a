"""Rank-1 spectral projections onto the translation mode, plus translates.

The projection onto the neutral direction is represented as
Pi0 y = <psi, y>_H * d1 where d1 is the pulse derivative (unit H norm) and
psi the adjoint zero mode normalized so the pairing with d1 equals one; the
complement is the identity minus that. A resolvent contour integral around
the origin provides an independent route to the same operator and is kept
as a validation oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import StateUV, inner_h, norm_h, translate
from .frozen import FrozenOperator, SpectrumReport


class ContourTooCloseError(RuntimeError):
    """A resolvent node sits too close to spectrum for a trustworthy solve."""


@dataclass
class ProjectionPair:
    """Rank-1 representation of the neutral-mode projection and complement."""

    phi_dir: StateUV  # pulse derivative, unit H norm
    psi: StateUV  # adjoint zero mode, <psi, phi_dir>_H = 1
    r: float  # contour radius inside the spectral gap
    weights: object

    def operator_norm(self) -> float:
        """H operator norm of the projection (= ||psi||_H since ||phi||=1)."""
        return norm_h(self.psi, self.weights)


def build_projection(fo: FrozenOperator, report: SpectrumReport) -> ProjectionPair:
    """Projection pair from a spectrum report.

    The direction is the profile derivative itself (unit norm by the choice
    of Z); the adjoint mode is renormalized against it so the rank-1 formula
    is exactly idempotent. The contour radius is half the distance from the
    origin to the nearest other spectrum, capped by the essential bound.
    """
    d1 = fo.profile.d1
    w = fo.weights
    psi = report.adjoint_zero_mode
    pairing = inner_h(psi, d1, w)
    psi = (1.0 / pairing) * psi
    r = 0.5 * min(abs(report.lambda_star), report.kappa)
    return ProjectionPair(phi_dir=d1, psi=psi, r=r, weights=w)


def proj0(pp: ProjectionPair, y: StateUV) -> StateUV:
    """Component along the translation mode."""
    return inner_h(pp.psi, y, pp.weights) * pp.phi_dir


def projC(pp: ProjectionPair, y: StateUV) -> StateUV:
    """Complementary component: y minus its translation-mode part."""
    return y - proj0(pp, y)


def proj0_shifted(pp: ProjectionPair, y: StateUV, c: float) -> StateUV:
    """Projection conjugated by the translation T_c."""
    return translate(proj0(pp, translate(y, -c)), c)


def projC_shifted(pp: ProjectionPair, y: StateUV, c: float) -> StateUV:
    return y - proj0_shifted(pp, y, c)


def contour_proj0(
    fo: FrozenOperator,
    y: StateUV,
    n_nodes: int = 32,
    r: float | None = None,
    report: SpectrumReport | None = None,
    max_imag_residue: float = 1e-8,
) -> StateUV:
    """Resolvent contour integral around the origin, trapezoid on |l| = r.

    Each node solves one complex sparse system (l I - L#) x = y; conjugate
    symmetry halves the number of factorizations. The imaginary part of the
    quadrature must vanish for real input and is checked against
    ``max_imag_residue``.
    """
    if n_nodes < 16:
        raise ValueError("need at least 16 contour nodes")
    if r is None:
        if report is None:
            raise ValueError("pass r explicitly or provide a spectrum report")
        r = 0.5 * min(abs(report.lambda_star), report.kappa)
    if report is not None:
        gap = min(
            abs(v - report.lambda0) for v, _ in report.eigenvalues
            if abs(v - report.lambda0) > 1e-8
        )
        if not abs(report.lambda0) < r < 0.9 * gap:
            raise ContourTooCloseError(
                f"radius {r:g} not inside the spectral gap (|l0|={abs(report.lambda0):.2e},"
                f" nearest other eigenvalue at {gap:.3e})"
            )
    out = contour_proj0_batch(fo, [y], n_nodes=n_nodes, r=r,
                              max_imag_residue=max_imag_residue)
    return out[0]


def contour_proj0_batch(fo: FrozenOperator, ys, n_nodes: int = 32,
                        r: float | None = None,
                        max_imag_residue: float = 1e-8):
    """Contour projection of several fields sharing the node factorizations."""
    if r is None:
        raise ValueError("batch form needs an explicit radius")
    vecs = np.stack([fo.to_interior(y) for y in ys], axis=1).astype(complex)
    n = vecs.shape[0]
    ident = sp.identity(n, format="csc", dtype=complex)
    L = fo.Lsharp.tocsc().astype(complex)
    theta = 2.0 * np.pi * (np.arange(n_nodes) + 0.5) / n_nodes
    upper = theta[theta < np.pi]
    acc = np.zeros_like(vecs)
    for th in upper:
        lam = r * np.exp(1j * th)
        lu = spla.splu(lam * ident - L)
        x = lu.solve(vecs)
        cond_proxy = np.max(np.abs(x)) / max(np.max(np.abs(vecs)), 1e-300)
        if cond_proxy > 1e12:
            raise ContourTooCloseError(
                f"resolvent solve at l={lam:.3e} amplified the input by {cond_proxy:.2e}"
            )
        # each node and its conjugate contribute lam*x + conj(lam*x)
        acc += lam * x + np.conj(lam * x)
    acc /= n_nodes
    if np.max(np.abs(acc.imag)) > max_imag_residue * max(np.max(np.abs(acc.real)), 1e-300):
        raise ContourTooCloseError(
            f"imaginary residue {np.max(np.abs(acc.imag)):.2e} exceeds tolerance"
        )
    return [fo.to_state(acc[:, j].real) for j in range(acc.shape[1])]


def _h2_like_norm(y: StateUV, w) -> float:
    g = y.grid
    d = StateUV(g, g.D1 @ y.u, g.D1 @ y.v)
    dd = StateUV(g, g.D2 @ y.u, g.D2 @ y.v)
    return float(
        np.sqrt(inner_h(y, y, w) + inner_h(d, d, w) + inner_h(dd, dd, w))
    )


def commutation_check(
    fo: FrozenOperator, pp: ProjectionPair, n_samples: int = 50, seed: int = 0
) -> float:
    """sup over random smooth fields of ||Pi0 L y - L Pi0 y||_H scaled by an
    H2-like norm of y; exact spectral projections commute with the operator,
    so this measures the discretization quality of the pair."""
    g = fo.grid
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        centers = rng.uniform(-g.half_width / 3, g.half_width / 3, size=3)
        u = sum(rng.standard_normal() * np.exp(-((g.x - c) ** 2) / 36.0) for c in centers)
        v = sum(rng.standard_normal() * np.exp(-((g.x - c) ** 2) / 36.0) for c in centers)
        y = StateUV(g, u, v)
        lhs = proj0(pp, fo.apply(y))
        rhs = fo.apply(proj0(pp, y))
        defect = norm_h(lhs - rhs, pp.weights) / _h2_like_norm(y, pp.weights)
        worst = max(worst, defect)
    return worst
