"""Trace-class noise sampled by eigenmode expansion.

The driving noise lives in the u-component and is built from a finite
orthonormal family of smooth, localized modes with summable variances, so
its covariance has finite trace and the square root maps into H^1. Mode
shapes default to grid-orthonormalized Hermite-Gaussian functions; variances
and family geometry are configuration, not physics, and experiments state
them explicitly.

Streams are counter-based (Philox) keyed by (global seed, replica id), so
replicas are independent and every draw is reproducible regardless of how
the ensemble is batched or threaded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid


def rng_stream(seed: int, replica: int = 0) -> np.random.Generator:
    """Independent reproducible stream for one replica."""
    return np.random.Generator(
        np.random.Philox(key=np.array([seed, replica], dtype=np.uint64))
    )


def hermite_family(grid: Grid, n_modes: int, center: float = 0.0, scale: float = 9.0):
    """Hermite-Gaussian functions, orthonormalized in the grid quadrature.

    The stable normalized recurrence keeps values bounded; a weighted QR
    then enforces exact discrete orthonormality (the continuum family is
    only orthonormal up to quadrature and truncation error). The scale
    should keep the last mode's turning points inside the domain, otherwise
    the tails collide with the boundary.
    """
    xi = (grid.x - center) / scale
    phi = np.empty((grid.n_points, n_modes))
    phi[:, 0] = np.pi**-0.25 * np.exp(-(xi**2) / 2.0)
    if n_modes > 1:
        phi[:, 1] = np.sqrt(2.0) * xi * phi[:, 0]
    for k in range(1, n_modes - 1):
        phi[:, k + 1] = np.sqrt(2.0 / (k + 1)) * xi * phi[:, k] - np.sqrt(
            k / (k + 1.0)
        ) * phi[:, k - 1]
    phi[0, :] = 0.0  # exact Dirichlet compatibility at the window ends
    phi[-1, :] = 0.0
    sqrt_w = np.sqrt(grid.w)[:, None]
    q, _ = np.linalg.qr(sqrt_w * phi)
    modes = q / sqrt_w
    # fix signs so the family is deterministic
    signs = np.sign(modes[np.argmax(np.abs(modes), axis=0), np.arange(n_modes)])
    return modes * signs


@dataclass
class NoiseModel:
    """Finite-rank covariance: orthonormal mode shapes and their variances."""

    grid: Grid
    modes: np.ndarray  # (n_points, K), orthonormal in the grid quadrature
    lam: np.ndarray  # (K,) nonnegative variances
    sigma: float = 1.0
    rng_stream_id: int = 0

    def __post_init__(self):
        self.modes = np.asarray(self.modes, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        if self.modes.shape != (self.grid.n_points, self.lam.shape[0]):
            raise ValueError("modes and variances have inconsistent shapes")
        if np.any(self.lam < 0):
            raise ValueError("variances must be nonnegative")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def rank(self) -> int:
        return int(self.lam.shape[0])

    def trace(self) -> float:
        """Total variance sum (the covariance trace in L2)."""
        return float(np.sum(self.lam))

    def h1_hilbert_schmidt_sq(self) -> float:
        """Squared Hilbert-Schmidt norm of the covariance square root into
        H^1: sum of lam_k (||e_k||^2 + ||e_k'||^2)."""
        g = self.grid
        d = g.D1 @ self.modes
        h1 = np.array(
            [g.integrate(self.modes[:, k] ** 2 + d[:, k] ** 2) for k in range(self.rank)]
        )
        return float(np.sum(self.lam * h1))

    def gram_defect(self) -> float:
        g = self.grid
        gram = self.modes.T @ (g.w[:, None] * self.modes)
        return float(np.max(np.abs(gram - np.eye(self.rank))))

    def scaled_modes(self, dt: float) -> np.ndarray:
        """Modes premultiplied by sqrt(lam dt): increment = this @ xi."""
        return self.modes * np.sqrt(self.lam * dt)[None, :]


def default_noise(grid: Grid, n_modes: int = 64, decay: float = 0.1,
                  center: float = 0.0, scale: float = 9.0, sigma: float = 1.0,
                  rng_stream_id: int = 0) -> NoiseModel:
    """Spec of record for generic experiments: lam_k = exp(-decay k) on a
    Hermite-Gaussian family near the pulse."""
    modes = hermite_family(grid, n_modes, center=center, scale=scale)
    lam = np.exp(-decay * np.arange(1, n_modes + 1))
    return NoiseModel(grid, modes, lam, sigma=sigma, rng_stream_id=rng_stream_id)


def sample_increment(nm: NoiseModel, dt: float, rng: np.random.Generator) -> np.ndarray:
    """One unit-sigma Wiener increment: sum_k sqrt(lam_k dt) xi_k e_k."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    xi = rng.standard_normal(nm.rank)
    return nm.scaled_modes(dt) @ xi


def truncation_QN(nm: NoiseModel, n_active: int) -> NoiseModel:
    """Flat truncation: unit variance on the first n_active modes, zero on
    the rest (the covariance square root acts as the identity there)."""
    if n_active > nm.rank:
        raise ValueError(f"only {nm.rank} modes available, asked for {n_active}")
    lam = np.zeros(nm.rank)
    lam[:n_active] = 1.0
    return NoiseModel(nm.grid, nm.modes, lam, sigma=nm.sigma,
                      rng_stream_id=nm.rng_stream_id)
