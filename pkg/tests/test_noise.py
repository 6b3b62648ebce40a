import numpy as np
import pytest

from pulsetrack.grid import Grid
from pulsetrack.noise import (
    NoiseModel,
    default_noise,
    hermite_family,
    rng_stream,
    sample_increment,
    truncation_QN,
)


@pytest.fixture(scope="module")
def grid():
    return Grid(120.0, 1025)


@pytest.fixture(scope="module")
def nm(grid):
    return default_noise(grid)


def test_modes_orthonormal(nm):
    assert nm.gram_defect() <= 1e-8


def test_modes_dirichlet_compatible(nm):
    assert np.max(np.abs(nm.modes[0, :])) < 1e-10
    assert np.max(np.abs(nm.modes[-1, :])) < 1e-10


def test_trace_and_h1_norm_finite(nm):
    tr = nm.trace()
    assert 0 < tr < np.inf
    expected = np.sum(np.exp(-0.1 * np.arange(1, 65)))
    assert tr == pytest.approx(expected, rel=1e-12)
    assert 0 < nm.h1_hilbert_schmidt_sq() < np.inf


def test_single_mode_increment_exact(grid):
    e1 = hermite_family(grid, 1)
    nm1 = NoiseModel(grid, e1, np.array([1.0]))
    dt = 0.01
    rng = rng_stream(123, 0)
    xi = rng_stream(123, 0).standard_normal(1)[0]
    inc = sample_increment(nm1, dt, rng)
    assert np.allclose(inc, np.sqrt(dt) * xi * e1[:, 0], atol=0, rtol=1e-15)


def test_increment_variance_matches_trace(nm, grid):
    # E ||dW||_{L2}^2 = dt * sum(lam) within 5% over 10^4 draws
    dt = 1e-2
    m = 10_000
    rng = rng_stream(7, 0)
    xi = rng.standard_normal((nm.rank, m))
    incs = nm.scaled_modes(dt) @ xi
    sq = grid.w @ incs**2
    assert np.mean(sq) == pytest.approx(dt * nm.trace(), rel=0.05)


def test_small_dt_limit(nm, grid):
    rng = rng_stream(8, 0)
    norms = []
    for dt in (1e-2, 1e-4, 1e-6):
        inc = sample_increment(nm, dt, rng)
        norms.append(np.sqrt(grid.integrate(inc**2)))
    assert norms[0] > norms[1] > norms[2]
    assert norms[2] < 1e-2


def test_fixed_seed_bit_identical(nm):
    a = sample_increment(nm, 1e-3, rng_stream(42, 3))
    b = sample_increment(nm, 1e-3, rng_stream(42, 3))
    assert np.array_equal(a, b)
    c = sample_increment(nm, 1e-3, rng_stream(42, 4))
    assert not np.array_equal(a, c)


def test_increments_independent_across_time(nm, grid):
    # lag-1 sample autocorrelation of a fixed functional over 10^4 draws
    m = 10_000
    rng = rng_stream(9, 0)
    xi = rng.standard_normal((nm.rank, m))
    probe = nm.modes[:, 0] * grid.w
    series = probe @ (nm.scaled_modes(1e-3) @ xi)
    series = (series - series.mean()) / series.std()
    lag1 = float(np.mean(series[:-1] * series[1:]))
    assert abs(lag1) <= 3.0 / np.sqrt(m)


def test_sigma_folds_linearly(nm):
    rng1 = rng_stream(11, 0)
    rng2 = rng_stream(11, 0)
    base = sample_increment(nm, 1e-3, rng1)
    scaled = 0.37 * sample_increment(nm, 1e-3, rng2)
    assert np.allclose(0.37 * base, scaled, rtol=0, atol=1e-18)


def test_truncation_flat_spectrum(nm):
    q0 = truncation_QN(nm, 0)
    assert q0.trace() == 0.0
    q32 = truncation_QN(nm, 32)
    assert q32.trace() == 32.0
    assert np.array_equal(q32.lam[:32], np.ones(32))
    assert np.array_equal(q32.lam[32:], np.zeros(32))
    with pytest.raises(ValueError):
        truncation_QN(nm, 65)


def test_truncation_variance(nm, grid):
    dt, m = 1e-2, 10_000
    q = truncation_QN(nm, 16)
    rng = rng_stream(12, 0)
    xi = rng.standard_normal((q.rank, m))
    sq = grid.w @ (q.scaled_modes(dt) @ xi) ** 2
    assert np.mean(sq) == pytest.approx(16 * dt, rel=0.05)


def test_validation(grid):
    modes = hermite_family(grid, 4)
    with pytest.raises(ValueError):
        NoiseModel(grid, modes, np.array([1.0, -1.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        NoiseModel(grid, modes, np.ones(3))
    with pytest.raises(ValueError):
        sample_increment(NoiseModel(grid, modes, np.ones(4)), 0.0, rng_stream(1))
