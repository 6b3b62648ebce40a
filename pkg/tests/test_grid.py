import numpy as np
import pytest

from pulsetrack.grid import (
    Grid,
    GridMismatchError,
    OutOfWindowError,
    SpaceWeights,
    StateUV,
    inner_h,
    inner_v,
    inner_vv,
    translate,
)


@pytest.fixture(scope="module")
def grid():
    return Grid(half_width=30.0, n_points=601)


def gaussian_state(grid, width=2.0, center=0.0):
    g = np.exp(-((grid.x - center) ** 2) / width**2)
    return StateUV(grid, g, 0.5 * g)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(half_width=-1.0, n_points=100)
    with pytest.raises(ValueError):
        Grid(half_width=10.0, n_points=4)
    with pytest.raises(ValueError):
        Grid(half_width=10.0, n_points=100, bc="periodic")


def test_quadrature_of_one(grid):
    # integral of the constant-1 field over [-L, L] is 2L
    assert abs(grid.integrate(np.ones(grid.n_points)) - 2 * grid.half_width) <= (
        1e-12 * grid.half_width
    )


def test_d2_annihilates_constants(grid):
    r = grid.D2 @ np.ones(grid.n_points)
    interior = r[grid.interior]
    assert np.max(np.abs(interior)) < 1e-10


def test_difference_operators_fourth_order():
    # refine three times against analytic derivatives of exp(-x^2)
    errs1, errs2 = [], []
    for n in (201, 401, 801, 1601):
        g = Grid(half_width=10.0, n_points=n)
        f = np.exp(-g.x**2)
        d1 = -2 * g.x * f
        d2 = (4 * g.x**2 - 2) * f
        errs1.append(np.max(np.abs(g.D1 @ f - d1)))
        errs2.append(np.max(np.abs(g.D2 @ f - d2)))
    for errs in (errs1, errs2):
        slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(slopes >= 3.5), slopes


def test_inner_h_constant_field():
    # eps=1, Z=1, a=b=(1,0): plain trapezoid integral of 1 over [-L, L]
    g = Grid(half_width=30.0, n_points=601)
    w = SpaceWeights(eps=1.0, Z=1.0)
    a = StateUV(g, np.ones(g.n_points), np.zeros(g.n_points))
    assert abs(inner_h(a, a, w) - 2 * g.half_width) < 1e-10


def test_inner_h_bilinear_symmetric(grid):
    w = SpaceWeights(eps=0.01, Z=3.7)
    rng = np.random.default_rng(0)
    a = StateUV(grid, rng.standard_normal(grid.n_points), rng.standard_normal(grid.n_points))
    b = StateUV(grid, rng.standard_normal(grid.n_points), rng.standard_normal(grid.n_points))
    c = StateUV(grid, rng.standard_normal(grid.n_points), rng.standard_normal(grid.n_points))
    assert inner_h(a, b, w) == pytest.approx(inner_h(b, a, w), rel=1e-13)
    lhs = inner_h(StateUV(grid, 2.0 * a.u + 3.0 * b.u, 2.0 * a.v + 3.0 * b.v), c, w)
    rhs = 2.0 * inner_h(a, c, w) + 3.0 * inner_h(b, c, w)
    assert lhs == pytest.approx(rhs, rel=1e-12)
    zero = StateUV.zeros(grid)
    assert inner_h(zero, b, w) == 0.0


def test_inner_h_positive_definite(grid):
    w = SpaceWeights(eps=0.01, Z=2.0)
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = StateUV(grid, rng.standard_normal(grid.n_points), rng.standard_normal(grid.n_points))
        assert inner_h(a, a, w) > 0
    assert inner_h(StateUV.zeros(grid), StateUV.zeros(grid), w) == 0.0


def test_inner_h_grid_mismatch(grid):
    other = Grid(half_width=30.0, n_points=301)
    a = StateUV.zeros(grid)
    b = StateUV.zeros(other)
    with pytest.raises(GridMismatchError):
        inner_h(a, b, SpaceWeights(eps=1.0))


def test_inner_v_constant_equals_h(grid):
    # derivative of a constant vanishes away from the closure rows; use a
    # field that is constant on the whole grid so D1 gives ~0 everywhere
    w = SpaceWeights(eps=1.0, Z=1.0)
    a = StateUV(grid, np.full(grid.n_points, 2.0), np.full(grid.n_points, -1.0))
    assert inner_v(a, a, w) == pytest.approx(inner_h(a, a, w), rel=1e-12)


def test_inner_v_sine_closed_form():
    # u = sin(pi x / L): integral of u^2 is L, of (u')^2 is pi^2 / L
    g = Grid(half_width=15.0, n_points=1501)
    w = SpaceWeights(eps=1.0, Z=1.0)
    L = g.half_width
    a = StateUV(g, np.sin(np.pi * g.x / L), np.zeros(g.n_points))
    expected = L + np.pi**2 / L
    assert inner_v(a, a, w) == pytest.approx(expected, rel=0.02)


def test_inner_product_ordering(grid):
    w = SpaceWeights(eps=0.01, Z=5.0)
    rng = np.random.default_rng(2)
    for _ in range(100):
        a = StateUV(grid, rng.standard_normal(grid.n_points), rng.standard_normal(grid.n_points))
        h = inner_h(a, a, w)
        v = inner_v(a, a, w)
        vv = inner_vv(a, a, w)
        assert vv >= v - 1e-12 and v >= h - 1e-12


def test_translate_identity(grid):
    a = gaussian_state(grid)
    b = translate(a, 0.0)
    assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)


def test_translate_round_trip(grid):
    a = gaussian_state(grid, width=3.0)
    b = translate(translate(a, 1.3), -1.3)
    tol = 10 * grid.h**4 * np.max(np.abs(a.u))
    assert np.max(np.abs(b.u - a.u)) < tol
    assert np.max(np.abs(b.v - a.v)) < tol


def test_translate_gaussian_oracle():
    # T_c Y = Y(. + c): a Gaussian centered at 0 moves its peak to -c
    g = Grid(half_width=30.0, n_points=1201)  # h = 0.05
    a = StateUV(g, np.exp(-g.x**2), np.zeros(g.n_points))
    b = translate(a, 1.5)
    exact = np.exp(-((g.x + 1.5) ** 2))
    assert np.max(np.abs(b.u - exact)) <= 1e-6
    assert abs(g.x[np.argmax(b.u)] + 1.5) <= g.h


def test_translate_linearity(grid):
    rng = np.random.default_rng(3)
    a = StateUV(grid, rng.standard_normal(grid.n_points), rng.standard_normal(grid.n_points))
    b = StateUV(grid, rng.standard_normal(grid.n_points), rng.standard_normal(grid.n_points))
    combo = translate(StateUV(grid, 2.0 * a.u - b.u, 2.0 * a.v - b.v), 0.7)
    parts_u = 2.0 * translate(a, 0.7).u - translate(b, 0.7).u
    assert np.max(np.abs(combo.u - parts_u)) < 1e-12 * max(1.0, np.max(np.abs(parts_u)))


def test_translate_out_of_window(grid):
    a = gaussian_state(grid)
    with pytest.raises(OutOfWindowError):
        translate(a, grid.half_width / 2)
    with pytest.raises(OutOfWindowError):
        translate(a, -grid.half_width)


def test_space_weights_validation():
    with pytest.raises(ValueError):
        SpaceWeights(eps=-0.01)
    with pytest.raises(ValueError):
        SpaceWeights(eps=0.01, Z=0.0)
