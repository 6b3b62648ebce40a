import numpy as np
import pytest
import scipy.sparse as sp

from pulsetrack.grid import Grid, StateUV, inner_h, norm_h, norm_vv, translate
from pulsetrack.profile import ModelParams
from pulsetrack.frozen import (
    DiscretizationWarningError,
    FrozenStepper,
    assemble,
    dispersion,
    evolution_family,
    evolve_frozen,
    growth_bound_beta,
    kappa_value,
    spectrum,
)
from pulsetrack.reaction import f1


@pytest.fixture(scope="module")
def fo(profile):
    return assemble(profile)


@pytest.fixture(scope="module")
def report(fo):
    return spectrum(fo)


def smooth_state(grid, rng, width=8.0):
    centers = rng.uniform(-40, 40, size=4)
    u = sum(rng.standard_normal() * np.exp(-((grid.x - c) ** 2) / width**2) for c in centers)
    v = sum(rng.standard_normal() * np.exp(-((grid.x - c) ** 2) / width**2) for c in centers)
    return StateUV(grid, u, v)


def test_zero_mode_residual(fo, profile):
    res = norm_h(fo.apply(profile.d1), profile.weights)
    assert res <= 1e-6


def test_limit_operator_is_frozen_op_at_rest_state(fo, profile):
    # replacing f'(u_hat) by f'(0) in the assembled operator gives Linf
    p = profile.params
    g = profile.grid
    sl = g.interior
    m = g.n_points - 2
    shift = sp.bmat(
        [
            [sp.diags(f1(profile.xhat.u[sl], p.reaction) - f1(0.0, p.reaction)), None],
            [None, sp.csr_matrix((m, m))],
        ],
        format="csr",
    )
    diff = (fo.Lsharp - shift) - fo.Linf
    assert abs(diff).max() < 1e-12


def test_adjoint_identity_random_interior_pairs(fo, profile):
    g = profile.grid
    w = profile.weights
    rng = np.random.default_rng(11)
    mask = np.abs(g.x) < 100.0
    worst = 0.0
    for _ in range(50):
        a = StateUV(g, mask * rng.standard_normal(g.n_points), mask * rng.standard_normal(g.n_points))
        b = StateUV(g, mask * rng.standard_normal(g.n_points), mask * rng.standard_normal(g.n_points))
        lhs = inner_h(fo.apply(a), b, w)
        rhs = inner_h(a, fo.apply_adjoint(b), w)
        worst = max(worst, abs(lhs - rhs) / (norm_h(a, w) * norm_h(b, w)))
    assert worst <= 1e-8


def test_adjoint_matches_weighted_transpose_dense(profile):
    # dense Gram oracle on a small grid: the exact discrete adjoint must
    # equal M^-1 L^T M, and the paper-form adjoint matches it away from the
    # one-sided closure rows
    g = Grid(240.0, 257)
    fo = assemble(profile, g)
    p = profile.params
    m = g.n_points - 2
    w_int = g.w[g.interior]
    M = np.diag(np.concatenate([p.eps * w_int, w_int]))
    L = fo.Lsharp.toarray()
    oracle = np.linalg.solve(M, L.T @ M)
    assert np.max(np.abs(fo.adjoint_exact.toarray() - oracle)) < 1e-10
    body = np.r_[2 : m - 2, m + 2 : 2 * m - 2]
    diff = (fo.LsharpAdj.toarray() - oracle)[np.ix_(body, body)]
    assert np.max(np.abs(diff)) < 1e-10


def test_dispersion_quadratic_oracle():
    # k = 0, f'(0) = -0.25, eps = 0.01, gamma = 1: roots of l^2 + 0.26 l + 0.0125
    d = dispersion(np.array([0.0]), ModelParams(a=0.25), s=0.4, f_prime0=-0.25)
    roots = sorted([d.lam1[0].real, d.lam2[0].real])
    assert roots[0] == pytest.approx(-0.196332495807108, abs=1e-12)
    assert roots[1] == pytest.approx(-0.063667504192892, abs=1e-12)


def test_dispersion_bounded_by_kappa(profile):
    k = np.linspace(-50, 50, 2001)
    d = dispersion(k, profile.params, profile.s)
    assert d.max_real() <= -d.kappa + 1e-12
    assert d.kappa == kappa_value(profile.params)


def test_dispersion_transport_asymptotics(profile):
    # for large |k| both branches oscillate like -s k
    k = np.array([200.0, -200.0])
    d = dispersion(k, profile.params, profile.s)
    branch = np.where(np.abs(d.lam1.real) < np.abs(d.lam2.real), d.lam1, d.lam2)
    assert np.allclose(branch.imag, -profile.s * k, rtol=1e-3)


def test_spectrum_zero_mode(report, profile):
    assert abs(report.lambda0) <= 1e-6
    assert report.zero_mode_cosine >= 0.999
    assert abs(inner_h(report.zero_mode, report.zero_mode, profile.weights) - 1.0) < 1e-9


def test_spectrum_lambda_star_strictly_stable(report):
    assert report.lambda_star.real < 0


def test_adjoint_zero_mode(report, fo, profile):
    psi = report.adjoint_zero_mode
    res = norm_h(fo.to_state(fo.adjoint_exact @ fo.to_interior(psi)), profile.weights)
    assert res <= 1e-6
    pairing = inner_h(psi, profile.d1, profile.weights)
    assert abs(pairing) > 0.1  # simple eigenvalue: nondegenerate pairing


def test_spectrum_rows_typed(report):
    rows = report.rows()
    assert any(t == "zero" for _, _, t in rows)
    for re, im, t in rows:
        assert t in ("zero", "point", "essential-cluster")


def test_evolve_identity_at_zero_time(fo, profile):
    rng = np.random.default_rng(3)
    y = smooth_state(profile.grid, rng)
    out = evolve_frozen(fo, y, 0.0)
    sl = profile.grid.interior
    assert np.array_equal(out.u[sl], y.u[sl])
    assert out.u[0] == 0.0  # Dirichlet end nodes are pinned


def test_evolve_preserves_zero_mode(fo, profile):
    out = evolve_frozen(fo, profile.d1, 10.0, dt=1e-3)
    assert norm_h(out - profile.d1, profile.weights) <= 1e-5


def test_complement_decays(fo, report, profile):
    # project out the zero mode and check the H norm shrinks over [0, 20]
    rng = np.random.default_rng(4)
    y = smooth_state(profile.grid, rng)
    c = inner_h(report.adjoint_zero_mode, y, profile.weights)
    y = y - c * report.zero_mode
    n0 = norm_h(y, profile.weights)
    out = evolve_frozen(fo, y, 20.0, dt=2e-3)
    assert norm_h(out, profile.weights) < n0


def test_semigroup_defect_halves_with_dt(profile):
    window = Grid(120.0, 513)
    fo = assemble(profile, window)
    rng = np.random.default_rng(6)
    y = smooth_state(window, rng)
    # composition with incommensurate split times stays O(dt) * ||y||
    t1, t2 = 0.93, 1.37
    once = evolve_frozen(fo, y, t1 + t2, 4e-2)
    twice = evolve_frozen(fo, evolve_frozen(fo, y, t1, 4e-2), t2, 4e-2)
    assert norm_h(once - twice, fo.weights) <= 0.1 * 4e-2 * norm_h(y, fo.weights)
    # the scheme's defect against the true flow drops by ~2x per dt halving
    ref = evolve_frozen(fo, y, t1 + t2, 1e-3)
    defects = [
        norm_h(evolve_frozen(fo, y, t1 + t2, dt) - ref, fo.weights)
        for dt in (3.2e-2, 1.6e-2)
    ]
    assert defects[0] / defects[1] >= 1.8


def test_stepper_rejects_bad_dt(fo):
    with pytest.raises(ValueError):
        FrozenStepper(fo, 0.5)
    with pytest.raises(ValueError):
        FrozenStepper(fo, -1e-3)


def test_evolution_family_identity(fo, profile):
    rng = np.random.default_rng(7)
    y = smooth_state(profile.grid, rng)
    out = evolution_family(fo, y, 3.0, 3.0)
    assert norm_h(out - y, profile.weights) < 1e-12


def test_evolution_family_growth_bound(fo, profile):
    beta = growth_bound_beta(profile)
    assert beta > 0
    rng = np.random.default_rng(8)
    dt_span = 2.0
    for _ in range(3):
        y = smooth_state(profile.grid, rng)
        out = evolution_family(fo, y, 5.0, 3.0, dt=2e-3)
        assert norm_vv(out, profile.weights) <= np.exp(beta * dt_span) * norm_vv(
            y, profile.weights
        )


@pytest.mark.slow
def test_evolution_family_matches_direct_fixed_frame(fo, profile):
    # oracle: direct IMEX integration of the fixed-frame linearization with
    # the time-dependent coefficient f'(u_hat(. + s t))
    window = Grid(120.0, 1025)
    fow = assemble(profile, window)
    pw = fow.profile
    p = pw.params
    g = window
    sl = g.interior
    m = g.n_points - 2
    dt = 1e-4
    t_from, t_to = 0.0, 5.0
    A = sp.identity(m, format="csc") - dt * p.nu * g.D2[sl, sl].tocsc()
    import scipy.sparse.linalg as spla

    solve_u = spla.splu(A).solve
    rng = np.random.default_rng(9)
    y = smooth_state(g, rng, width=6.0)
    u = y.u[sl].copy()
    v = y.v[sl].copy()
    n = int(round((t_to - t_from) / dt))
    for i in range(n):
        t = t_from + i * dt
        coeff = f1(pw.sample("u", g.x[sl] + pw.s * t), p.reaction)
        du = coeff * u - v
        dv = p.eps * u
        u = solve_u(u + dt * du)
        v = (v + dt * dv) / (1.0 + dt * p.eps * p.gamma)
    direct = fow.to_state(np.concatenate([u, v]))
    family = evolution_family(fow, y, t_to, t_from, dt=dt)
    err = norm_h(family - direct, fow.weights) / norm_h(direct, fow.weights)
    assert err <= 1e-4


def test_limit_operator_numerical_range(profile):
    # the weighted quadratic form of the limit operator stays left of -kappa
    window = Grid(120.0, 513)
    fo = assemble(profile, window)
    rng = np.random.default_rng(21)
    kappa = kappa_value(profile.params)
    worst = -np.inf
    for _ in range(100):
        y = smooth_state(window, rng, width=7.0)
        ly = fo.to_state(fo.Linf @ fo.to_interior(y))
        worst = max(worst, inner_h(ly, y, fo.weights) / inner_h(y, y, fo.weights))
    assert worst <= -kappa + 1e-8


def test_spectral_consistency_inverse_iteration(fo, report, profile):
    # every reported eigenvalue right of -kappa + 0.005 must be a genuine
    # eigenpair: inverse iteration at that shift produces a small residual
    import scipy.sparse.linalg as spla
    import scipy.sparse as sp

    kappa = kappa_value(profile.params)
    rightmost = [v for v, _ in report.eigenvalues if v.real > -kappa + 0.005]
    assert rightmost, "the zero mode at least should be right of the bound"
    n = fo.Lsharp.shape[0]
    for lam in rightmost:
        shifted = (fo.Lsharp - (lam.real + 1e-7) * sp.identity(n)).tocsc()
        lu = spla.splu(shifted)
        x = np.ones(n) / np.sqrt(n)
        for _ in range(3):
            x = lu.solve(x)
            x = x / np.linalg.norm(x)
        residual = np.linalg.norm(fo.Lsharp @ x - lam.real * x)
        assert residual <= 1e-4
