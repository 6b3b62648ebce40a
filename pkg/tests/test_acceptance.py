"""Acceptance suite: one test per acceptance criterion, each printing a
PASS/FAIL line with the measured numbers. Run with `pytest -m acceptance -s`
(or plain pytest; the suite is part of the default run)."""

import time

import numpy as np
import pytest

from pulsetrack.grid import Grid, StateUV, inner_h, norm_h
from pulsetrack.profile import compute_profile, newton_refine
from pulsetrack.frozen import assemble, dispersion, kappa_value, spectrum
from pulsetrack.projection import (
    build_projection,
    commutation_check,
    contour_proj0_batch,
    proj0,
)
from pulsetrack.dynamics import (
    EnsembleSpec,
    SimConfig,
    WindowSystem,
    _full_step,
    _immediate_field_step,
    fit_semigroup_decay,
    minimality_diagnostic,
    moment_bound_rhs,
    ou_stationary_diagnostic,
    phase_ladder,
    run_ensemble,
)
from pulsetrack.noise import default_noise, rng_stream, truncation_QN

pytestmark = pytest.mark.acceptance


def report(num, ok, msg):
    print(f"\n[criterion {num:>2}] {'PASS' if ok else 'FAIL'}: {msg}")
    assert ok, f"criterion {num}: {msg}"


@pytest.fixture(scope="module")
def fo(profile):
    return assemble(profile)


@pytest.fixture(scope="module")
def rep(fo):
    return spectrum(fo)


@pytest.fixture(scope="module")
def pp(fo, rep):
    return build_projection(fo, rep)


@pytest.fixture(scope="module")
def ws(profile):
    return WindowSystem(profile)


@pytest.fixture(scope="module")
def decay_fit(ws):
    return fit_semigroup_decay(ws)


def deviation_bump(grid):
    return StateUV(
        grid,
        0.3 * np.exp(-((grid.x - 5.0) ** 2) / 25.0),
        0.1 * np.exp(-((grid.x + 3.0) ** 2) / 36.0),
    )


def test_c01_pulse_correctness(params):
    t0 = time.time()
    prof = compute_profile(params)  # uncached, timed end to end
    g2 = Grid(prof.grid.half_width, 2 * prof.grid.n_points - 1)
    guess = StateUV(g2, prof.sample("u", g2.x), prof.sample("v", g2.x))
    prof2 = newton_refine(guess, prof.s, params)
    elapsed = time.time() - t0
    res = prof.bvp_residual_inf()
    tail = prof.tail_max()
    ds = abs(prof2.s - prof.s) / prof.s
    ok = res <= 1e-8 and tail <= 1e-9 and ds <= 1e-6 and elapsed <= 60.0
    report(
        1, ok,
        f"bvp residual {res:.2e} (<=1e-8), tails {tail:.2e} (<=1e-9), "
        f"s drift N->2N {ds:.2e} (<=1e-6), runtime {elapsed:.1f}s (<=60s)",
    )


def test_c02_zero_mode(profile, fo, rep):
    res = norm_h(fo.apply(profile.d1), profile.weights)
    lam0 = abs(rep.lambda0)
    ok = res <= 1e-6 and lam0 <= 1e-6
    report(2, ok, f"||L# d1||_H = {res:.2e} (<=1e-6), |lambda0| = {lam0:.2e} (<=1e-6)")


def test_c03_spectral_gap_and_kappa(profile, rep):
    k = np.linspace(-50.0, 50.0, 4001)
    d = dispersion(k, profile.params, profile.s)
    worst = d.max_real()
    kap = kappa_value(profile.params)
    ok = (
        rep.lambda_star.real < 0
        and worst <= -kap + 1e-12
        and kap == min(profile.params.a, profile.params.eps * profile.params.gamma)
        and abs(kap - 0.01) < 1e-15
    )
    report(
        3, ok,
        f"Re lambda* = {rep.lambda_star.real:.4f} (<0), max_k Re = {worst:.6f} "
        f"(<= -kappa+1e-12), kappa = {kap:g} (= 0.01)",
    )


def test_c04_projection_equivalence(profile, fo, rep, pp):
    rng = np.random.default_rng(2024)
    fields = []
    for _ in range(20):
        c = rng.uniform(-60, 60, size=3)
        u = sum(rng.standard_normal() * np.exp(-((profile.grid.x - ci) ** 2) / 80.0) for ci in c)
        v = sum(rng.standard_normal() * np.exp(-((profile.grid.x - ci) ** 2) / 80.0) for ci in c)
        fields.append(StateUV(profile.grid, u, v))
    contours = contour_proj0_batch(fo, fields, n_nodes=32, r=pp.r)
    rel = 0.0
    for y, via_c in zip(fields, contours):
        direct = proj0(pp, y)
        rel = max(
            rel,
            norm_h(via_c - direct, pp.weights) / max(norm_h(direct, pp.weights), 1e-30),
        )
    idem = 0.0
    for y in fields[:10]:
        once = proj0(pp, y)
        idem = max(idem, norm_h(proj0(pp, once) - once, pp.weights) / norm_h(y, pp.weights))
    comm = commutation_check(fo, pp, n_samples=50)
    ok = rel <= 1e-5 and idem <= 1e-9 and comm <= 1e-5
    report(
        4, ok,
        f"rank-1 vs contour {rel:.2e} (<=1e-5), idempotence {idem:.2e} (<=1e-9), "
        f"commutation {comm:.2e} (<=1e-5)",
    )


def test_c05_semigroup_decay(ws, decay_fit):
    t0 = time.time()
    c_fit, theta, info = decay_fit
    bound = min(ws.report.kappa, abs(ws.report.lambda_star.real)) + 0.005
    elapsed = time.time() - t0
    ok = 0.0 < theta <= bound
    report(
        5, ok,
        f"fitted theta = {theta:.4f} in (0, {bound:.4f}], C = {c_fit:.2f}, "
        f"fit reused across criteria (fresh fit ~30s, here {elapsed:.1f}s)",
    )


def test_c06_orthogonality_immediate(ws):
    cfg = SimConfig(sigma=1e-3, dt=1e-3, T=20.0, seed=31)
    spec = EnsembleSpec(immediate=True, x00=deviation_bump(ws.grid), save_every=25)
    rec = run_ensemble(ws, cfg, spec, n_rep=1)
    defect = float(np.max(np.abs(rec.series["proj_zero_inf"])))
    scale = float(np.max(rec.series["norm_Xinf_H"]))
    ok = defect <= 1e-5 * scale
    report(
        6, ok,
        f"max |<Pi0_st X0inf, d1(.+st)>| = {defect:.2e} <= 1e-5 * max||X0inf||_H "
        f"= {1e-5 * scale:.2e}",
    )


@pytest.fixture(scope="module")
def scaling_run(ws):
    sigmas = (1e-4, 3e-4, 1e-3, 3e-3, 1e-2)
    cfg = SimConfig(sigma=1e-3, m=100.0, q=0.25, T=20.0, dt=1e-3, seed=210)
    spec = EnsembleSpec(
        full_sigmas=sigmas, reduced_ms=(100.0,), immediate=True, save_every=10
    )
    rec = run_ensemble(ws, cfg, spec, n_rep=20)
    return sigmas, cfg, rec


def _truncated_max(rec, key_fmt, sigmas, q, t_grid, m_tag):
    out = []
    for sgm in sigmas:
        series = rec.series[key_fmt.format(sgm=f"{sgm:g}", m=m_tag)]
        norm_x = rec.series[f"norm_X_V_{sgm:g}"]
        phi = rec.series[f"phi0_{m_tag}"]
        thr_x = sgm ** (1.0 - q)
        thr_phi = sgm ** (-q)
        vals = []
        for r in range(series.shape[1]):
            alive = (norm_x[:, r] < thr_x) & (np.abs(phi[:, r]) < thr_phi)
            stop = np.argmin(alive) if not alive.all() else len(t_grid)
            window = series[: max(stop, 2), r]
            vals.append(np.max(window))
        out.append(float(np.median(vals)))
    return out


def test_c07_residual_scaling(scaling_run):
    t0 = time.time()
    sigmas, cfg, rec = scaling_run
    maxes_q0 = _truncated_max(rec, "norm_Sm_V_{sgm}_{m}", sigmas, 0.0, rec.t, "m100")
    slope_q0 = float(np.polyfit(np.log(sigmas), np.log(maxes_q0), 1)[0])
    maxes_q25 = _truncated_max(rec, "norm_Sm_V_{sgm}_{m}", sigmas, 0.25, rec.t, "m100")
    slope_q25 = float(np.polyfit(np.log(sigmas), np.log(maxes_q25), 1)[0])
    elapsed = time.time() - t0
    ok = slope_q0 >= 0.8 and slope_q25 >= 0.3
    report(
        7, ok,
        f"q=0 slope {slope_q0:.3f} (>=0.8), q=0.25 slope {slope_q25:.3f} (>=0.3), "
        f"medians over 20 seeds (post-processing {elapsed:.1f}s)",
    )


def test_c08_m_ladder(ws):
    cfg = SimConfig(sigma=1e-3, dt=1e-3, T=20.0, seed=88)
    ms = (1e2, 1e3, 1e4)
    times, phis, phi_inf = phase_ladder(ws, cfg, ms, n_paths=8)
    window = times >= 0.5
    sups = {m: np.max(np.abs(phis[m][window] - phi_inf[window]), axis=0) for m in ms}
    monotone = np.all(sups[1e2] >= sups[1e3]) and np.all(sups[1e3] >= sups[1e4])
    final_ratio = float(np.mean(sups[1e4]) / np.mean(sups[1e2]))
    ok = bool(monotone and final_ratio <= 0.10)
    report(
        8, ok,
        f"sup|phi0^m - phi0^inf| over [0.5,20]: m=1e2 {np.mean(sups[1e2]):.3e}, "
        f"1e3 {np.mean(sups[1e3]):.3e}, 1e4 {np.mean(sups[1e4]):.3e}; "
        f"monotone={monotone}, final/first = {final_ratio:.2e} (<=0.1)",
    )


def test_c09_moment_bound(ws, decay_fit):
    cfg = SimConfig(sigma=1e-3, dt=1e-3, T=20.0, seed=99)
    x00 = deviation_bump(ws.grid)
    spec = EnsembleSpec(immediate=True, x00=x00, save_every=cfg.n_steps // 20)
    rec = run_ensemble(ws, cfg, spec, n_rep=200)
    sq = rec.series["norm_Xinf_H"] ** 2
    mean_sq = sq.mean(axis=1)
    ci95 = 1.96 * sq.std(axis=1, ddof=1) / np.sqrt(sq.shape[1])
    c_fit, theta, _ = decay_fit
    rhs = moment_bound_rhs(
        rec.t, c_fit, theta, ws.pp.operator_norm(), ws.epsZ, ws.noise.trace(),
        float(ws.norms_h(x00.u[:, None], x00.v[:, None])[0]),
    )
    margin = float(np.min(rhs - (mean_sq - ci95)))
    ok = bool(np.all(mean_sq - ci95 <= rhs))
    report(
        9, ok,
        f"E||X0inf||_H^2 below fitted bound at all 21 grid times "
        f"(min slack {margin:.3g}, C={c_fit:.2f}, theta={theta:.4f}, M=200)",
    )


def test_c10_variance_growth_without_adaptation(ws):
    t0 = time.time()
    noise32 = truncation_QN(default_noise(ws.grid), 32)
    ws32 = WindowSystem(ws.profile, ws.grid, noise=noise32)
    cfg = SimConfig(sigma=1e-5, q=0.45, T=10.0, dt=1e-3, seed=77)
    spec = EnsembleSpec(full_sigmas=(cfg.sigma,), save_every=cfg.n_steps // 20)
    rec = run_ensemble(ws32, cfg, spec, n_rep=400)
    tag = f"{cfg.sigma:g}"
    surviving = rec.stopping[f"tau_X_{tag}"] >= cfg.T
    psq = rec.series[f"proj_zero_{tag}"][:, surviving] ** 2
    mean_psq = psq.mean(axis=1)
    slope = float(np.polyfit(rec.t, mean_psq, 1)[0])
    target = cfg.sigma**2 * ws32.epsZ**2 * float(
        ws32.grid.integrate(ws32.pp.psi.u**2)
    )
    ratio = slope / target
    elapsed = time.time() - t0
    ok = slope > 0 and abs(ratio - 1.0) <= 0.15 and surviving.sum() >= 200
    report(
        10, ok,
        f"slope {slope:.3e} vs target {target:.3e} (ratio {ratio:.3f}, within 15%), "
        f"{int(surviving.sum())}/400 paths survive, runtime {elapsed:.0f}s (<=30min)",
    )


def test_c11_minimality(ws):
    t0 = time.time()
    sigmas = (1e-4, 3e-4, 1e-3, 3e-3, 1e-2)
    seeds = (3, 4, 5)
    T, dt = 5.0, 1e-3
    n_steps = int(T / dt)
    check_every = n_steps // 10
    max_g1 = []
    g2_vals = []
    for sgm in sigmas:
        g1_max = 0.0
        for seed in seeds:
            gen = rng_stream(seed, 0)
            scaled = ws.noise.scaled_modes(dt)
            u = np.zeros(ws.grid.n_points)
            v = np.zeros(ws.grid.n_points)
            ui, vi = u.copy(), v.copy()
            phi_inf = 0.0
            for k in range(n_steps):
                t = k * dt
                dw = scaled @ gen.standard_normal(ws.noise.rank)
                u, v, _ = _full_step(ws, u, v, np.float64(0.0), t, dw, sgm,
                                     100.0, dt, False)
                phi_inf += float(ws.noise_proj_coeff(dw, ws.s * t))
                ui, vi = _immediate_field_step(ws, ui, vi, t, t + dt, dw, dt)
                if (k + 1) % check_every == 0:
                    t1 = (k + 1) * dt
                    g1, g2, g1f, g2f = minimality_diagnostic(ws, u, v, t1, phi_inf, sgm)
                    assert abs(g2 - g2f) <= 1e-3 * abs(g2f)
                    g1_max = max(g1_max, abs(g1))
                    if sgm == 1e-3:
                        su = (u + ws.shifted("u", ws.s * t1)
                              - ws.shifted("u", ws.s * t1 + sgm * phi_inf)) / sgm - ui
                        sv = (v + ws.shifted("v", ws.s * t1)
                              - ws.shifted("v", ws.s * t1 + sgm * phi_inf)) / sgm - vi
                        s_norm = float(ws.norms_vv(su[:, None], sv[:, None])[0])
                        if s_norm <= 1.0:
                            g2_vals.append(g2 / (2.0 * sgm**2))
        max_g1.append(g1_max)
    slope = float(np.polyfit(np.log(sigmas), np.log(max_g1), 1)[0])
    g2_ok = len(g2_vals) > 0 and all(abs(g - 1.0) <= 0.05 for g in g2_vals)
    elapsed = time.time() - t0
    ok = slope >= 2.5 and g2_ok
    report(
        11, ok,
        f"|g1| slope vs sigma {slope:.2f} (>=2.5), g2/(2 sigma^2) in "
        f"[{min(g2_vals):.4f}, {max(g2_vals):.4f}] (within 5%) over {len(g2_vals)} "
        f"checks, runtime {elapsed:.0f}s",
    )


def test_c12_ou_stationary_variance(ws):
    sample_var, analytic, v_w = ou_stationary_diagnostic(
        ws, m=1e3, T=200.0, dt=2e-5, seed=5, thin=50
    )
    rel = abs(sample_var - analytic) / analytic
    ok = rel <= 0.10
    report(
        12, ok,
        f"stationary var {sample_var:.4e} vs m V_w/2 = {analytic:.4e} "
        f"(rel dev {rel:.3f} <= 0.10, V_w = {v_w:.3e}, T=200 thinned)",
    )
