"""Linearization around the pulse in the co-moving frame.

Builds sparse matrices for the frozen-wave operator

    L# (w, q) = ( nu w'' + f'(u_hat) w - q - s w',  eps (w - gamma q) - s q' ),

its adjoint with respect to the weighted two-component inner product, and the
constant-coefficient operator obtained by sending the pulse to its rest
state. On top of those it provides the spectral objects the projection and
tracking layers need: the translation zero mode, the adjoint zero mode, the
rightmost nonzero eigenvalue, the essential-spectrum bound kappa with its
dispersion curves, and IMEX time stepping for the generated semigroup and
the associated fixed-frame evolution family.

All operators act on interior (Dirichlet) degrees of freedom, stacked as
[u; v]; the interior quadrature weight is uniform, which keeps the exact
discrete adjoint a plain block-scaled transpose.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, SpaceWeights, StateUV, inner_h, norm_h, translate
from .profile import ModelParams, WaveProfile
from .reaction import f1


class EigenSolveError(RuntimeError):
    """Arnoldi iteration failed or returned unusable eigenpairs."""


class DiscretizationWarningError(RuntimeError):
    """Computed mode disagrees with its analytic counterpart beyond tolerance."""


def kappa_value(p: ModelParams) -> float:
    """Essential spectrum abscissa bound: min(-f'(0), eps*gamma)."""
    return min(p.a, p.eps * p.gamma)


@dataclass
class FrozenOperator:
    """Sparse frozen-wave operator with its adjoint and limiting operator."""

    profile: WaveProfile
    Lsharp: sp.csr_matrix
    LsharpAdj: sp.csr_matrix
    Linf: sp.csr_matrix
    adjoint_exact: sp.csr_matrix = field(repr=False)

    @property
    def grid(self) -> Grid:
        return self.profile.grid

    @property
    def weights(self) -> SpaceWeights:
        return self.profile.weights

    def to_interior(self, y: StateUV) -> np.ndarray:
        sl = self.grid.interior
        return np.concatenate([y.u[sl], y.v[sl]])

    def to_state(self, vec: np.ndarray) -> StateUV:
        g = self.grid
        m = g.n_points - 2
        u = np.zeros(g.n_points)
        v = np.zeros(g.n_points)
        u[g.interior] = vec[:m]
        v[g.interior] = vec[m:]
        return StateUV(g, u, v)

    def apply(self, y: StateUV) -> StateUV:
        return self.to_state(self.Lsharp @ self.to_interior(y))

    def apply_adjoint(self, y: StateUV) -> StateUV:
        return self.to_state(self.LsharpAdj @ self.to_interior(y))


def assemble(profile: WaveProfile, grid: Grid | None = None) -> FrozenOperator:
    """Build the frozen-wave matrices on the profile's grid (or a restriction).

    The explicit adjoint follows the integration-by-parts form
    [[nu D2 + f'(u_hat) + s D1, 1], [-eps, -eps gamma + s D1]]; an exact
    transpose-based adjoint in the discrete weighted geometry is kept
    alongside for eigenvector work (the two differ only in the one-sided
    closure rows).
    """
    if grid is not None and not profile.grid.compatible(grid):
        profile = profile.on_grid(grid)
    g = profile.grid
    if g.bc != "dirichlet0":
        raise ValueError("frozen operator assembly expects dirichlet0 boundaries")
    p = profile.params
    sl = g.interior
    m = g.n_points - 2
    D1 = g.D1[sl, sl].tocsr()
    D2 = g.D2[sl, sl].tocsr()
    I = sp.identity(m, format="csr")
    fp = sp.diags(f1(profile.xhat.u[sl], p.reaction))
    s = profile.s

    L11 = p.nu * D2 + fp - s * D1
    L22 = -p.eps * p.gamma * I - s * D1
    Lsharp = sp.bmat([[L11, -I], [p.eps * I, L22]], format="csr")

    A11 = p.nu * D2 + fp + s * D1
    A22 = -p.eps * p.gamma * I + s * D1
    LsharpAdj = sp.bmat([[A11, I], [-p.eps * I, A22]], format="csr")

    f0 = f1(0.0, p.reaction)
    Linf11 = p.nu * D2 + f0 * I - s * D1
    Linf = sp.bmat([[Linf11, -I], [p.eps * I, L22]], format="csr")

    # exact adjoint of the assembled matrix in the discrete H geometry;
    # interior weights are uniform, so M = Z h diag(eps, 1) blockwise
    Lt = Lsharp.T.tocsr()
    K = sp.bmat(
        [
            [Lt[:m, :m], Lt[:m, m:] / p.eps],
            [p.eps * Lt[m:, :m], Lt[m:, m:]],
        ],
        format="csr",
    )
    return FrozenOperator(profile, Lsharp, LsharpAdj, Linf, K)


# --- dispersion relation of the limiting operator --------------------------


@dataclass(frozen=True)
class DispersionCurves:
    """Eigenvalue branches of the constant-coefficient symbol over wavenumbers."""

    k: np.ndarray
    lam1: np.ndarray
    lam2: np.ndarray
    kappa: float

    def max_real(self) -> float:
        return float(max(np.max(self.lam1.real), np.max(self.lam2.real)))


def dispersion(
    k_samples: np.ndarray, p: ModelParams, s: float, f_prime0: float | None = None
) -> DispersionCurves:
    """Closed-form eigenvalues of the symbol matrix at each wavenumber.

    The symbol of the limiting operator is
    [[-nu k^2 + f'(0) - i s k, -1], [eps, -eps gamma - i s k]]; its two
    eigenvalues come from the quadratic formula. Their real parts stay at or
    below -kappa for every k.
    """
    k = np.asarray(k_samples, dtype=float)
    fp0 = f1(0.0, p.reaction) if f_prime0 is None else f_prime0
    a11 = -p.nu * k**2 + fp0 - 1j * s * k
    a22 = -p.eps * p.gamma - 1j * s * k
    tr = a11 + a22
    det = a11 * a22 + p.eps
    disc = np.sqrt(tr**2 - 4 * det + 0j)
    lam1 = 0.5 * (tr + disc)
    lam2 = 0.5 * (tr - disc)
    kappa = min(-fp0, p.eps * p.gamma)
    curves = DispersionCurves(k, lam1, lam2, kappa)
    if curves.max_real() > -kappa + 1e-12:
        raise DiscretizationWarningError(
            f"dispersion branch exceeds -kappa: {curves.max_real():.3e} > {-kappa:.3e}"
        )
    return curves


# --- spectrum ---------------------------------------------------------------


@dataclass
class SpectrumReport:
    """Rightmost eigenstructure of the frozen-wave operator."""

    lambda0: complex
    zero_mode: StateUV
    adjoint_zero_mode: StateUV
    lambda_star: complex
    kappa: float
    dispersion: DispersionCurves
    eigenvalues: list  # (complex value, type string)
    zero_mode_cosine: float

    def rows(self):
        """(re, im, type) rows for CSV export."""
        return [(v.real, v.imag, t) for v, t in self.eigenvalues]


def _real_mode(vec: np.ndarray) -> np.ndarray:
    """Rotate a complex eigenvector of a real matrix onto the real axis."""
    idx = int(np.argmax(np.abs(vec)))
    rotated = vec * np.exp(-1j * np.angle(vec[idx]))
    if np.max(np.abs(rotated.imag)) > 1e-6 * np.max(np.abs(rotated.real)):
        raise EigenSolveError("eigenvector has a genuinely complex profile")
    return rotated.real


def spectrum(
    fo: FrozenOperator,
    n_eigs: int = 12,
    shifts: tuple = (0.05, 0.0, None),
    k_max: float = 50.0,
) -> SpectrumReport:
    """Rightmost eigenpairs in the weighted geometry plus the zero-mode pair.

    Shift-invert Arnoldi runs around each shift (None is replaced by
    -kappa/2); eigenvalues are deduplicated and sorted by real part. The
    zero mode is aligned against the pulse derivative and the adjoint zero
    mode is normalized so its pairing with the zero mode equals one.
    """
    p = fo.profile.params
    kappa = kappa_value(p)
    shift_list = [(-kappa / 2 if s is None else s) for s in shifts]

    n_dim = fo.Lsharp.shape[0]
    v0 = np.ones(n_dim) / np.sqrt(n_dim)  # deterministic Arnoldi start
    found = []
    for sigma in shift_list:
        try:
            vals = spla.eigs(
                fo.Lsharp.tocsc(),
                k=n_eigs,
                sigma=sigma,
                which="LM",
                return_eigenvectors=False,
                maxiter=10000,
                v0=v0,
            )
        except (spla.ArpackNoConvergence, RuntimeError) as exc:
            raise EigenSolveError(f"Arnoldi failed at shift {sigma:g}: {exc}") from exc
        found.extend(vals.tolist())

    uniq: list[complex] = []
    for v in sorted(found, key=lambda z: -z.real):
        if all(abs(v - u) > 1e-9 * max(1.0, abs(v)) for u in uniq):
            uniq.append(v)

    lambda0 = min(uniq, key=abs)

    # zero mode and adjoint zero mode from dedicated tight solves
    val0, vec0 = spla.eigs(fo.Lsharp.tocsc(), k=1, sigma=lambda0.real, which="LM", v0=v0)
    mode = fo.to_state(_real_mode(vec0[:, 0]))
    w = fo.weights
    d1 = fo.profile.d1
    cos = inner_h(mode, d1, w) / (norm_h(mode, w) * norm_h(d1, w))
    if cos < 0:
        mode = -1.0 * mode
        cos = -cos
    if cos < 0.99:
        raise DiscretizationWarningError(
            f"zero mode misaligned with the pulse derivative: cosine {cos:.5f}"
        )
    mode = (1.0 / norm_h(mode, w)) * mode

    vala, veca = spla.eigs(fo.adjoint_exact.tocsc(), k=1, sigma=lambda0.real, which="LM", v0=v0)
    psi = fo.to_state(_real_mode(veca[:, 0]))
    pairing = inner_h(psi, mode, w)
    if abs(pairing) < 1e-12:
        raise EigenSolveError("adjoint zero mode is H-orthogonal to the zero mode")
    psi = (1.0 / pairing) * psi

    nonzero = [v for v in uniq if abs(v - lambda0) > 1e-8]
    lambda_star = max(nonzero, key=lambda z: z.real) if nonzero else complex(-kappa)

    labeled = []
    for v in uniq:
        if abs(v - lambda0) <= 1e-8:
            labeled.append((v, "zero"))
        elif v.real > -kappa + 1e-8:
            labeled.append((v, "point"))
        else:
            labeled.append((v, "essential-cluster"))

    k = np.linspace(-k_max, k_max, 1001)
    curves = dispersion(k, p, fo.profile.s)

    return SpectrumReport(
        lambda0=lambda0,
        zero_mode=mode,
        adjoint_zero_mode=psi,
        lambda_star=lambda_star,
        kappa=kappa,
        dispersion=curves,
        eigenvalues=labeled,
        zero_mode_cosine=float(cos),
    )


# --- semigroup / evolution family ------------------------------------------


class FrozenStepper:
    """IMEX Euler stepping of dY/dt = L# Y (implicit diffusion and v-decay)."""

    def __init__(self, fo: FrozenOperator, dt: float):
        if dt <= 0 or dt > 0.1:
            raise ValueError("dt must lie in (0, 0.1] for the frozen stepper")
        self.fo = fo
        self.dt = dt
        g = fo.grid
        p = fo.profile.params
        sl = g.interior
        m = g.n_points - 2
        self.m = m
        A = sp.identity(m, format="csc") - dt * p.nu * g.D2[sl, sl].tocsc()
        self._solve_u = spla.splu(A).solve
        self._v_div = 1.0 + dt * p.eps * p.gamma
        self._D1 = g.D1[sl, sl].tocsr()
        self._fp = f1(fo.profile.xhat.u[sl], p.reaction)
        self._p = p
        self._s = fo.profile.s

    def step(self, y: np.ndarray) -> np.ndarray:
        """One IMEX step; accepts a vector or a matrix of stacked columns."""
        m = self.m
        u, v = y[:m], y[m:]
        p = self._p
        fp = self._fp if y.ndim == 1 else self._fp[:, None]
        du = fp * u - v - self._s * (self._D1 @ u)
        dv = p.eps * u - self._s * (self._D1 @ v)
        u_new = self._solve_u(u + self.dt * du)
        v_new = (v + self.dt * dv) / self._v_div
        return np.concatenate([u_new, v_new])


def evolve_frozen(fo: FrozenOperator, y0: StateUV, t: float, dt: float = 1e-3) -> StateUV:
    """Action of the frozen-wave semigroup at time t on y0.

    Integer steps of size dt plus one fractional remainder step; for t = 0
    the state is returned unchanged.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    y = fo.to_interior(y0)
    if t == 0:
        return fo.to_state(y)
    n_full = int(np.floor(t / dt + 1e-12))
    remainder = t - n_full * dt
    stepper = FrozenStepper(fo, dt)
    for _ in range(n_full):
        y = stepper.step(y)
    if remainder > 1e-12 * dt:
        y = FrozenStepper(fo, remainder).step(y)
    if not np.all(np.isfinite(y)):
        raise FloatingPointError("frozen evolution produced non-finite values")
    return fo.to_state(y)


def evolve_frozen_matrix(
    fo: FrozenOperator, Y: np.ndarray, t: float, dt: float = 1e-3, snapshots=None
):
    """Batched semigroup action on stacked interior columns.

    Y has shape (2m, R). When ``snapshots`` (sorted times) is given, returns
    a list of (time, copy-of-state) pairs instead of just the final state.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    stepper = FrozenStepper(fo, dt)
    n_full = int(np.floor(t / dt + 1e-12))
    remainder = t - n_full * dt
    out = []
    targets = list(snapshots) if snapshots is not None else []
    j = 0
    cur = Y.copy()
    now = 0.0
    while j < len(targets) and targets[j] <= now + 1e-12:
        out.append((targets[j], cur.copy()))
        j += 1
    for _ in range(n_full):
        cur = stepper.step(cur)
        now += dt
        while j < len(targets) and targets[j] <= now + 1e-12:
            out.append((targets[j], cur.copy()))
            j += 1
    if remainder > 1e-12 * dt:
        cur = FrozenStepper(fo, remainder).step(cur)
        now += remainder
    # flush targets that only float accumulation kept us from reaching
    while j < len(targets) and targets[j] <= now + 1e-6:
        out.append((targets[j], cur.copy()))
        j += 1
    return out if snapshots is not None else cur


def evolution_family(
    fo: FrozenOperator, y0: StateUV, t: float, t_prime: float, dt: float = 1e-3
) -> StateUV:
    """Fixed-frame evolution from time t' to t via the frozen semigroup:
    translate back by s t', evolve for t - t', translate forward by s t."""
    if t < t_prime:
        raise ValueError("need t >= t_prime")
    if t == t_prime:
        return y0.copy()
    s = fo.profile.s
    pulled = translate(y0, -s * t_prime)
    evolved = evolve_frozen(fo, pulled, t - t_prime, dt)
    return translate(evolved, s * t)


def growth_bound_beta(profile: WaveProfile) -> float:
    """Numerical value of the evolution-family growth exponent: the
    W^{1,inf} size of f'(u_hat) - f'(0) minus kappa."""
    p = profile.params
    g = profile.grid
    gvals = f1(profile.xhat.u, p.reaction) - f1(0.0, p.reaction)
    from .reaction import f2

    gprime = f2(profile.xhat.u, p.reaction) * profile.d1.u
    w1inf = max(float(np.max(np.abs(gvals))), float(np.max(np.abs(gprime))))
    return w1inf - kappa_value(p)
