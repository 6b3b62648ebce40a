#!/usr/bin/env python3
"""Watch the multiscale decomposition and its remainder scaling.

The noisy solution splits into a phase-shifted pulse, a unit-noise linear
deviation scaled by sigma, and a remainder S. On shared increments the
remainder's size scales linearly in sigma (exponent 1 - 2q at q = 0), and
the immediate-relaxation deviation stays orthogonal to the neutral mode
along the whole path.

    python demos/04_multiscale_decomposition.py
"""

import numpy as np

from pulsetrack.dynamics import EnsembleSpec, SimConfig, WindowSystem, run_ensemble
from pulsetrack.profile import compute_profile

profile = compute_profile(cache_dir=".cache")
ws = WindowSystem(profile)

sigmas = (1e-4, 1e-3, 1e-2)
cfg = SimConfig(sigma=1e-3, m=100.0, q=0.25, T=4.0, dt=1e-3, seed=11)
spec = EnsembleSpec(full_sigmas=sigmas, reduced_ms=(100.0,), immediate=True,
                    save_every=20)
rec = run_ensemble(ws, cfg, spec, n_rep=4)

print("-- remainder scaling on shared increments --")
print(f"{'sigma':>8} {'max_t ||S^m||_V':>18} {'max_t ||S^inf||_V':>18}")
for sgm in sigmas:
    sm = float(np.median(np.max(rec.series[f"norm_Sm_V_{sgm:g}_m100"], axis=0)))
    sinf = float(np.median(np.max(rec.series[f"norm_Sinf_V_{sgm:g}"], axis=0)))
    print(f"{sgm:8.0e} {sm:18.3e} {sinf:18.3e}")

ratio = np.median(np.max(rec.series["norm_Sm_V_0.01_m100"], axis=0)) / np.median(
    np.max(rec.series["norm_Sm_V_0.0001_m100"], axis=0)
)
print(f"\nS^m grew by {ratio:.1f}x across two decades of sigma (linear scaling: 100x)")

defect = float(np.max(np.abs(rec.series["proj_zero_inf"])))
scale = float(np.max(rec.series["norm_Xinf_H"]))
print(f"neutral-mode pairing of X^inf stays at {defect:.1e} "
      f"(state norm reaches {scale:.2f})")
