#!/usr/bin/env python3
"""Render publication-style figures from pulsetrack CSV artifacts.

Usage:  python plots/render.py --kind KIND --in DIR --out FILE [--sidecar FILE]

Kinds:
    spectrum    eigenvalue scatter with the essential-bound line
    dispersion  real/imaginary parts of the two symbol branches
    phase       reduced-phase paths for each relaxation rate vs the limit
    scaling     log-log residual scaling with a refitted slope annotation
    moments     ensemble second moment against its fitted bound envelope
    growth      linear variance growth with a refitted line

The renderer does no numerics beyond least-squares refits of slopes that the
producing experiment already reported; every refit is written to a sidecar
text file so the two can be diffed. Output format follows the file suffix
(SVG/PDF recommended for review-friendly diffs).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

KINDS = ("spectrum", "dispersion", "phase", "scaling", "moments", "growth")


class SchemaError(ValueError):
    pass


def read_meta(path: Path) -> dict:
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if "=" in line:
                key, val = line[1:].strip().split("=", 1)
                meta[key.strip()] = val.strip()
    return meta


def read_csv(path: Path, required=()) -> tuple[pd.DataFrame, dict]:
    if not path.exists():
        raise SchemaError(f"missing input file {path}")
    frame = pd.read_csv(path, comment="#")
    for col in required:
        if col not in frame.columns:
            raise SchemaError(f"{path.name}: required column {col!r} missing")
    return frame, read_meta(path)


def refit_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)),
                            np.log(np.asarray(y, float)), 1)[0])


def render_spectrum(in_dir: Path, ax, sidecar: list):
    frame, meta = read_csv(in_dir / "eigenvalues.csv", required=("re", "im", "type"))
    kappa = float(meta["kappa"])
    markers = {"zero": ("*", 160), "point": ("o", 40), "essential-cluster": (".", 18)}
    for typ, group in frame.groupby("type"):
        mark, size = markers.get(typ, ("x", 30))
        ax.scatter(group["re"], group["im"], s=size, marker=mark, label=typ)
    ax.axvline(-kappa, linestyle="--", linewidth=1.0, label=f"-kappa = {-kappa:g}")
    ax.set_xlabel("Re lambda")
    ax.set_ylabel("Im lambda")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("frozen-wave spectrum")
    sidecar.append(f"kappa={kappa:.17g}")


def render_dispersion(in_dir: Path, ax, sidecar: list):
    frame, meta = read_csv(
        in_dir / "dispersion.csv", required=("k", "re1", "im1", "re2", "im2")
    )
    kappa = float(meta["kappa"])
    ax.plot(frame["k"], frame["re1"], label="Re branch 1")
    ax.plot(frame["k"], frame["re2"], label="Re branch 2")
    ax.axhline(-kappa, linestyle="--", linewidth=1.0, label=f"-kappa = {-kappa:g}")
    ax.set_xlabel("wavenumber k")
    ax.set_ylabel("Re lambda(k)")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("dispersion of the limiting operator")
    sidecar.append(f"max_re={max(frame['re1'].max(), frame['re2'].max()):.17g}")


def render_phase(in_dir: Path, ax, sidecar: list):
    frame, meta = read_csv(in_dir / "reduced.csv", required=("t", "replica"))
    phi_cols = [c for c in frame.columns if c.startswith("phi0_m")]
    if not phi_cols:
        raise SchemaError("reduced.csv carries no phi0_m columns")
    one = frame[frame["replica"] == frame["replica"].iloc[0]]
    for col in sorted(phi_cols):
        ax.plot(one["t"], one[col], label=col.replace("phi0_m", "m = "))
    if "phi0_inf" in one.columns and one["phi0_inf"].notna().any():
        ax.plot(one["t"], one["phi0_inf"], "k--", label="immediate limit")
    else:
        print("note: immediate-limit series absent; layer skipped", file=sys.stderr)
    ax.set_xlabel("t")
    ax.set_ylabel("reduced phase")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("phase paths across relaxation rates")
    sidecar.append(f"n_rates={len(phi_cols)}")


def render_scaling(in_dir: Path, ax, sidecar: list):
    summary, meta = read_csv(
        in_dir / "scaling_summary.csv", required=("sigma", "median_max_Sm_V")
    )
    slope_ref = float(meta["slope"])
    slope = refit_slope(summary["sigma"], summary["median_max_Sm_V"])
    points, _ = read_csv(in_dir / "scaling.csv", required=("sigma", "max_Sm_V"))
    ax.loglog(points["sigma"], points["max_Sm_V"], ".", alpha=0.35, label="replicas")
    ax.loglog(summary["sigma"], summary["median_max_Sm_V"], "o-",
              label=f"median, slope {slope:.3f}")
    ax.set_xlabel("sigma")
    ax.set_ylabel("max_t ||S||_V")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("remainder scaling")
    sidecar.append(f"slope_refit={slope:.17g}")
    sidecar.append(f"slope_csv={slope_ref:.17g}")
    sidecar.append(f"slope_match={abs(slope - slope_ref) <= 1e-6}")


def render_moments(in_dir: Path, ax, sidecar: list):
    frame, meta = read_csv(
        in_dir / "moments.csv", required=("t", "mean_sq_H", "ci95", "bound_rhs")
    )
    ax.semilogy(frame["t"], frame["mean_sq_H"], "o-", label="ensemble moment")
    ax.fill_between(frame["t"], frame["mean_sq_H"] - frame["ci95"],
                    frame["mean_sq_H"] + frame["ci95"], alpha=0.3, label="95% CI")
    ax.semilogy(frame["t"], frame["bound_rhs"], "r--", label="fitted bound")
    ax.set_xlabel("t")
    ax.set_ylabel("second moment (H norm)")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("deviation moment against its envelope")
    sidecar.append(f"theta={float(meta['theta']):.17g}")
    sidecar.append(f"bound_ok={meta['bound_ok']}")


def render_growth(in_dir: Path, ax, sidecar: list):
    frame, meta = read_csv(
        in_dir / "growth.csv", required=("t", "mean_proj_sq", "ci95")
    )
    slope_ref = float(meta["slope"])
    coeffs = np.polyfit(frame["t"], frame["mean_proj_sq"], 1)
    slope = float(coeffs[0])
    ax.plot(frame["t"], frame["mean_proj_sq"], "o", label="ensemble")
    ax.plot(frame["t"], np.polyval(coeffs, frame["t"]), "-",
            label=f"linear fit, slope {slope:.3e}")
    ax.fill_between(frame["t"], frame["mean_proj_sq"] - frame["ci95"],
                    frame["mean_proj_sq"] + frame["ci95"], alpha=0.3)
    ax.set_xlabel("t")
    ax.set_ylabel("squared neutral-mode pairing")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("variance growth without velocity adaptation")
    sidecar.append(f"slope_refit={slope:.17g}")
    sidecar.append(f"slope_csv={slope_ref:.17g}")
    sidecar.append(f"slope_match={abs(slope - slope_ref) <= 1e-6 * max(abs(slope_ref), 1e-300)}")


RENDERERS = {
    "spectrum": render_spectrum,
    "dispersion": render_dispersion,
    "phase": render_phase,
    "scaling": render_scaling,
    "moments": render_moments,
    "growth": render_growth,
}


def render(kind: str, in_dir, out_file, sidecar_file=None) -> Path:
    if kind not in RENDERERS:
        raise SchemaError(f"unknown figure kind {kind!r}")
    in_dir = Path(in_dir)
    out_file = Path(out_file)
    sidecar: list[str] = [f"kind={kind}", f"inputs={in_dir}"]
    fig, ax = plt.subplots(figsize=(6.0, 4.0), constrained_layout=True)
    RENDERERS[kind](in_dir, ax, sidecar)
    out_file.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_file)
    plt.close(fig)
    side_path = Path(sidecar_file) if sidecar_file else out_file.with_suffix(".txt")
    side_path.write_text("\n".join(sidecar) + "\n")
    return out_file


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="in_dir", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--sidecar", default=None)
    args = parser.parse_args(argv)
    try:
        out = render(args.kind, args.in_dir, args.out, args.sidecar)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
