import json
from pathlib import Path

import numpy as np
import pytest

from pulsetrack.cli import ConfigError, load_config, main, run, validate_config
from tests.conftest import CACHE_DIR

SMALL = """
[grid]
half_width = 240.0
n_points = 5825

[window]
half_width = 120.0
n_points = 513

[noise]
n_modes = 16

[sim]
sigma = 1e-3
m = 100.0
q = 0.25
T = 0.2
dt = 1e-3
seed = 2024
save_every = 20

[experiment]
replicas = 2
profile_cache = "{cache}"
"""


@pytest.fixture()
def config_file(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL.format(cache=CACHE_DIR.as_posix()))
    return path


def test_validate_ok(config_file):
    report = validate_config(load_config(config_file))
    assert report[0] == "config ok"


def test_validate_rejects_bad_q(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[sim]\nq = 0.6\n")
    with pytest.raises(ConfigError, match="q"):
        validate_config(load_config(path))


def test_validate_rejects_negative_sigma(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[sim]\nsigma = -0.5\n")
    with pytest.raises(ConfigError, match="sigma"):
        validate_config(load_config(path))


def test_unknown_keys_rejected(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[sim]\nwibble = 1\n")
    with pytest.raises(ConfigError, match="wibble"):
        load_config(path)
    path.write_text("[nonsense]\nx = 1\n")
    with pytest.raises(ConfigError, match="nonsense"):
        load_config(path)


def test_validate_exit_codes(config_file, tmp_path):
    assert main(["validate", "--config", str(config_file)]) == 0
    bad = tmp_path / "bad.toml"
    bad.write_text("[sim]\nq = 0.7\n")
    assert main(["validate", "--config", str(bad)]) == 2
    assert main(["validate", "--config", str(tmp_path / "missing.toml")]) == 2


def test_track_run_and_manifest(config_file, tmp_path):
    out = run("track", config_file, out_dir=tmp_path / "out")
    manifest = json.loads((out / "manifest.json").read_text())
    listed = {e["file"] for e in manifest["files"]}
    assert "trajectory.csv" in listed and "config_echo.toml" in listed
    on_disk = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert listed == on_disk
    for entry in manifest["files"]:
        assert (out / entry["file"]).exists()


def test_track_sigma_zero_flat_phase(config_file, tmp_path):
    cfg = load_config(config_file)
    src = config_file.read_text().replace("sigma = 1e-3", "sigma = 0.0")
    zero_cfg = tmp_path / "zero.toml"
    zero_cfg.write_text(src)
    out = run("track", zero_cfg, out_dir=tmp_path / "out0")
    rows = [
        line for line in (out / "trajectory.csv").read_text().splitlines()
        if line and not line.startswith("#")
    ]
    header = rows[0].split(",")
    phi_idx = header.index("phi_m")
    phis = np.array([float(r.split(",")[phi_idx]) for r in rows[1:]])
    assert np.all(phis == 0.0)


def test_rerun_is_byte_identical(config_file, tmp_path):
    out1 = run("track", config_file, out_dir=tmp_path / "a")
    out2 = run("track", config_file, out_dir=tmp_path / "b")
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    assert m1["files"] == m2["files"]  # includes sha256 of every artifact


def test_config_echo_reproduces_run(config_file, tmp_path):
    out1 = run("track", config_file, out_dir=tmp_path / "a")
    echo = out1 / "config_echo.toml"
    out2 = run("track", echo, out_dir=tmp_path / "b")
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    assert m1["files"] == m2["files"]


def test_seed_override_changes_output(config_file, tmp_path):
    out1 = run("track", config_file, out_dir=tmp_path / "a", seed=1)
    out2 = run("track", config_file, out_dir=tmp_path / "b", seed=2)
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    sha1 = {e["file"]: e["sha256"] for e in m1["files"]}
    sha2 = {e["file"]: e["sha256"] for e in m2["files"]}
    assert sha1["trajectory.csv"] != sha2["trajectory.csv"]


def test_spectrum_run_has_small_lambda0(config_file, tmp_path):
    out = run("spectrum", config_file, out_dir=tmp_path / "spec")
    text = (out / "eigenvalues.csv").read_text()
    lam0 = [float(l.split("=")[1]) for l in text.splitlines()
            if l.startswith("# lambda0_abs=")][0]
    assert lam0 <= 1e-6
    assert (out / "dispersion.csv").exists()
    assert (out / "decay_fit.csv").exists()


def test_profile_and_immediate_and_minimality_runs(config_file, tmp_path):
    out = run("profile", config_file, out_dir=tmp_path / "prof")
    text = (out / "profile_summary.csv").read_text()
    assert "bvp_residual_inf" in text
    out = run("immediate", config_file, out_dir=tmp_path / "imm")
    assert (out / "immediate.csv").exists()
    src = config_file.read_text().replace(
        'replicas = 2', 'replicas = 1\nsigmas = [1e-3, 3e-3]'
    )
    mini_cfg = tmp_path / "mini.toml"
    mini_cfg.write_text(src)
    out = run("minimality", mini_cfg, out_dir=tmp_path / "mini")
    assert (out / "minimality.csv").exists()
    assert (out / "minimality_summary.csv").exists()


def test_thread_parallel_runs_are_identical(config_file, tmp_path):
    # replica-level parallelism must not change results: streams are keyed
    # by replica id, not by batch layout
    out1 = run("track", config_file, out_dir=tmp_path / "t1", threads=1)
    out2 = run("track", config_file, out_dir=tmp_path / "t2", threads=3)
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    sha1 = {e["file"]: e["sha256"] for e in m1["files"]}
    sha2 = {e["file"]: e["sha256"] for e in m2["files"]}
    assert sha1["trajectory.csv"] == sha2["trajectory.csv"]


def test_numerical_failure_exit_code(tmp_path):
    # a threshold this high cannot ignite a pulse at eps = 0.01: the
    # relaxation stage reports extinction and the CLI maps it to exit 3
    cfg = tmp_path / "dead.toml"
    cfg.write_text(
        "[model]\na = 0.45\n\n[grid]\nhalf_width = 240.0\nn_points = 1537\n"
        "\n[window]\nhalf_width = 120.0\nn_points = 257\n"
    )
    rc = main(["track", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert rc == 3
