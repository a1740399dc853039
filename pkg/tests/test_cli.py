"""Config parsing, dispatch, exit codes, and output reproducibility."""
import json
import math
from pathlib import Path

import pytest

from diracgap.cli import (ConfigError, DEFAULT_CONFIG, EXIT_NUMERICAL,
                          EXIT_OK, EXIT_VALIDATION, dispatch, main,
                          parse_config)

MINIMAL = "[potential]\nshape = disk\nr = 0.2\n"

CONST_MASS = """
[potential]
shape = square
a = 1.0

[fiber]
beta = 0.5
m = 6
solver = dense

[scan]
grid_n = 3
refine_depth = 1
"""

ANNULUS = """
[potential]
shape = annulus
n = 4
width = 1

[fiber]
alpha = 1.0
m = 8
solver = dense

[sweep]
betas = 0.00035, 0.0005, 0.0008
grid_n = 3
refine_depth = 0
"""


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg["fiber"]["m"] == 14
    assert cfg["fiber"]["solver"] == "dense"
    assert cfg["scan"]["grid_n"] == 9
    prof = cfg.profile()
    assert prof.shape == "disk" and prof.radius == 0.2


def test_alpha_out_of_range_names_key():
    bad = MINIMAL + "\n[fiber]\nalpha = 1.5\n"
    with pytest.raises(ConfigError, match=r"\[fiber\].alpha"):
        parse_config(bad)


def test_even_grid_rejected():
    bad = MINIMAL + "\n[scan]\ngrid_n = 8\n"
    with pytest.raises(ConfigError, match="odd"):
        parse_config(bad)


def test_unknown_key_and_section():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(MINIMAL + "bogus = 3\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config(MINIMAL + "\n[wormhole]\nx = 1\n")


def test_missing_potential_section():
    with pytest.raises(ConfigError, match="potential"):
        parse_config("[fiber]\nm = 8\n")


def test_type_errors_carry_line_numbers():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("[potential]\nshape = disk\nr = banana\n")


def test_unknown_subcommand_exits_2(tmp_path, capsys):
    assert dispatch("frobnicate", parse_config(MINIMAL), str(tmp_path)) == EXIT_VALIDATION
    assert "unknown subcommand" in capsys.readouterr().err


def test_main_requires_config(tmp_path):
    assert main(["gap", "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_selftest_runs_green(tmp_path):
    code = main(["selftest", "--out", str(tmp_path / "st"), "--threads", "1"])
    assert code == EXIT_OK
    payload = json.loads((tmp_path / "st" / "selftest.json").read_text())
    assert payload["passed"]


def test_gap_constant_mass_json(tmp_path):
    cfg = parse_config(CONST_MASS)
    out = tmp_path / "gap"
    assert dispatch("gap", cfg, str(out), threads=1, seed=0) == EXIT_OK
    payload = json.loads((out / "gap.json").read_text())
    assert abs(payload["grid_min"] - 0.5) <= 1e-9
    assert payload["argmin_k"] == [0.0, 0.0]
    assert (out / "gap_points.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "gap"
    assert manifest["config"]["fiber"]["beta"] == 0.5


def test_gap_reruns_bit_identical(tmp_path):
    cfg = parse_config(CONST_MASS)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert dispatch("gap", cfg, str(out), threads=1, seed=7) == EXIT_OK
        outs.append(out)
    for fname in ("gap.json", "gap_points.csv"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_fourier_csv(tmp_path):
    cfg = parse_config(MINIMAL + "\n[fiber]\nm = 3\n")
    out = tmp_path / "f"
    assert dispatch("fourier", cfg, str(out), threads=1) == EXIT_OK
    lines = (out / "fourier.csv").read_text().strip().splitlines()
    assert lines[0] == "m1,m2,re,im"
    assert len(lines) == 1 + (4 * 3 + 1) ** 2
    payload = json.loads((out / "fourier.json").read_text())
    assert abs(payload["phi"] - math.pi * 0.04) <= 1e-12


def test_hyp1_command(tmp_path, capsys):
    cfg = parse_config(ANNULUS)
    out = tmp_path / "h"
    assert dispatch("hyp1", cfg, str(out), threads=1) == EXIT_OK
    payload = json.loads((out / "hyp1.json").read_text())
    assert payload["s_chi"] > 0
    assert payload["n_modes"] == 56
    assert "S(chi)" in capsys.readouterr().out


def test_kernel_command_default_config(tmp_path):
    cfg = parse_config(DEFAULT_CONFIG)
    out = tmp_path / "k"
    assert dispatch("kernel", cfg, str(out), threads=1) == EXIT_OK
    payload = json.loads((out / "kernel.json").read_text())
    assert payload["within_envelope"]


FESHBACH_CFG = """
[potential]
shape = annulus
n = 4
width = 1

[fiber]
alpha = 1.0
beta = 0.00035
m = 8

[feshbach]
k1 = 0.0
k2 = 0.0
"""


def test_feshbach_command(tmp_path):
    cfg = parse_config(FESHBACH_CFG)
    out = tmp_path / "fb"
    assert dispatch("feshbach", cfg, str(out), threads=1) == EXIT_OK
    payload = json.loads((out / "feshbach.json").read_text())
    assert payload["regime"].startswith("phi_zero")
    assert "W_vector" in payload


def test_bands_command(tmp_path):
    cfg = parse_config(CONST_MASS)
    out = tmp_path / "b"
    assert dispatch("bands", cfg, str(out), threads=1) == EXIT_OK
    lines = (out / "bands.csv").read_text().strip().splitlines()
    assert lines[0] == "k1,k2,band_index,eigenvalue"
    # 3x3 grid, full dense spectrum per k: n = 2 (2*6+1)^2 bands
    assert len(lines) == 1 + 9 * 2 * (2 * 6 + 1) ** 2


def test_physical_command(tmp_path, capsys):
    cfg = parse_config(CONST_MASS + "\n[sweep]\nl = 1e-8\nmu = 1e-21\n"
                       "hbar_vf = 1.0546e-28\n")
    out = tmp_path / "p"
    assert dispatch("physical", cfg, str(out), threads=1) == EXIT_OK
    payload = json.loads((out / "physical.json").read_text())
    assert payload["E_g_J"] > 0
    assert "E_g" in capsys.readouterr().out


def test_sweep_beta_command_and_determinism(tmp_path):
    cfg = parse_config(ANNULUS)
    outs = []
    for name in ("s1", "s2"):
        out = tmp_path / name
        assert dispatch("sweep-beta", cfg, str(out), threads=1, seed=3) == EXIT_OK
        outs.append(out)
    payload = json.loads((outs[0] / "sweep.json").read_text())
    assert abs(payload["fit"]["slope"] - 3.0) <= 0.5
    for fname in ("sweep.json", "sweep_points.csv", "sweep.dat"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_memory_refusal_maps_to_validation_exit(tmp_path):
    cfg = parse_config(MINIMAL + "\n[fiber]\nm = 20\nbeta = 0.2\n"
                       "memory_limit_mb = 1\n\n[scan]\ngrid_n = 3\n"
                       "refine_depth = 0\n")
    assert dispatch("gap", cfg, str(tmp_path / "m"), threads=1) == EXIT_VALIDATION
