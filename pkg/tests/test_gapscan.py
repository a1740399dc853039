"""Zone scans: analytic-oracle minima, refinement monotonicity, and the
Lipschitz certificate."""
import math

import numpy as np
import pytest

from diracgap.gapscan import GapReport, ScanSpec, global_gap, min_abs_eig
from diracgap.profiles import square_profile

CONST = square_profile(1.0)  # chi-hat = delta_0: analytic dispersion


def test_min_abs_free_cases(disk02):
    v, _ = min_abs_eig(disk02, 0.3, 0.0, (0.0, 0.0), 4)
    assert v <= 1e-12
    v, _ = min_abs_eig(disk02, 0.3, 0.0, (0.5, 0.5), 4)
    assert abs(v - np.pi * math.sqrt(2)) <= 1e-12


def test_min_abs_constant_mass_oracle(rng):
    for _ in range(5):
        k = tuple(rng.uniform(-0.4, 0.4, 2))
        v, _ = min_abs_eig(CONST, 1.0, 0.5, k, 4)
        assert abs(v - math.sqrt(4 * np.pi ** 2 * (k[0] ** 2 + k[1] ** 2) + 0.25)) <= 1e-10


def test_global_gap_constant_mass_small():
    rep = global_gap(CONST, 1.0, 0.5, 6, ScanSpec(5, 1), solver="dense")
    assert abs(rep.grid_min - 0.5) <= 1e-9
    assert rep.argmin_k == (0.0, 0.0)
    assert rep.certified_lower <= rep.grid_min


def test_global_gap_gapless_free(disk02):
    rep = global_gap(disk02, 0.3, 0.0, 4, ScanSpec(3, 0), solver="dense")
    assert rep.grid_min <= 1e-12


def test_even_grid_rejected():
    with pytest.raises(ValueError, match="odd"):
        ScanSpec(8, 1)


def test_refinement_monotonicity():
    rep = global_gap(CONST, 1.0, 0.5, 5, ScanSpec(5, 3), solver="dense")
    mins = [t["grid_min"] for t in rep.trace]
    certs = [t["certified_lower"] for t in rep.trace]
    assert all(b <= a + 1e-15 for a, b in zip(mins, mins[1:]))
    assert all(b >= a - 1e-15 for a, b in zip(certs, certs[1:]))
    assert rep.certified_lower <= rep.grid_min


def test_half_zone_matches_full(disk02):
    full = global_gap(disk02, 0.4, 0.3, 5, ScanSpec(5, 1, half_zone=False),
                      solver="dense")
    half = global_gap(disk02, 0.4, 0.3, 5, ScanSpec(5, 1, half_zone=True),
                      solver="dense")
    assert abs(full.grid_min - half.grid_min) <= 1e-9
    # the half scan does strictly fewer evaluations
    assert len(half.per_k) < len(full.per_k)


def test_certificate_bounds_offgrid_samples(rng):
    rep = global_gap(CONST, 1.0, 0.5, 5, ScanSpec(5, 2), solver="dense")
    for _ in range(100):
        k = tuple(rng.uniform(-0.5, 0.5, 2))
        v, _ = min_abs_eig(CONST, 1.0, 0.5, k, 5)
        assert v >= rep.certified_lower - 1e-12


def test_iterative_scan_matches_dense(disk02):
    spec = ScanSpec(3, 1)
    d = global_gap(disk02, 0.35, 0.25, 8, spec, solver="dense")
    i = global_gap(disk02, 0.35, 0.25, 8, spec, solver="iterative", seed=0)
    assert abs(d.grid_min - i.grid_min) <= 1e-8 * d.grid_min
    assert d.argmin_k == i.argmin_k


def test_threaded_scan_deterministic(disk02):
    spec = ScanSpec(3, 1)
    a = global_gap(disk02, 0.35, 0.25, 6, spec, solver="dense", threads=1)
    b = global_gap(disk02, 0.35, 0.25, 6, spec, solver="dense", threads=4)
    assert a.grid_min == b.grid_min
    assert a.argmin_k == b.argmin_k
    assert a.per_k == b.per_k


def test_report_serializes():
    rep = global_gap(CONST, 1.0, 0.5, 4, ScanSpec(3, 1), solver="dense")
    d = rep.to_dict()
    assert set(d) >= {"grid_min", "argmin_k", "certified_lower", "k_grid_spec",
                      "trace", "n_evaluations"}
    assert isinstance(rep, GapReport)
