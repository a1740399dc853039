"""Command-line interface: sectioned key=value configs, subcommand
dispatch, JSON/CSV emission, and a run manifest.

Exit codes: 0 success, 2 validation error (bad config, bad usage,
resource refusal), 3 numerical failure (non-convergence, singular blocks).
Reports and CSV files are bit-reproducible for a fixed config and seed;
the manifest additionally records wall time and is exempt from that
contract.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .bessel import kernel_bound_check, kernel_sample
from .experiments import (SweepReport, default_m_rule, sweep_alpha,
                          sweep_beta, to_physical)
from .feshbach import QBlockSingularError, build_report
from .fiber import EigensolverError, assemble, eigenvalues_dense, \
    eigenvalues_near_zero
from .gapscan import ScanSpec, global_gap
from .profiles import (MassProfile, annulus_profile, disk_profile,
                       fourier_table, grid_profile, hyp1_details, normalize,
                       square_profile)

SUBCOMMANDS = ("fourier", "bands", "gap", "sweep-alpha", "sweep-beta",
               "hyp1", "feshbach", "kernel", "physical", "selftest")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    """Invalid run configuration (unknown key, type or range violation)."""


# key -> (type, default, validator, description)
def _positive(x): return x > 0
def _nonneg(x): return x >= 0


_SCHEMA = {
    "potential": {
        "shape": (str, None, lambda s: s in ("disk", "square", "annulus", "grid", "modes"),
                  "disk | square | annulus | grid | modes"),
        "r": (float, 0.2, lambda x: 0 < x < 0.5, "disk radius in (0, 1/2)"),
        "a": (float, 0.4, lambda x: 0 < x <= 1, "square side in (0, 1]"),
        "n": (int, 4, lambda x: x >= 2, "annulus ring radius"),
        "width": (int, 1, _positive, "annulus ring half-width"),
        "path": (str, "", lambda s: True, "grid/modes data file"),
        "height": (float, 1.0, lambda x: x != 0, "profile scale factor"),
        "normalized": (bool, False, lambda x: True, "rescale to unit L2 norm"),
    },
    "fiber": {
        "alpha": (float, 1.0, lambda x: 0 < x <= 1, "alpha in (0, 1]"),
        "beta": (float, 0.0, _nonneg, "beta >= 0"),
        "m": (int, 14, lambda x: x >= 1, "plane-wave cutoff M >= 1"),
        "solver": (str, "dense", lambda s: s in ("dense", "iterative"),
                   "dense | iterative"),
        "residual_tol": (float, 1e-8, _positive, "iterative residual tolerance"),
        "memory_limit_mb": (float, 4096.0, _positive, "dense matrix budget"),
    },
    "scan": {
        "grid_n": (int, 9, lambda x: x >= 3 and x % 2 == 1, "odd grid size >= 3"),
        "refine_depth": (int, 2, _nonneg, "local refinement rounds"),
        "half_zone": (bool, False, lambda x: True, "exploit k -> -k symmetry"),
    },
    "sweep": {
        "alphas": (list, [0.2, 0.25, 0.3, 0.35, 0.4], lambda v: len(v) >= 3,
                   "alpha sweep values"),
        "betas": (list, [0.1, 0.15, 0.2, 0.25, 0.3], lambda v: len(v) >= 3,
                  "beta sweep values"),
        "grid_n": (int, 5, lambda x: x >= 3 and x % 2 == 1, "sweep scan grid"),
        "refine_depth": (int, 2, _nonneg, "sweep refinement rounds"),
        "l": (float, 1e-8, _positive, "supercell side L in meters"),
        "mu": (float, 1.602e-20, _nonneg, "mass strength in joules"),
        "hbar_vf": (float, 1.0546e-34 * 1.0e6, _positive, "hbar * v_F in J m"),
    },
    "feshbach": {
        "z": (float, 0.0, lambda x: abs(x) <= math.pi / 2, "|z| <= pi/2"),
        "k1": (float, 0.0, lambda x: abs(x) <= 0.5, "k1 in [-1/2, 1/2]"),
        "k2": (float, 0.0, lambda x: abs(x) <= 0.5, "k2 in [-1/2, 1/2]"),
        "fd_step": (float, 0.0, _nonneg, "w'(0) difference step (0 = auto)"),
        "cutoff": (int, 0, _nonneg, "hyp-1 cutoff (0 = use fiber M)"),
    },
    "kernel": {
        "r_min": (float, 0.05, _positive, "smallest distance"),
        "r_max": (float, 4.0, _positive, "largest distance"),
        "samples": (int, 200, lambda x: x >= 2, "log-spaced sample count"),
    },
    "output": {
        "dir": (str, "out", lambda s: True, "output directory"),
        "seed": (int, 0, _nonneg, "seed for randomized test vectors"),
    },
}


@dataclass
class RunConfig:
    values: Dict[str, Dict[str, object]]
    echo: Dict[str, Dict[str, object]] = field(default_factory=dict)

    def __getitem__(self, section: str) -> Dict[str, object]:
        return self.values[section]

    def profile(self) -> MassProfile:
        pot = self.values["potential"]
        shape = pot["shape"]
        if shape == "disk":
            prof = disk_profile(pot["r"], pot["height"])
        elif shape == "square":
            prof = square_profile(pot["a"], pot["height"])
        elif shape == "annulus":
            prof = annulus_profile(pot["n"], pot["width"])
        elif shape == "grid":
            if not pot["path"]:
                raise ConfigError("[potential] grid shape needs path = <csv of samples>")
            vals = np.loadtxt(pot["path"], delimiter=",")
            prof = grid_profile(vals, pot["height"])
        else:  # modes
            if not pot["path"]:
                raise ConfigError("[potential] modes shape needs path = <csv m1,m2,re,im>")
            modes = {}
            with open(pot["path"], newline="") as fh:
                for row in csv.reader(fh):
                    if not row or row[0].startswith("#") or row[0] == "m1":
                        continue
                    m1, m2, re_, im_ = int(row[0]), int(row[1]), float(row[2]), float(row[3])
                    modes[(m1, m2)] = re_ + 1j * im_
            prof = MassProfile(shape="modes", modes=modes, height=pot["height"])
        if pot["normalized"]:
            prof = normalize(prof)
        return prof


def _key_line(text: str, section: str, key: str) -> Optional[int]:
    cur = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            cur = s[1:-1].strip().lower()
        elif cur == section and "=" in s:
            if s.split("=", 1)[0].strip().lower() == key:
                return i
    return None


def _coerce(section: str, key: str, raw: str, text: str):
    typ, _, validator, desc = _SCHEMA[section][key]
    where = _key_line(text, section, key)
    loc = f"[{section}].{key}" + (f" (line {where})" if where else "")
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                val = True
            elif low in ("0", "false", "no", "off"):
                val = False
            else:
                raise ValueError(raw)
        elif typ is list:
            val = [float(tok) for tok in raw.replace(",", " ").split()]
        else:
            val = typ(raw)
    except ValueError as exc:
        raise ConfigError(f"{loc}: cannot parse {raw!r} as {typ.__name__}") from exc
    if not validator(val):
        raise ConfigError(f"{loc}: value {raw!r} out of range ({desc})")
    return val


def parse_config(text: str) -> RunConfig:
    """Parse and validate a sectioned key=value config document."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    values = {sec: {k: spec[1] for k, spec in keys.items()}
              for sec, keys in _SCHEMA.items()}
    for sec in parser.sections():
        s = sec.lower()
        if s not in _SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in parser.items(sec):
            k = key.lower()
            if k not in _SCHEMA[s]:
                where = _key_line(text, s, k)
                loc = f" (line {where})" if where else ""
                raise ConfigError(f"unknown key [{sec}].{key}{loc}; "
                                  f"known keys: {sorted(_SCHEMA[s])}")
            values[s][k] = _coerce(s, k, raw, text)
    if parser.has_section("potential") and "shape" not in dict(parser.items("potential")):
        raise ConfigError("[potential] must set shape")
    if not parser.has_section("potential"):
        raise ConfigError("config must contain a [potential] section with shape")
    cfg = RunConfig(values=values)
    cfg.echo = {sec: dict(kv) for sec, kv in values.items()}
    return cfg


DEFAULT_CONFIG = "[potential]\nshape = disk\nr = 0.2\nnormalized = true\n"


# ---------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------

def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: List[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _write_manifest(out: Path, command: str, cfg: RunConfig, t0: float,
                    threads: int, seed: int) -> None:
    _write_json(out / "manifest.json", {
        "command": command,
        "code_version": __version__,
        "config": cfg.echo,
        "threads": threads,
        "seed": seed,
        "wall_time_s": time.time() - t0,
    })


# ---------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------

def _cmd_fourier(cfg: RunConfig, out: Path, threads: int, seed: int) -> int:
    prof = cfg.profile()
    fib = cfg["fiber"]
    table = fourier_table(prof, fib["alpha"], fib["m"])
    _write_csv(out / "fourier.csv", ["m1", "m2", "re", "im"], table.rows())
    _write_json(out / "fourier.json", {
        "alpha": fib["alpha"], "cutoff": fib["m"], "phi": prof.phi,
        "l1_norm": prof.l1_norm, "l2_norm": prof.l2_norm,
        "linf_norm": prof.linf_norm,
    })
    return EXIT_OK


def _scan_grid_ks(scan: ScanSpec):
    half = (scan.grid_n - 1) // 2
    h = 1.0 / scan.grid_n
    return [(i * h, j * h) for i in range(-half, half + 1)
            for j in range(-half, half + 1)]


def _cmd_bands(cfg: RunConfig, out: Path, threads: int, seed: int) -> int:
    prof = cfg.profile()
    fib = cfg["fiber"]
    scan = ScanSpec(cfg["scan"]["grid_n"], 0, cfg["scan"]["half_zone"])
    rows = []
    table = fourier_table(prof, fib["alpha"], fib["m"])
    for k in _scan_grid_ks(scan):
        if fib["solver"] == "dense":
            op = assemble(prof, fib["alpha"], fib["beta"], k, fib["m"],
                          dense=True, memory_limit_mb=fib["memory_limit_mb"],
                          table=table)
            vals = eigenvalues_dense(op, residuals=False).eigenvalues
        else:
            op = assemble(prof, fib["alpha"], fib["beta"], k, fib["m"],
                          dense=False, table=table)
            vals = eigenvalues_near_zero(op, 8, seed=seed).eigenvalues
        for idx, lam in enumerate(vals):
            rows.append((k[0], k[1], idx, float(lam)))
    _write_csv(out / "bands.csv", ["k1", "k2", "band_index", "eigenvalue"], rows)
    _write_json(out / "bands.json", {"n_k": scan.grid_n ** 2,
                                     "bands_per_k": len(rows) // scan.grid_n ** 2})
    return EXIT_OK


def _cmd_gap(cfg: RunConfig, out: Path, threads: int, seed: int) -> int:
    prof = cfg.profile()
    fib = cfg["fiber"]
    scan = ScanSpec(cfg["scan"]["grid_n"], cfg["scan"]["refine_depth"],
                    cfg["scan"]["half_zone"])
    rep = global_gap(prof, fib["alpha"], fib["beta"], fib["m"], scan,
                     solver=fib["solver"], threads=threads, seed=seed,
                     memory_limit_mb=fib["memory_limit_mb"])
    _write_json(out / "gap.json", rep.to_dict())
    _write_csv(out / "gap_points.csv", ["k1", "k2", "min_abs_eigenvalue"],
               rep.per_k)
    return EXIT_OK


def _sweep_common(out: Path, rep: SweepReport) -> int:
    _write_json(out / "sweep.json", rep.to_dict())
    _write_csv(out / "sweep_points.csv",
               ["parameter", "gap_half_width", "certified_lower", "residual",
                "cutoff", "reliable"],
               [(p.parameter, p.gap, p.certified_lower, p.residual, p.cutoff,
                 int(p.reliable)) for p in rep.points])
    with open(out / "sweep.dat", "w") as fh:
        for p in rep.points:
            fh.write(f"{p.parameter!r} {p.gap!r}\n")
    return EXIT_OK


def _cmd_sweep_alpha(cfg: RunConfig, out: Path, threads: int, seed: int) -> int:
    prof = cfg.profile()
    sw = cfg["sweep"]
    scan = ScanSpec(sw["grid_n"], sw["refine_depth"])
    rep = sweep_alpha(prof, cfg["fiber"]["beta"], sw["alphas"],
                      default_m_rule, scan, solver=cfg["fiber"]["solver"],
                      threads=threads, seed=seed,
                      memory_limit_mb=cfg["fiber"]["memory_limit_mb"])
    return _sweep_common(out, rep)


def _cmd_sweep_beta(cfg: RunConfig, out: Path, threads: int, seed: int) -> int:
    prof = cfg.profile()
    sw = cfg["sweep"]
    scan = ScanSpec(sw["grid_n"], sw["refine_depth"])
    rep = sweep_beta(prof, cfg["fiber"]["alpha"], sw["betas"],
                     cfg["fiber"]["m"], scan, solver=cfg["fiber"]["solver"],
                     threads=threads, seed=seed,
                     memory_limit_mb=cfg["fiber"]["memory_limit_mb"])
    return _sweep_common(out, rep)


def _cmd_hyp1(cfg: RunConfig, out: Path, threads: int, seed: int) -> int:
    prof = cfg.profile()
    cut = cfg["feshbach"]["cutoff"] or cfg["fiber"]["m"]
    det = hyp1_details(prof, cut)
    payload = {"s_chi": det.value, "cutoff": det.cutoff, "n_modes": det.n_modes,
               "imag_ratio": det.imag_ratio, "tail_estimate": det.tail_estimate}
    _write_json(out / "hyp1.json", payload)
    print(f"S(chi) = {det.value!r}  (cutoff {det.cutoff}, {det.n_modes} modes, "
          f"tail estimate {det.tail_estimate:.3e})")
    return EXIT_OK


def _cmd_feshbach(cfg: RunConfig, out: Path, threads: int, seed: int) -> int:
    prof = cfg.profile()
    fib, fsh = cfg["fiber"], cfg["feshbach"]
    rep = build_report(prof, fib["alpha"], fib["beta"], (fsh["k1"], fsh["k2"]),
                       fsh["z"], fib["m"], fsh["fd_step"] or None)
    _write_json(out / "feshbach.json", rep.to_dict())
    return EXIT_OK


def _cmd_kernel(cfg: RunConfig, out: Path, threads: int, seed: int) -> int:
    kc = cfg["kernel"]
    rep = kernel_bound_check(kc["r_min"], kc["r_max"], kc["samples"])
    _write_csv(out / "kernel.csv", ["r", "max_entry", "bound_ratio"],
               [(s.r, float(np.max(np.abs(s.kernel))), s.bound_ratio)
                for s in rep.samples])
    _write_json(out / "kernel.json", {
        "max_bound_ratio": rep.max_bound_ratio, "envelope": rep.envelope,
        "within_envelope": rep.within_envelope, "empirical_c": rep.empirical_c,
    })
    print(f"kernel bound ratio max {rep.max_bound_ratio:.4f} vs envelope "
          f"{rep.envelope:.4f}: {'OK' if rep.within_envelope else 'VIOLATED'}")
    return EXIT_OK


def _cmd_physical(cfg: RunConfig, out: Path, threads: int, seed: int) -> int:
    prof = cfg.profile()
    fib, sw = cfg["fiber"], cfg["sweep"]
    beta = sw["mu"] * sw["l"] / sw["hbar_vf"]
    scan = ScanSpec(cfg["scan"]["grid_n"], cfg["scan"]["refine_depth"],
                    cfg["scan"]["half_zone"])
    rep = global_gap(prof, fib["alpha"], beta, fib["m"], scan,
                     solver=fib["solver"], threads=threads, seed=seed,
                     memory_limit_mb=fib["memory_limit_mb"])
    phys = to_physical(rep.grid_min, fib["alpha"], sw["l"], sw["mu"],
                       sw["hbar_vf"], prof.phi)
    payload = phys.to_dict()
    payload["gap_half_width"] = rep.grid_min
    payload["argmin_k"] = list(rep.argmin_k)
    _write_json(out / "physical.json", payload)
    print(f"E_g = {phys.E_g:.6e} J at beta = {phys.beta:.4f}")
    return EXIT_OK


def _cmd_selftest(cfg: RunConfig, out: Path, threads: int, seed: int) -> int:
    """Quick end-to-end checks of the analytically known cases."""
    from .bessel import bessel_j1
    from .feshbach import SIG3, schur_complement
    checks: List[Tuple[str, bool]] = []

    prof = normalize(disk_profile(0.2))
    from .profiles import fourier_coeff
    sym_ok = all(
        abs(fourier_coeff(prof, 0.5, (-m1, -m2))
            - np.conj(fourier_coeff(prof, 0.5, (m1, m2)))) < 1e-12
        for m1, m2 in ((1, 2), (3, -4), (0, 5)))
    checks.append(("fourier conjugate symmetry", sym_ok))
    checks.append(("phi = alpha^2-scaled mean",
                   abs(fourier_coeff(prof, 0.5, (0, 0)) - 0.25 * prof.phi) < 1e-10))
    checks.append(("normalize idempotent",
                   abs(normalize(prof).height - prof.height) < 1e-12))

    op = assemble(prof, 0.3, 0.0, (0.0, 0.0), 2, dense=True)
    vals = eigenvalues_dense(op).eigenvalues
    free = sorted(abs(v) for v in vals)[:2]
    checks.append(("free operator gapless", max(free) < 1e-12))
    sq = square_profile(1.0)
    op2 = assemble(sq, 1.0, 0.5, (0.0, 0.0), 6, dense=True)
    v2 = eigenvalues_dense(op2).eigenvalues
    checks.append(("constant mass gap 0.5",
                   abs(min(abs(v) for v in v2) - 0.5) < 1e-10))
    checks.append(("spectrum symmetric at k=0",
                   float(np.max(np.abs(np.sort(v2) + np.sort(-v2)[::-1]))) < 1e-9))
    f, _ = schur_complement(assemble(prof, 0.3, 0.0, (0.1, 0.0), 4, dense=True), 0.0)
    checks.append(("free Schur complement",
                   float(np.max(np.abs(f + 2 * np.pi * 0.1 * np.array([[0, 1], [1, 0]])))) < 1e-12))
    checks.append(("J1(0) = 0", bessel_j1(0.0) == 0.0))
    ann = annulus_profile(4, 1)
    checks.append(("annulus mean-free", ann.phi == 0.0))
    single = MassProfile(shape="modes", modes={(1, 2): 1.0, (-1, -2): 1.0})
    from .profiles import hyp1_sum
    checks.append(("single cosine S = 0", hyp1_sum(single, 3) == 0.0))

    width = max(len(name) for name, _ in checks)
    ok = True
    for name, good in checks:
        print(f"  {name:<{width}}  {'PASS' if good else 'FAIL'}")
        ok &= good
    _write_json(out / "selftest.json",
                {"checks": {n: bool(g) for n, g in checks}, "passed": bool(ok)})
    return EXIT_OK if ok else EXIT_NUMERICAL


_HANDLERS = {
    "fourier": _cmd_fourier,
    "bands": _cmd_bands,
    "gap": _cmd_gap,
    "sweep-alpha": _cmd_sweep_alpha,
    "sweep-beta": _cmd_sweep_beta,
    "hyp1": _cmd_hyp1,
    "feshbach": _cmd_feshbach,
    "kernel": _cmd_kernel,
    "physical": _cmd_physical,
    "selftest": _cmd_selftest,
}


def dispatch(subcommand: str, cfg: RunConfig, out_dir: str, *,
             threads: int = 1, seed: Optional[int] = None) -> int:
    """Run one subcommand, writing its artifacts and manifest into out_dir."""
    if subcommand not in _HANDLERS:
        print(f"unknown subcommand {subcommand!r}; expected one of "
              f"{', '.join(SUBCOMMANDS)}", file=sys.stderr)
        return EXIT_VALIDATION
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    use_seed = cfg["output"]["seed"] if seed is None else seed
    try:
        code = _HANDLERS[subcommand](cfg, out, threads, use_seed)
    except (ConfigError, ValueError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (EigensolverError, QBlockSingularError, ArithmeticError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _write_manifest(out, subcommand, cfg, t0, threads, use_seed)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    ap = argparse.ArgumentParser(
        prog="diracgap",
        description="Spectral gaps of the 2D Dirac operator with a periodic "
                    "mass insertion: zone scans, scaling sweeps, and "
                    "effective-Hamiltonian diagnostics.")
    ap.add_argument("subcommand", help=f"one of: {', '.join(SUBCOMMANDS)}")
    ap.add_argument("--config", help="path to the run configuration file")
    ap.add_argument("--out", help="output directory (overrides [output].dir)")
    ap.add_argument("--threads", type=int, default=0,
                    help="worker threads for k-scans (0 = auto)")
    ap.add_argument("--seed", type=int, default=None,
                    help="seed override for randomized test vectors")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK

    if args.subcommand not in _HANDLERS:
        ap.print_usage(sys.stderr)
        print(f"unknown subcommand {args.subcommand!r}; expected one of "
              f"{', '.join(SUBCOMMANDS)}", file=sys.stderr)
        return EXIT_VALIDATION

    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
    elif args.subcommand in ("selftest", "kernel"):
        text = DEFAULT_CONFIG
    else:
        print("error: --config is required for this subcommand", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    out_dir = args.out or cfg["output"]["dir"]
    threads = args.threads
    if threads == 0:
        import os
        threads = os.cpu_count() or 1
    return dispatch(args.subcommand, cfg, out_dir, threads=threads,
                    seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
