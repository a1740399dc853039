"""Brillouin-zone scan for the spectral gap around zero.

The scan samples min|eigenvalue| of the fiber operator on a uniform odd
grid over Omega = (-1/2, 1/2]^2, refines locally by factor 2 around the
incumbent minimum, and certifies a lower bound on the continuum-over-k
minimum of the truncated model from the Lipschitz dependence on k: the
k-dependence enters the operator as -2 pi sigma.k with ||sigma.e|| = 1,
so every eigenvalue moves by at most 2 pi |k - k'|.  Each leaf cell of
side s contributes the bound (its center value) - 2 pi * s/sqrt(2), and
the certificate is the minimum over leaf cells; splitting a cell never
lowers its contribution, which makes the certificate monotone under
refinement.

Cell centers are kept in exact integer units of 1/(grid_n * 2^(depth+1)),
so mirror lookups, tie-breaking, and cache keys are exact.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .fiber import assemble, eigenvalues_near_zero, min_abs_dense
from .profiles import MassProfile, fourier_table

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ScanSpec:
    grid_n: int = 9
    refine_depth: int = 2
    half_zone: bool = False

    def __post_init__(self):
        if self.grid_n < 3 or self.grid_n % 2 == 0:
            raise ValueError("grid_n must be odd and >= 3 (k = 0 must be sampled)")
        if self.refine_depth < 0:
            raise ValueError("refine_depth must be >= 0")


@dataclass
class GapReport:
    grid_min: float
    argmin_k: Tuple[float, float]
    certified_lower: float
    k_grid_spec: dict
    per_k: List[Tuple[float, float, float]]      # (k1, k2, min_abs)
    trace: List[dict]                            # per refinement level
    residual_max: float
    solver: str

    def to_dict(self) -> dict:
        return {
            "grid_min": self.grid_min,
            "argmin_k": list(self.argmin_k),
            "certified_lower": self.certified_lower,
            "k_grid_spec": self.k_grid_spec,
            "residual_max": self.residual_max,
            "solver": self.solver,
            "trace": self.trace,
            "n_evaluations": len(self.per_k),
        }


def min_abs_eig(profile: MassProfile, alpha: float, beta: float,
                k: Tuple[float, float], cutoff: int, *,
                solver: str = "dense", seed: int = 0,
                memory_limit_mb: float = 4096.0, table=None) -> Tuple[float, float]:
    """(min |lambda|, residual) of the truncated fiber operator at k."""
    if solver == "dense":
        op = assemble(profile, alpha, beta, k, cutoff,
                      dense=True, memory_limit_mb=memory_limit_mb, table=table)
        return min_abs_dense(op)
    if solver == "iterative":
        op = assemble(profile, alpha, beta, k, cutoff, dense=False, table=table)
        spec = eigenvalues_near_zero(op, 2, seed=seed)
        i = int(np.argmin(np.abs(spec.eigenvalues)))
        return float(abs(spec.eigenvalues[i])), spec.residual_bound
    raise ValueError(f"unknown solver {solver!r}")


@dataclass
class _Cell:
    c1: int          # center, integer units
    c2: int
    level: int


def global_gap(profile: MassProfile, alpha: float, beta: float, cutoff: int,
               scan: ScanSpec = ScanSpec(), *, solver: str = "dense",
               threads: int = 1, seed: int = 0,
               memory_limit_mb: float = 4096.0) -> GapReport:
    """Scan the zone, refine around the minimum, and certify a lower bound."""
    g = scan.grid_n
    depth = scan.refine_depth
    unit = 1.0 / (g * 2 ** (depth + 1))          # physical size of one integer step
    level0_step = 2 ** (depth + 1)               # grid spacing in integer units
    table = fourier_table(profile, alpha, cutoff)

    cache: Dict[Tuple[int, int], Tuple[float, float]] = {}

    def canonical(c: Tuple[int, int]) -> Tuple[int, int]:
        if not scan.half_zone:
            return c
        neg = (-c[0], -c[1])
        return c if c >= neg else neg

    def evaluate(points: List[Tuple[int, int]]) -> None:
        todo = sorted({canonical(p) for p in points if canonical(p) not in cache})

        def one(c):
            k = (c[0] * unit, c[1] * unit)
            return min_abs_eig(profile, alpha, beta, k, cutoff, solver=solver,
                               seed=seed, memory_limit_mb=memory_limit_mb,
                               table=table)

        if threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(one, todo))
        else:
            results = [one(c) for c in todo]
        cache.update(dict(zip(todo, results)))

    def value(c: Tuple[int, int]) -> float:
        return cache[canonical(c)][0]

    half = (g - 1) // 2
    cells = [_Cell(i * level0_step, j * level0_step, 0)
             for i in range(-half, half + 1) for j in range(-half, half + 1)]
    evaluate([(c.c1, c.c2) for c in cells])

    def spacing_units(cell: _Cell) -> int:
        return level0_step // 2 ** cell.level

    def certified(cells_now: List[_Cell]) -> float:
        return min(value((c.c1, c.c2))
                   - 2.0 * math.pi * spacing_units(c) * unit / SQRT2
                   for c in cells_now)

    def current_min() -> Tuple[float, Tuple[int, int]]:
        best = min((v[0], c) for c, v in cache.items())
        return best[0], best[1]

    trace = [{"level": 0, "evaluations": len(cache),
              "grid_min": current_min()[0], "certified_lower": certified(cells)}]

    for level in range(depth):
        gmin, _ = current_min()
        to_refine = [c for c in cells
                     if value((c.c1, c.c2)) <= gmin
                     + 2.0 * math.pi * spacing_units(c) * unit]
        keep = [c for c in cells if c not in to_refine]
        children: List[_Cell] = []
        for c in to_refine:
            off = spacing_units(c) // 4
            for s1 in (-off, off):
                for s2 in (-off, off):
                    children.append(_Cell(c.c1 + s1, c.c2 + s2, c.level + 1))
        evaluate([(c.c1, c.c2) for c in children])
        cells = keep + children
        trace.append({"level": level + 1, "evaluations": len(cache),
                      "grid_min": current_min()[0],
                      "certified_lower": certified(cells)})

    gmin, argmin_units = current_min()
    # deterministic argmin: smallest k among ties (exact integer comparison)
    ties = sorted(c for c, v in cache.items() if v[0] == gmin)
    argmin_units = ties[0]
    per_k = sorted((c1 * unit, c2 * unit, v) for (c1, c2), (v, _) in cache.items())
    report = GapReport(
        grid_min=gmin,
        argmin_k=(argmin_units[0] * unit, argmin_units[1] * unit),
        certified_lower=certified(cells),
        k_grid_spec={"grid_n": g, "refine_depth": depth,
                     "half_zone": scan.half_zone, "unit": unit},
        per_k=per_k,
        trace=trace,
        residual_max=max(v[1] for v in cache.values()),
        solver=solver,
    )
    return report
