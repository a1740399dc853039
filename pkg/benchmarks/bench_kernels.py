#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Run as:  python benchmarks/bench_kernels.py
The active backend follows DIRACGAP_NUMBA (auto/1/0); both paths are
timed regardless, and their results are compared.
"""
import argparse
import time

import numpy as np

from diracgap import _kernels
from diracgap.fiber import index_set
from diracgap.profiles import annulus_profile, fourier_table


def timeit(fn, *args, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_hyp1(n_ring, width, repeat):
    ann = annulus_profile(n_ring, width)
    cutoff = n_ring + width
    table = fourier_table(ann, 1.0, cutoff)
    w = table.off
    span = np.arange(-cutoff, cutoff + 1)
    g1, g2 = np.meshgrid(span, span, indexing="ij")
    coeff = table.data[g1 + w, g2 + w]
    keep = (np.abs(coeff) > 0) & ~((g1 == 0) & (g2 == 0))
    m = np.stack([g1[keep], g2[keep]], axis=1).astype(np.int64)
    c = coeff[keep].astype(complex)
    print(f"hyp-1 pair sum, annulus({n_ring},{width}): {m.shape[0]} modes, "
          f"{m.shape[0] ** 2 / 1e6:.1f}M pairs")

    t_np, (s_np, _) = timeit(_kernels.numpy_hyp1_pair_sum, m, c, table.data, w,
                             repeat=repeat)
    row = [("numpy", t_np, s_np.real)]
    if _kernels.BACKEND == "numba":
        _kernels.hyp1_pair_sum(m[:4], c[:4], table.data, w)  # JIT warmup
        t_nb, (s_nb, _) = timeit(_kernels.hyp1_pair_sum, m, c, table.data, w,
                                 repeat=repeat)
        row.append(("numba", t_nb, s_nb.real))
        assert abs(s_nb - s_np) <= 1e-10 * max(abs(s_np), 1.0), "backends disagree"
    for name, t, s in row:
        print(f"  {name:>6}: {t:8.3f} s   S = {s:.6f}")
    if len(row) == 2:
        print(f"  speedup: {row[0][1] / row[1][1]:.1f}x")


def bench_mass_fill(cutoff, repeat):
    ann = annulus_profile(4, 1)
    table = fourier_table(ann, 1.0, cutoff)
    idx = index_set(cutoff)
    n = 2 * idx.shape[0]
    print(f"dense mass fill, M = {cutoff}: n = {n}")

    def run_np():
        h = np.zeros((n, n), dtype=complex)
        _kernels.numpy_mass_fill(h, idx, table.data, table.off, 0.3)
        return h

    t_np, h_np = timeit(run_np, repeat=repeat)
    print(f"  {'numpy':>6}: {t_np:8.3f} s")
    if _kernels.BACKEND == "numba":
        def run_nb():
            h = np.zeros((n, n), dtype=complex)
            _kernels.mass_fill(h, idx, table.data, table.off, 0.3)
            return h

        run_nb()  # warmup
        t_nb, h_nb = timeit(run_nb, repeat=repeat)
        assert np.array_equal(h_np, h_nb) or np.max(np.abs(h_np - h_nb)) < 1e-15
        print(f"  {'numba':>6}: {t_nb:8.3f} s")
        print(f"  speedup: {t_np / t_nb:.1f}x")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ring", type=int, default=40, help="annulus ring radius")
    ap.add_argument("--width", type=int, default=10, help="annulus half-width")
    ap.add_argument("--cutoff", type=int, default=16, help="assembly cutoff M")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"active backend: {_kernels.BACKEND}")
    bench_hyp1(args.ring, args.width, args.repeat)
    bench_mass_fill(args.cutoff, args.repeat)


if __name__ == "__main__":
    main()
