"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Backend selection is done once at import via the environment variable
DIRACGAP_NUMBA:

  "auto" (default)  use numba when importable, numpy otherwise
  "1" / "true"      require numba (ImportError if missing)
  "0" / "false"     force the numpy fallback

Both backends implement the same contracts and agree to ~1e-13 relative
(summation order differs).  benchmarks/bench_kernels.py compares them.
"""
from __future__ import annotations

import os

import numpy as np

_HYP1_CHUNK = 256


def _numpy_hyp1_pair_sum(m, c, table, off):
    """S = sum_{i,j} (m_i.m_j)/(|m_i|^2 |m_j|^2) conj(c_i) c_j t[m_i - m_j].

    Returns (accumulated complex sum, accumulated magnitude of the terms).
    Chunked over i to bound the (chunk, n) temporaries.
    """
    mf = m.astype(np.float64)
    n2 = mf[:, 0] ** 2 + mf[:, 1] ** 2
    acc = 0.0 + 0.0j
    mag = 0.0
    n = m.shape[0]
    for lo in range(0, n, _HYP1_CHUNK):
        hi = min(lo + _HYP1_CHUNK, n)
        dot = mf[lo:hi, 0, None] * mf[None, :, 0] + mf[lo:hi, 1, None] * mf[None, :, 1]
        d1 = m[lo:hi, 0, None] - m[None, :, 0] + off
        d2 = m[lo:hi, 1, None] - m[None, :, 1] + off
        t = table[d1, d2]
        w = dot / (n2[lo:hi, None] * n2[None, :])
        terms = w * np.conj(c[lo:hi, None]) * c[None, :] * t
        acc += terms.sum()
        mag += np.abs(terms).sum()
    return acc, mag


def _numpy_mass_fill(h, m, table, off, beta):
    """Add the beta * chi-hat(m_i - m_j) * sigma3 blocks to the 2x2-blocked h."""
    t = table[m[:, 0, None] - m[None, :, 0] + off,
              m[:, 1, None] - m[None, :, 1] + off]
    h[0::2, 0::2] += beta * t
    h[1::2, 1::2] -= beta * t


def _make_numba_kernels():
    from numba import njit

    @njit(cache=True)
    def hyp1_pair_sum(m, c, table, off):
        n = m.shape[0]
        acc = 0.0 + 0.0j
        mag = 0.0
        for i in range(n):
            mx = float(m[i, 0])
            my = float(m[i, 1])
            ni = mx * mx + my * my
            ci = np.conj(c[i]) / ni
            for j in range(n):
                px = float(m[j, 0])
                py = float(m[j, 1])
                t = table[m[i, 0] - m[j, 0] + off, m[i, 1] - m[j, 1] + off]
                if t == 0.0:
                    continue
                term = (mx * px + my * py) / (px * px + py * py) * ci * c[j] * t
                acc += term
                mag += abs(term)
        return acc, mag

    @njit(cache=True)
    def mass_fill(h, m, table, off, beta):
        n = m.shape[0]
        for i in range(n):
            for j in range(n):
                t = table[m[i, 0] - m[j, 0] + off, m[i, 1] - m[j, 1] + off]
                if t != 0.0:
                    h[2 * i, 2 * j] += beta * t
                    h[2 * i + 1, 2 * j + 1] -= beta * t

    return hyp1_pair_sum, mass_fill


def _select_backend():
    mode = os.environ.get("DIRACGAP_NUMBA", "auto").strip().lower()
    if mode in ("0", "false", "no", "numpy"):
        return "numpy"
    if mode in ("1", "true", "yes", "numba"):
        _make_numba_kernels()  # raises if numba is unavailable
        return "numba"
    try:
        _make_numba_kernels()
        return "numba"
    except ImportError:
        return "numpy"


BACKEND = _select_backend()

if BACKEND == "numba":
    hyp1_pair_sum, mass_fill = _make_numba_kernels()
else:
    hyp1_pair_sum, mass_fill = _numpy_hyp1_pair_sum, _numpy_mass_fill

# fallbacks always importable under their own names (benchmarks use both)
numpy_hyp1_pair_sum = _numpy_hyp1_pair_sum
numpy_mass_fill = _numpy_mass_fill
