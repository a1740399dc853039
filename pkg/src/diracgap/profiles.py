"""Mass-insertion profiles: shapes, norms, Fourier data, and the triple
Fourier sum that drives the cubic gap regime.

A profile chi lives on the unit cell Omega = (-1/2, 1/2]^2.  Scaled
coefficients use the identity

    chi_alpha-hat(m) = alpha^2 * F[chi](alpha * m)

(F = continuous Fourier transform), valid because chi is supported inside
Omega.  Mode-list profiles occupy the whole cell, so they are pinned to
alpha = 1.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from . import _kernels
from .bessel import bessel_j1, bessel_j1_array

Mode = Tuple[int, int]

_CONJ_TOL = 1e-12


@dataclass(frozen=True)
class MassProfile:
    """A real mass profile chi on the unit cell.

    shape is one of 'disk', 'square', 'modes', 'grid'; `height` is an
    overall scale applied to the base shape.  Norm accessors are exact
    for analytic shapes, quadrature-based for grid shapes, and (for l1,
    and linf with signed coefficients) fine-grid estimates for mode lists.
    """
    shape: str
    height: float = 1.0
    radius: Optional[float] = None            # disk
    side: Optional[float] = None              # square
    modes: Optional[Dict[Mode, complex]] = None
    grid_values: Optional[np.ndarray] = None  # samples at cell midpoints
    normalized: bool = False

    def __post_init__(self):
        if self.shape == "disk":
            if self.radius is None or not (0.0 < self.radius < 0.5):
                raise ValueError("disk profile needs radius in (0, 1/2)")
        elif self.shape == "square":
            if self.side is None or not (0.0 < self.side <= 1.0):
                raise ValueError("square profile needs side in (0, 1]")
        elif self.shape == "modes":
            if not self.modes:
                raise ValueError("modes profile needs a nonempty coefficient map")
            for (m1, m2), c in self.modes.items():
                cc = self.modes.get((-m1, -m2))
                if cc is None or abs(np.conj(complex(c)) - complex(cc)) > _CONJ_TOL * max(1.0, abs(c)):
                    raise ValueError(
                        f"modes profile is not real: entry {(m1, m2)} lacks a conjugate partner")
        elif self.shape == "grid":
            v = self.grid_values
            if v is None or v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 2:
                raise ValueError("grid profile needs a square 2D sample array")
            if np.iscomplexobj(v) and np.max(np.abs(v.imag)) > 0:
                raise ValueError("grid profile must be real-valued")
        else:
            raise ValueError(f"unknown profile shape {self.shape!r}")

    # -- geometry ------------------------------------------------------
    @property
    def full_cell_support(self) -> bool:
        return self.shape == "modes"

    @property
    def mode_span(self) -> int:
        """max |m|_inf over nonzero coefficients (modes profiles only)."""
        if self.shape != "modes":
            raise ValueError("mode_span only applies to modes profiles")
        return max(max(abs(m1), abs(m2)) for (m1, m2), c in self.modes.items() if c != 0)

    def _modes_grid(self, n: int) -> np.ndarray:
        """Synthesize chi on an n x n cell grid (points j/n) via FFT."""
        c = np.zeros((n, n), dtype=complex)
        for (m1, m2), v in self.modes.items():
            c[m1 % n, m2 % n] += v
        vals = np.fft.ifft2(c) * n * n  # sum_m c_m e^{+2pi i m.x_j}
        return self.height * vals.real

    def _grid_for_norms(self) -> np.ndarray:
        if self.shape == "grid":
            return self.height * np.asarray(self.grid_values, dtype=float)
        if self.shape == "modes":
            n = max(256, 8 * self.mode_span)
            return self._modes_grid(n)
        raise AssertionError

    # -- norms ---------------------------------------------------------
    @property
    def phi(self) -> float:
        """Mean of chi over the cell; identical code path to chi-hat(0,0)."""
        return fourier_coeff(self, 1.0, (0, 0)).real

    @property
    def l1_norm(self) -> float:
        if self.shape == "disk":
            return abs(self.height) * math.pi * self.radius ** 2
        if self.shape == "square":
            return abs(self.height) * self.side ** 2
        v = self._grid_for_norms()
        return float(np.mean(np.abs(v)))

    @property
    def l2_norm(self) -> float:
        if self.shape == "disk":
            return abs(self.height) * math.sqrt(math.pi) * self.radius
        if self.shape == "square":
            return abs(self.height) * self.side
        if self.shape == "modes":
            return abs(self.height) * math.sqrt(
                sum(abs(c) ** 2 for c in self.modes.values()))
        v = self._grid_for_norms()
        return float(np.sqrt(np.mean(v ** 2)))

    @property
    def linf_norm(self) -> float:
        if self.shape in ("disk", "square"):
            return abs(self.height)
        if self.shape == "modes":
            cs = np.array(list(self.modes.values()), dtype=complex)
            if np.all(cs.imag == 0) and np.all(cs.real >= 0):
                return abs(self.height) * float(cs.real.sum())  # max at x = 0
            v = self._grid_for_norms()
            return float(np.max(np.abs(v)))
        v = self._grid_for_norms()
        return float(np.max(np.abs(v)))


def normalize(profile: MassProfile) -> MassProfile:
    """Rescale height so that the L2 norm over the cell is 1."""
    l2 = profile.l2_norm
    if l2 <= 0.0:
        raise ValueError("cannot normalize a zero profile")
    return replace(profile, height=profile.height / l2, normalized=True)


def disk_profile(radius: float, height: float = 1.0) -> MassProfile:
    return MassProfile(shape="disk", radius=radius, height=height)


def square_profile(side: float, height: float = 1.0) -> MassProfile:
    return MassProfile(shape="square", side=side, height=height)


def annulus_profile(n_ring: int, width: int) -> MassProfile:
    """Mode-list profile with c_m = 1 for n_ring - width <= |m| <= n_ring + width.

    chi(x) = sum over the annulus of e^{2 pi i m.x}; the annulus is symmetric
    under m -> -m so chi is real, and chi-hat(0,0) = 0.
    """
    if not (n_ring > width >= 1):
        raise ValueError("need n_ring > width >= 1")
    lo2 = (n_ring - width) ** 2
    hi2 = (n_ring + width) ** 2
    r = n_ring + width
    modes = {(m1, m2): 1.0 + 0.0j
             for m1 in range(-r, r + 1) for m2 in range(-r, r + 1)
             if lo2 <= m1 * m1 + m2 * m2 <= hi2}
    return MassProfile(shape="modes", modes=modes)


def grid_profile(values: np.ndarray, height: float = 1.0) -> MassProfile:
    return MassProfile(shape="grid", grid_values=np.asarray(values, dtype=float),
                       height=height)


# ---------------------------------------------------------------------
# Fourier data
# ---------------------------------------------------------------------

def _check_alpha(profile: MassProfile, alpha: float) -> None:
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if profile.full_cell_support and alpha != 1.0 and profile.mode_span > 0:
        # a constant profile is scale-invariant; everything else on the full
        # cell has no valid alpha-scaling
        raise ValueError("mode-list profiles occupy the full cell; alpha must be 1")


def _grid_phase_matrix(freqs: np.ndarray, n: int) -> np.ndarray:
    # grid samples sit at cell midpoints x_j = -1/2 + (j + 1/2)/n
    x = -0.5 + (np.arange(n) + 0.5) / n
    return np.exp(-2j * np.pi * np.outer(freqs, x))


def _grid_min_samples(profile: MassProfile, max_freq: float) -> None:
    n = profile.grid_values.shape[0]
    if n < 8 * max(1.0, max_freq):
        raise ValueError(
            f"grid profile too coarse: {n} samples/axis but the requested "
            f"coefficient oscillates {max_freq:.1f} times per cell "
            f"(need >= 8 samples per oscillation)")


def fourier_coeff(profile: MassProfile, alpha: float, m: Mode) -> complex:
    """Fourier coefficient of the scaled profile chi_alpha at integer m."""
    _check_alpha(profile, alpha)
    m1, m2 = int(m[0]), int(m[1])
    h = profile.height
    if profile.shape == "disk":
        r = profile.radius
        s = alpha * math.hypot(m1, m2)
        if s < 1e-12:
            return complex(h * alpha ** 2 * math.pi * r ** 2)
        return complex(h * alpha ** 2 * r * bessel_j1(2.0 * math.pi * r * s) / s)
    if profile.shape == "square":
        a = profile.side
        return complex(h * alpha ** 2 * a ** 2
                       * np.sinc(a * alpha * m1) * np.sinc(a * alpha * m2))
    if profile.shape == "modes":
        return h * complex(profile.modes.get((m1, m2), 0.0))
    # grid: direct separable sum, frequency alpha*m may be non-integer
    _grid_min_samples(profile, alpha * max(abs(m1), abs(m2)))
    n = profile.grid_values.shape[0]
    e1 = _grid_phase_matrix(np.array([alpha * m1], float), n)[0]
    e2 = _grid_phase_matrix(np.array([alpha * m2], float), n)[0]
    return complex(alpha ** 2 * h * (e1 @ profile.grid_values @ e2) / n ** 2)


@dataclass(frozen=True)
class FourierTable:
    """Coefficients of chi_alpha on the difference window |d|_inf <= 2*cutoff."""
    cutoff: int
    alpha: float
    data: np.ndarray = field(repr=False)  # (4M+1, 4M+1) complex, index d + off

    @property
    def off(self) -> int:
        return 2 * self.cutoff

    def entry(self, d1: int, d2: int) -> complex:
        return complex(self.data[d1 + self.off, d2 + self.off])

    def rows(self):
        """(m1, m2, re, im) rows for CSV export."""
        off = self.off
        for i in range(self.data.shape[0]):
            for j in range(self.data.shape[1]):
                v = self.data[i, j]
                yield (i - off, j - off, v.real, v.imag)


def fourier_table(profile: MassProfile, alpha: float, cutoff: int) -> FourierTable:
    """Tabulate chi_alpha-hat over all differences needed at truncation `cutoff`."""
    _check_alpha(profile, alpha)
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    w = 2 * cutoff
    d = np.arange(-w, w + 1)
    if profile.shape == "disk":
        r = profile.radius
        s = alpha * np.hypot(d[:, None], d[None, :])
        small = s < 1e-12
        ss = np.where(small, 1.0, s)
        vals = profile.height * alpha ** 2 * r * bessel_j1_array(2.0 * math.pi * r * ss) / ss
        vals = np.where(small, profile.height * alpha ** 2 * math.pi * r ** 2, vals)
        data = vals.astype(complex)
    elif profile.shape == "square":
        a = profile.side
        s1 = np.sinc(a * alpha * d)
        data = (profile.height * alpha ** 2 * a ** 2 * np.outer(s1, s1)).astype(complex)
    elif profile.shape == "modes":
        data = np.zeros((2 * w + 1, 2 * w + 1), dtype=complex)
        for (m1, m2), c in profile.modes.items():
            if max(abs(m1), abs(m2)) <= w:
                data[m1 + w, m2 + w] = profile.height * c
    else:  # grid
        _grid_min_samples(profile, alpha * w)
        n = profile.grid_values.shape[0]
        e = _grid_phase_matrix(alpha * d, n)
        data = alpha ** 2 * profile.height * (e @ profile.grid_values @ e.T) / n ** 2
        data = data.astype(complex)
    return FourierTable(cutoff=cutoff, alpha=alpha, data=data)


# ---------------------------------------------------------------------
# hyp-1 triple sum
# ---------------------------------------------------------------------

@dataclass
class Hyp1Details:
    value: float
    cutoff: int
    n_modes: int
    imag_ratio: float
    tail_estimate: float  # advisory truncation heuristic; 0 for mode lists


def hyp1_details(profile: MassProfile, cutoff: int) -> Hyp1Details:
    """S(chi) = sum_{m,m' != 0} (m.m')/(|m|^2 |m'|^2) conj(c_m) c_m' c_{m-m'},

    truncated at |m|_inf <= cutoff.  Exact for mode-list profiles whose
    support fits inside the cutoff (error otherwise: silent truncation
    would change S); for compactly supported profiles a decay-based tail
    heuristic is reported alongside.
    """
    if profile.shape == "modes":
        span = profile.mode_span
        if span > cutoff:
            raise ValueError(
                f"cutoff {cutoff} is smaller than the profile mode span {span}; "
                f"the truncation would silently change the sum")
    if abs(profile.phi) > 1e-12:
        warnings.warn("hyp-1 sum is meaningful for mean-zero profiles; "
                      f"this one has mean {profile.phi:.3g}", stacklevel=2)

    table = fourier_table(profile, 1.0, cutoff)
    w = table.off
    span = np.arange(-cutoff, cutoff + 1)
    g1, g2 = np.meshgrid(span, span, indexing="ij")
    coeff = table.data[g1 + w, g2 + w]
    keep = (np.abs(coeff) > 0) & ~((g1 == 0) & (g2 == 0))
    m = np.stack([g1[keep], g2[keep]], axis=1).astype(np.int64)
    c = coeff[keep].astype(complex)

    acc, mag = _kernels.hyp1_pair_sum(m, c, table.data, w)
    imag_ratio = abs(acc.imag) / max(abs(acc), 1e-300)
    if mag > 0 and abs(acc.imag) > 1e-10 * max(abs(acc), 1e-30 * mag):
        raise ArithmeticError(
            f"hyp-1 accumulation has imaginary residual {acc.imag:.3e} "
            f"(|S| = {abs(acc):.3e}); profile Fourier data is not real-symmetric")

    tail = 0.0
    if profile.shape != "modes":
        # advisory: sum_{|m| > cutoff} |chi-hat(m)|^2 max|chi-hat| / |m|^2
        # over the next window (cutoff, 2*cutoff]
        big1, big2 = np.meshgrid(np.arange(-w, w + 1), np.arange(-w, w + 1), indexing="ij")
        ring = np.maximum(np.abs(big1), np.abs(big2)) > cutoff
        norm2 = (big1 ** 2 + big2 ** 2).astype(float)
        cmax = float(np.max(np.abs(table.data)))
        tail = float(np.sum(np.abs(table.data[ring]) ** 2 / norm2[ring]) * cmax)
    return Hyp1Details(value=float(acc.real), cutoff=cutoff, n_modes=int(m.shape[0]),
                       imag_ratio=float(imag_ratio), tail_estimate=tail)


def hyp1_sum(profile: MassProfile, cutoff: int) -> float:
    """The truncated hyp-1 sum S(chi); see hyp1_details for the metadata."""
    return hyp1_details(profile, cutoff).value
