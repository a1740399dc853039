"""Plane-wave truncation of the Bloch-Floquet fiber Hamiltonian

    h_k = 2 pi sigma.(m - k)  (diagonal 2x2 blocks)
        + beta * chi_alpha-hat(m - m') * sigma3  (mass coupling)

on the index set max(|m1|, |m2|) <= M, with a dense reference path and a
matrix-free path.  The matrix-free apply evaluates the mass convolution by
pointwise multiplication on a 2*(2M+1)-per-axis spatial grid (forward and
inverse FFT); the factor-2 zero padding makes the circular convolution
exact for differences up to 2M, so it matches the dense matrix to
rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from . import _kernels
from .profiles import FourierTable, MassProfile, fourier_table


class EigensolverError(RuntimeError):
    """Raised when an eigensolve fails to meet its residual contract."""


class Convolver:
    """Matrix-free multiplication operator for one coefficient table.

    Applies x -> sum_m' t(m - m') x(m') on the truncated index set via
    zero-padded FFTs (grid side 2*(2M+1), exact for differences up to 2M).
    """

    def __init__(self, table: "FourierTable", index: np.ndarray, cutoff: int):
        p = 2 * (2 * cutoff + 1)
        placed = np.zeros((p, p), dtype=complex)
        w = table.off
        d = np.arange(-w, w + 1)
        placed[np.ix_(d % p, d % p)] = table.data
        self.p = p
        self.t_hat = np.fft.fft2(placed)
        self.i1 = index[:, 0] % p
        self.i2 = index[:, 1] % p

    def apply(self, x: np.ndarray) -> np.ndarray:
        """x of shape (nm, b) -> convolved (nm, b)."""
        grid = np.zeros((self.p, self.p, x.shape[1]), dtype=complex)
        grid[self.i1, self.i2, :] = x
        out = np.fft.ifft2(np.fft.fft2(grid, axes=(0, 1))
                           * self.t_hat[:, :, None], axes=(0, 1))
        return out[self.i1, self.i2, :]


@dataclass
class FiberOperator:
    """Immutable truncated fiber operator at quasi-momentum k."""
    k: Tuple[float, float]
    alpha: float
    beta: float
    cutoff: int
    index: np.ndarray = field(repr=False)     # (nm, 2) int64, m1-major
    table: FourierTable = field(repr=False)
    dense: Optional[np.ndarray] = field(default=None, repr=False)
    _plan: dict = field(default_factory=dict, repr=False)

    @property
    def nm(self) -> int:
        return self.index.shape[0]

    @property
    def n(self) -> int:
        return 2 * self.index.shape[0]

    @property
    def norm_scale(self) -> float:
        """Cheap upper bound for ||H||: kinetic corner plus a Gershgorin
        row sum of the mass coupling."""
        kin = 2.0 * math.pi * math.sqrt(2.0) * (self.cutoff + 1.0)
        mass = abs(self.beta) * float(np.abs(self.table.data).sum())
        return kin + mass

    # -- matrix-free apply ----------------------------------------------
    def _ensure_plan(self):
        if self._plan:
            return
        self._plan["conv"] = Convolver(self.table, self.index, self.cutoff)
        dx = 2.0 * math.pi * (self.index[:, 0] - self.k[0])
        dy = 2.0 * math.pi * (self.index[:, 1] - self.k[1])
        self._plan["lower"] = dx + 1j * dy   # h[2i+1, 2i]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """H @ x for x of shape (n,) or (n, b), without forming H."""
        self._ensure_plan()
        single = x.ndim == 1
        xb = x[:, None] if single else x
        b = xb.shape[1]
        u = xb.reshape(self.nm, 2, b)
        out = np.empty_like(u)
        lower = self._plan["lower"][:, None]
        out[:, 0, :] = np.conj(lower) * u[:, 1, :]
        out[:, 1, :] = lower * u[:, 0, :]
        if self.beta != 0.0:
            conv = self._plan["conv"].apply(u.reshape(self.nm, 2 * b))
            conv = conv.reshape(self.nm, 2, b)
            out[:, 0, :] += self.beta * conv[:, 0, :]
            out[:, 1, :] -= self.beta * conv[:, 1, :]
        res = out.reshape(self.n, b)
        return res[:, 0] if single else res

    # -- index helpers --------------------------------------------------
    def index_of(self, m1: int, m2: int) -> int:
        M = self.cutoff
        if max(abs(m1), abs(m2)) > M:
            raise ValueError(f"mode {(m1, m2)} outside cutoff {M}")
        return (m1 + M) * (2 * M + 1) + (m2 + M)

    def p0_slice(self) -> np.ndarray:
        """Row/column indices of the m = 0 spinor block."""
        i0 = self.index_of(0, 0)
        return np.array([2 * i0, 2 * i0 + 1])


def index_set(cutoff: int) -> np.ndarray:
    r = np.arange(-cutoff, cutoff + 1)
    g1, g2 = np.meshgrid(r, r, indexing="ij")
    return np.stack([g1.ravel(), g2.ravel()], axis=1).astype(np.int64)


def assemble(profile: MassProfile, alpha: float, beta: float,
             k: Tuple[float, float], cutoff: int, *,
             dense: bool = True, memory_limit_mb: float = 4096.0,
             table: Optional[FourierTable] = None) -> FiberOperator:
    """Build the truncated fiber operator; optionally materialize the matrix."""
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if not (-0.5 <= k[0] <= 0.5 and -0.5 <= k[1] <= 0.5):
        raise ValueError(f"k = {k} outside the Brillouin zone")
    if table is None:
        table = fourier_table(profile, alpha, cutoff)
    elif table.cutoff < cutoff or table.alpha != alpha:
        raise ValueError("supplied Fourier table does not cover this operator")
    idx = index_set(cutoff)
    op = FiberOperator(k=(float(k[0]), float(k[1])), alpha=alpha, beta=beta,
                       cutoff=cutoff, index=idx, table=table)
    if dense:
        need_mb = 16.0 * op.n * op.n / 2 ** 20
        if need_mb > memory_limit_mb:
            raise MemoryError(
                f"dense fiber matrix needs {need_mb:.0f} MiB > limit "
                f"{memory_limit_mb:.0f} MiB; use the matrix-free path")
        op.dense = _build_dense(op)
    return op


def _build_dense(op: FiberOperator) -> np.ndarray:
    h = np.zeros((op.n, op.n), dtype=complex)
    if op.beta != 0.0:
        _kernels.mass_fill(h, op.index, op.table.data, op.table.off, op.beta)
    ii = np.arange(op.nm)
    dx = 2.0 * math.pi * (op.index[:, 0] - op.k[0])
    dy = 2.0 * math.pi * (op.index[:, 1] - op.k[1])
    h[2 * ii + 1, 2 * ii] += dx + 1j * dy
    h[2 * ii, 2 * ii + 1] += dx - 1j * dy
    return h


# ---------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------

@dataclass
class Spectrum:
    eigenvalues: np.ndarray   # ascending
    residual_bound: float     # max ||H v - lambda v|| over computed pairs
    method: str               # 'dense' | 'iterative_interior'


def eigenvalues_dense(op: FiberOperator, *, residuals: bool = True) -> Spectrum:
    """Full ascending spectrum of the dense representation."""
    if op.dense is None:
        raise ValueError("operator has no dense representation")
    if residuals:
        try:
            vals, vecs = np.linalg.eigh(op.dense)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise EigensolverError(f"dense eigensolver failed: {exc}") from exc
        r = op.dense @ vecs - vecs * vals[None, :]
        res = float(np.max(np.linalg.norm(r, axis=0)))
    else:
        vals = np.linalg.eigvalsh(op.dense)
        res = 0.0
    return Spectrum(eigenvalues=vals, residual_bound=res, method="dense")


def min_abs_dense(op: FiberOperator) -> Tuple[float, float]:
    """(min |lambda|, residual of that pair) without computing all vectors."""
    if op.dense is None:
        raise ValueError("operator has no dense representation")
    vals = np.linalg.eigvalsh(op.dense)
    i = int(np.argmin(np.abs(vals)))
    _, vec = scipy.linalg.eigh(op.dense, subset_by_index=[i, i])
    res = float(np.linalg.norm(op.dense @ vec[:, 0] - vals[i] * vec[:, 0]))
    return float(abs(vals[i])), res


def eigenvalues_near_zero(op: FiberOperator, count: int = 2, *,
                          residual_tol: float = 1e-8, maxiter: int = 300,
                          seed: int = 0) -> Spectrum:
    """The `count` eigenvalues of smallest |lambda| via spectral folding.

    A block iteration on H^2 (matrix-free applies, LOBPCG-style subspace
    {X, preconditioned residual, previous step}, Davidson diagonal
    preconditioner) converges to the near-zero invariant subspace; the
    signed eigenvalues are then recovered by Rayleigh-Ritz on H over
    span{X, HX}, which is closed under H even across degenerate +-
    clusters and keeps the eigenvalue error quadratic in the subspace
    error.  Deterministic for a fixed seed.
    """
    if count < 2:
        raise ValueError("count must be >= 2")
    n = op.n
    block = max(count + 2, 4)
    if n < 8 * block:
        # tiny truncations: folding has no room to iterate, use the matrix
        dense_op = op if op.dense is not None else assemble_like(op, dense=True)
        spec = eigenvalues_dense(dense_op)
        order = np.argsort(np.abs(spec.eigenvalues), kind="stable")[:count]
        vals = np.sort(spec.eigenvalues[order])
        return Spectrum(eigenvalues=vals, residual_bound=spec.residual_bound,
                        method="iterative_interior")

    kvec = 4.0 * math.pi ** 2 * ((op.index[:, 0] - op.k[0]) ** 2
                                 + (op.index[:, 1] - op.k[1]) ** 2)
    kvec = np.repeat(kvec, 2)
    # diag(H^2) = kinetic^2 + beta^2 * sum |chi_alpha-hat|^2 (same for every row)
    diag_h2 = kvec + op.beta ** 2 * float(np.sum(np.abs(op.table.data) ** 2))
    scale2 = op.norm_scale ** 2
    # stop when the folded residual is at its floating floor or small
    # enough that the final Rayleigh-Ritz meets the residual contract
    # (the H-residual tracks the folded one to a small factor)
    eps_floor = max(300.0 * np.finfo(float).eps * scale2,
                    0.05 * residual_tol * op.norm_scale)

    rng = np.random.default_rng(seed)
    block_max = count + 12  # covers the 8-fold kinetic clusters at zone corners
    cols = np.argsort(kvec, kind="stable")[:block]
    x = np.zeros((n, block), dtype=complex)
    x[cols, np.arange(block)] = 1.0
    x += 1e-3 / math.sqrt(n) * (rng.standard_normal((n, block))
                                + 1j * rng.standard_normal((n, block)))
    x, _ = np.linalg.qr(x)
    ax = op.apply(op.apply(x))
    p = None
    best_rn = math.inf
    since_improvement = 0
    iters = 0
    for iters in range(1, maxiter + 1):
        g = x.conj().T @ ax
        g = 0.5 * (g + g.conj().T)
        theta, u = np.linalg.eigh(g)
        x = x @ u
        ax = ax @ u
        r = ax - x * theta[None, :]
        rn = float(np.max(np.linalg.norm(r[:, :count], axis=0)))
        if rn <= eps_floor:
            break
        if rn < 0.995 * best_rn:
            best_rn = rn
            since_improvement = 0
        else:
            since_improvement += 1
            if since_improvement >= 12:
                if block >= block_max:
                    break  # stagnated at the attainable floor
                # stagnation usually means a degenerate cluster wider than
                # the block; grow it with fresh random directions
                extra = 4
                gnew = (rng.standard_normal((n, extra))
                        + 1j * rng.standard_normal((n, extra)))
                gnew -= x @ (x.conj().T @ gnew)
                gnew, _ = np.linalg.qr(gnew)
                x = np.hstack([x, gnew])
                ax = np.hstack([ax, op.apply(op.apply(gnew))])
                block += extra
                p = None
                best_rn = math.inf
                since_improvement = 0
                continue
        d = diag_h2 - theta[0]
        floor = max(1e-3 * float(theta[0]), 1e-14 * scale2)
        w = r / np.where(d < floor, floor, d)[:, None]
        s = np.hstack([x, w]) if p is None else np.hstack([x, w, p])
        q, _ = np.linalg.qr(s)
        aq = np.hstack([ax, op.apply(op.apply(q[:, block:]))])
        g = q.conj().T @ aq
        g = 0.5 * (g + g.conj().T)
        _, u = np.linalg.eigh(g)
        xn = q @ u[:, :block]
        axn = aq @ u[:, :block]
        p = xn - x @ (x.conj().T @ xn)
        x, ax = xn, axn

    # Rayleigh-Ritz on H over span{X, HX}.  Unconverged buffer directions
    # can produce spurious interior Ritz values, so pairs are accepted by
    # smallest |lambda| only if their residual meets the contract.
    hx = op.apply(x)
    q = scipy.linalg.orth(np.hstack([x, hx]), rcond=1e-12)
    hq = op.apply(q)
    g = q.conj().T @ hq
    g = 0.5 * (g + g.conj().T)
    svals, svecs = np.linalg.eigh(g)
    w = q @ svecs
    hw = op.apply(w)
    resid = np.linalg.norm(hw - w * svals[None, :], axis=0)
    scale = op.norm_scale
    accept = resid <= residual_tol * scale
    order = [i for i in np.argsort(np.abs(svals), kind="stable") if accept[i]]
    if len(order) < count:
        worst = float(np.min(resid[~accept])) if np.any(~accept) else math.nan
        raise EigensolverError(
            f"folded-spectrum solve did not converge: only {len(order)} of "
            f"{count} Ritz pairs meet residual {residual_tol:.1e} * scale "
            f"{scale:.3e} (best rejected residual {worst:.3e}) after {iters} "
            f"iterations (block {block}, maxiter {maxiter})")
    order = order[:count]
    vals = svals[order]
    res = float(np.max(resid[order]))
    return Spectrum(eigenvalues=np.sort(vals), residual_bound=res,
                    method="iterative_interior")


def assemble_like(op: FiberOperator, *, dense: bool) -> FiberOperator:
    """Clone an operator while toggling the dense representation."""
    clone = FiberOperator(k=op.k, alpha=op.alpha, beta=op.beta, cutoff=op.cutoff,
                          index=op.index, table=op.table)
    if dense:
        clone.dense = _build_dense(clone)
    return clone
