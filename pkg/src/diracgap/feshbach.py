"""Schur-complement (effective two-level) diagnostics of the fiber operator.

The truncated fiber matrix is partitioned at the zero Fourier mode: P0 is
the 2-dim m = 0 spinor block, Q0 everything else.  The Schur complement

    F(z) = A(z) - B (D(z))^-1 C,   A = P0 (h - z) P0, D = Q0 (h - z) Q0,

is the effective 2x2 operator whose invertibility certifies z in the
resolvent set; det F(z) = 0 exactly at eigenvalues of the truncated h
whose eigenvectors overlap the m = 0 mode.  The module also evaluates the
factor-form objects (the square-root-profile couplings W, U and the free
Q0-resolvent R0) used by the operator-norm diagnostics, the small-k
effective matrix m_k(beta) = w-vector . sigma, and the scalar w(beta)
whose derivative at 0 ties the cubic gap to the triple Fourier sum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .fiber import Convolver, FiberOperator, assemble, index_set
from .profiles import MassProfile, fourier_table, hyp1_sum

SIG1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIG2 = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIG3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULI = (SIG1, SIG2, SIG3)

Q0_SINGULAR_REL = 1e-10


class QBlockSingularError(RuntimeError):
    """The Q0 block of h - z is numerically singular at this z."""


def _partition(op: FiberOperator) -> Tuple[np.ndarray, np.ndarray]:
    if op.dense is None:
        raise ValueError("feshbach diagnostics need the dense representation")
    psel = op.p0_slice()
    qsel = np.setdiff1d(np.arange(op.n), psel)
    return psel, qsel


def q0_smallest_singular(op: FiberOperator, z: float) -> float:
    """Smallest singular value of the Q0 block of h - z."""
    psel, qsel = _partition(op)
    d = op.dense[np.ix_(qsel, qsel)] - z * np.eye(len(qsel))
    return float(scipy.linalg.svdvals(d)[-1])


def schur_complement(op: FiberOperator, z: float, *,
                     check_singular: bool = True) -> Tuple[np.ndarray, float]:
    """(F(z), smallest singular value of the Q0 block)."""
    psel, qsel = _partition(op)
    hz = op.dense
    a = hz[np.ix_(psel, psel)] - z * np.eye(2)
    b = hz[np.ix_(psel, qsel)]
    c = hz[np.ix_(qsel, psel)]
    d = hz[np.ix_(qsel, qsel)] - z * np.eye(len(qsel))
    smin = float(scipy.linalg.svdvals(d)[-1])
    if check_singular and smin < Q0_SINGULAR_REL * op.norm_scale:
        raise QBlockSingularError(
            f"Q0 block of h - z is singular at z = {z} "
            f"(sigma_min = {smin:.3e}, scale {op.norm_scale:.3e})")
    f = a - b @ np.linalg.solve(d, c)
    return f, smin


def r0_q_matrix(op: FiberOperator, z: float) -> np.ndarray:
    """Free Q0-resolvent R0(z) = (Q0 (h0_k - z) Q0)^-1 as a dense block matrix.

    Built analytically per mode: (2 pi sigma.v - z)^-1
    = (2 pi sigma.v + z) / (4 pi^2 |v|^2 - z^2).
    """
    nq = op.n - 2
    r0 = np.zeros((nq, nq), dtype=complex)
    j = 0
    for i in range(op.nm):
        m1, m2 = op.index[i]
        if m1 == 0 and m2 == 0:
            continue
        v1 = 2.0 * math.pi * (m1 - op.k[0])
        v2 = 2.0 * math.pi * (m2 - op.k[1])
        den = v1 * v1 + v2 * v2 - z * z
        block = (v1 * SIG1 + v2 * SIG2 + z * np.eye(2)) / den
        r0[j:j + 2, j:j + 2] = block
        j += 2
    return r0


def _sqrt_factors(profile: MassProfile) -> Tuple[MassProfile, MassProfile]:
    """Profiles of rho = sqrt|chi| and tau = sgn(chi) sqrt|chi|.

    Indicator shapes have the closed form sqrt|chi| = sqrt|height| * same
    indicator; mode-list and grid shapes are sampled on a fine grid.
    """
    if profile.shape in ("disk", "square"):
        rho = replace(profile, height=math.sqrt(abs(profile.height)))
        tau = rho if profile.height >= 0 else replace(rho, height=-rho.height)
        return rho, tau
    v = profile._grid_for_norms()
    root = np.sqrt(np.abs(v))
    rho = MassProfile(shape="grid", grid_values=root, height=1.0)
    tau = MassProfile(shape="grid", grid_values=np.sign(v) * root, height=1.0)
    return rho, tau


def _conv_matrix(table_data: np.ndarray, off: int, index: np.ndarray) -> np.ndarray:
    """Spin-diagonal multiplication operator as a blocked matrix."""
    nm = index.shape[0]
    d1 = index[:, 0, None] - index[None, :, 0] + off
    d2 = index[:, 1, None] - index[None, :, 1] + off
    conv = table_data[d1, d2]
    full = np.zeros((2 * nm, 2 * nm), dtype=complex)
    full[0::2, 0::2] = conv
    full[1::2, 1::2] = conv
    return full


def w_u_r0(profile: MassProfile, alpha: float, beta: float, cutoff: int,
           k: Tuple[float, float] = (0.0, 0.0), z: float = 0.0
           ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The factor matrices W = sqrt(beta) sqrt|chi_a| sigma3 Q0,
    U = sqrt(beta) Q0 sgn(chi_a) sqrt|chi_a|, and R0(z) on the Q0 block."""
    rho, tau = _sqrt_factors(profile)
    op = assemble(profile, alpha, 0.0, k, cutoff, dense=False)
    rho_t = fourier_table(rho, alpha, cutoff)
    full_rho = _conv_matrix(rho_t.data, rho_t.off, op.index)
    if tau is rho:
        full_tau = full_rho
    else:
        tau_t = fourier_table(tau, alpha, cutoff)
        full_tau = _conv_matrix(tau_t.data, tau_t.off, op.index)
    i0 = op.index_of(0, 0)
    qsel = np.setdiff1d(np.arange(op.n), [2 * i0, 2 * i0 + 1])
    sb = math.sqrt(beta)
    sigma3_diag = np.where(np.arange(op.n) % 2 == 0, 1.0, -1.0)
    w = sb * (full_rho * sigma3_diag[None, :])[:, qsel]  # sqrt|chi| sigma3, cols Q0
    u = sb * full_tau[qsel, :]                           # rows Q0
    r0 = r0_q_matrix(op, z)
    return w, u, r0


def _free_r0_apply(index: np.ndarray, k: Tuple[float, float], z: float):
    """Closure applying R0(z) blockwise on (nm, 2, b) arrays (P0 rows zeroed)."""
    i0 = (index[:, 0] == 0) & (index[:, 1] == 0)
    v1 = 2.0 * math.pi * (index[:, 0] - k[0])
    v2 = 2.0 * math.pi * (index[:, 1] - k[1])
    den = v1 * v1 + v2 * v2 - z * z
    den = np.where(i0, 1.0, den)       # P0 rows are zeroed below
    lower = v1 + 1j * v2

    def apply(x):
        out = np.empty_like(x)
        out[:, 0, :] = (z * x[:, 0, :] + np.conj(lower)[:, None] * x[:, 1, :]) / den[:, None]
        out[:, 1, :] = (lower[:, None] * x[:, 0, :] + z * x[:, 1, :]) / den[:, None]
        out[i0] = 0.0
        return out

    return apply, i0


def wru_norm(profile: MassProfile, alpha: float, beta: float, z: float,
             cutoff: int, k: Tuple[float, float] = (0.0, 0.0), *,
             iters: int = 150, tol: float = 1e-10) -> float:
    """Spectral norm of W R0(z) U, matrix-free.

    All three factors have fast applies (convolutions and 2x2 block
    inverses), so the norm is computed by subspace iteration on N*N with
    a deterministic starting block; this keeps truncations M ~ 4/alpha
    affordable, which matters because the norm's alpha-scaling is only
    visible once the Fourier support of chi_alpha is resolved.
    """
    if abs(z) > math.pi / 2 + 1e-12:
        raise ValueError("the norm diagnostics are stated for |z| <= pi/2")
    if beta == 0.0:
        return 0.0
    rho, tau = _sqrt_factors(profile)
    idx = index_set(cutoff)
    nm = idx.shape[0]
    rho_c = Convolver(fourier_table(rho, alpha, cutoff), idx, cutoff)
    tau_c = rho_c if tau is rho else Convolver(fourier_table(tau, alpha, cutoff),
                                               idx, cutoff)
    r0_apply, i0 = _free_r0_apply(idx, k, z)
    sb = math.sqrt(beta)

    def conv2(c, x):
        b = x.shape[2]
        return c.apply(x.reshape(nm, 2 * b)).reshape(nm, 2, b)

    def n_apply(x):             # W R0(z) U
        y = sb * conv2(tau_c, x)
        y[i0] = 0.0
        y = r0_apply(y)
        y[:, 1, :] *= -1.0      # sigma3 inside W
        return sb * conv2(rho_c, y)

    def nh_apply(x):            # adjoint (the convolutions are Hermitian)
        y = x.copy()
        y = sb * conv2(rho_c, y)
        y[:, 1, :] *= -1.0
        y[i0] = 0.0
        y = r0_apply(y)
        y = sb * conv2(tau_c, y)
        return y

    rng = np.random.default_rng(2024)
    b = 3
    x = (rng.standard_normal((2 * nm, b)) + 1j * rng.standard_normal((2 * nm, b)))
    x, _ = np.linalg.qr(x)
    s2_prev = 0.0
    s2 = 0.0
    for _ in range(iters):
        y = nh_apply(n_apply(x.reshape(nm, 2, b))).reshape(2 * nm, b)
        g = x.conj().T @ y
        s2 = float(np.linalg.eigvalsh(0.5 * (g + g.conj().T))[-1])
        x, _ = np.linalg.qr(y)
        if abs(s2 - s2_prev) <= tol * max(s2, 1e-300):
            break
        s2_prev = s2
    return math.sqrt(max(s2, 0.0))


def b_p0_norm(profile: MassProfile, alpha: float, beta: float, cutoff: int,
              k: Tuple[float, float] = (0.0, 0.0), z: float = 0.0) -> float:
    """||F(z) - P0 (h - z) P0|| = ||B_P0(z)||, matrix-free.

    Only the two columns chi_alpha |psi_0 e_s> need a Q0-block solve, done
    by GMRES preconditioned with the exact free-block inverse R0(z); the
    sigma3 factors on both sides do not change the norm.
    """
    if beta == 0.0:
        return 0.0
    spla = scipy.sparse.linalg
    op = assemble(profile, alpha, beta, k, cutoff, dense=False)
    nm, n = op.nm, op.n
    i0 = (op.index[:, 0] == 0) & (op.index[:, 1] == 0)
    pmask = np.repeat(i0, 2)
    r0_apply, _ = _free_r0_apply(op.index, k, z)

    def d_apply(x):
        xq = x.copy()
        xq[pmask] = 0.0
        y = op.apply(xq) - z * xq
        y[pmask] = 0.0
        return y

    def prec(x):
        return r0_apply(x.reshape(nm, 2, 1)).reshape(-1)

    d_op = spla.LinearOperator((n, n), matvec=d_apply, dtype=complex)
    m_op = spla.LinearOperator((n, n), matvec=prec, dtype=complex)
    off = op.table.off
    cminus = op.table.data[off - op.index[:, 0], off - op.index[:, 1]]
    cplus = op.table.data[op.index[:, 0] + off, op.index[:, 1] + off]
    cols = []
    for s in (0, 1):
        rhs = np.zeros(n, dtype=complex)
        rhs[s::2] = cplus
        rhs[pmask] = 0.0
        y, info = spla.gmres(d_op, rhs, M=m_op, rtol=1e-13, atol=0.0, maxiter=500)
        if info != 0:
            raise QBlockSingularError(
                f"Q0-block solve did not converge at z = {z} (gmres info {info})")
        cols.append(y)
    b = np.empty((2, 2), dtype=complex)
    for s in (0, 1):
        for t in (0, 1):
            b[s, t] = np.sum(cminus * cols[t][s::2])
    return beta ** 2 * float(np.linalg.norm(b, 2))


# ---------------------------------------------------------------------
# Effective small-k matrix and the w(beta) scalar
# ---------------------------------------------------------------------

def _chi_rows_cols(op: FiberOperator) -> Tuple[np.ndarray, np.ndarray]:
    """P0-row and P0-column of the bare multiplication operator chi_alpha
    (no sigma3), restricted to the Q0 block: rows chi-hat(-m'), cols chi-hat(m)."""
    i0 = op.index_of(0, 0)
    off = op.table.off
    nm = op.nm
    rows = np.zeros((2, 2 * nm), dtype=complex)
    cols = np.zeros((2 * nm, 2), dtype=complex)
    cminus = op.table.data[off - op.index[:, 0], off - op.index[:, 1]]
    cplus = op.table.data[op.index[:, 0] + off, op.index[:, 1] + off]
    for s in (0, 1):
        rows[s, s::2] = cminus
        cols[s::2, s] = cplus
    qsel = np.setdiff1d(np.arange(2 * nm), [2 * i0, 2 * i0 + 1])
    return rows[:, qsel], cols[qsel, :]


def _g_matrix(profile: MassProfile, beta: float, cutoff: int) -> np.ndarray:
    """G = X_{0Q} (Q0 h_0(1,beta) Q0)^-1 X_{Q0}, the 2x2 core of the
    second-order effective matrix (resolvent at k = 0, alpha = 1).

    Assembled from the kinetic matrix plus beta times the mass coupling so
    that the central difference of w at +-h stays inside one code path.
    """
    op = assemble(profile, 1.0, 0.0, (0.0, 0.0), cutoff, dense=True)
    _, qsel = _partition(op)
    s3 = np.where(np.arange(op.n) % 2 == 0, 1.0, -1.0)
    xi = (_conv_matrix(op.table.data, op.table.off, op.index) * s3[None, :])
    d = (op.dense + beta * xi)[np.ix_(qsel, qsel)]
    rows, cols = _chi_rows_cols(op)
    return rows @ np.linalg.solve(d, cols)


def m_matrix(profile: MassProfile, beta: float, k: Tuple[float, float],
             cutoff: int) -> Tuple[np.ndarray, np.ndarray]:
    """(m_k(beta), w-vector) of the leading effective 2x2 matrix

        m_k(beta) = -2 pi sigma.k - beta^2 sigma3 G sigma3,

    with the w-vector = (Tr(sigma_i m)) real triple."""
    g = _g_matrix(profile, beta, cutoff)
    m = -2.0 * math.pi * (k[0] * SIG1 + k[1] * SIG2) - beta ** 2 * (SIG3 @ g @ SIG3)
    wvec = np.array([np.trace(s @ m).real for s in PAULI])
    return m, wvec


def w_of_beta(profile: MassProfile, beta: float, cutoff: int) -> float:
    """w(beta) = Tr(G sigma3); w(0) = 0 and w'(0) = S(chi) / (2 pi^2)."""
    g = _g_matrix(profile, beta, cutoff)
    return float(np.trace(g @ SIG3).real)


def w_prime_zero(profile: MassProfile, cutoff: int,
                 fd_step: Optional[float] = None) -> Tuple[float, float]:
    """w'(0) two independent ways at matched truncation.

    Returns (analytic, finite_difference): the analytic value is the
    triple Fourier sum S(chi)/(2 pi^2) truncated at the same index cutoff
    as the matrix path; the second is a central difference of w(beta).
    """
    if abs(profile.phi) > 1e-10:
        raise ValueError("w'(0) diagnostics apply to mean-zero profiles")
    analytic = hyp1_sum(profile, cutoff) / (2.0 * math.pi ** 2)
    h = fd_step if fd_step is not None else 1e-3 / profile.linf_norm
    fd = (w_of_beta(profile, h, cutoff) - w_of_beta(profile, -h, cutoff)) / (2.0 * h)
    return analytic, fd


def feshbach_inverse_norm(profile: MassProfile, beta: float,
                          k: Tuple[float, float], cutoff: int) -> float:
    """||F_k(0)^-1|| for a mean-zero profile at alpha = 1."""
    if abs(profile.phi) > 1e-10:
        raise ValueError("this bound is stated for mean-zero profiles")
    if not (0.0 < beta < math.pi / (2.0 * profile.linf_norm)):
        raise ValueError("need 0 < beta < pi / (2 ||chi||_inf)")
    op = assemble(profile, 1.0, beta, k, cutoff, dense=True)
    f, _ = schur_complement(op, 0.0)
    smin = float(scipy.linalg.svdvals(f)[-1])
    if smin < 1e-14 * op.norm_scale:
        return math.inf
    return 1.0 / smin


# ---------------------------------------------------------------------
# Report assembly (CLI surface)
# ---------------------------------------------------------------------

@dataclass
class FeshbachReport:
    k: Tuple[float, float]
    z: float
    f_matrix: np.ndarray
    q0_smallest_singular: float
    norm_wru: float
    norm_finv: float
    regime: str
    w_vector: Optional[np.ndarray] = None
    w_value: Optional[float] = None
    s_chi: Optional[float] = None
    w_prime_analytic: Optional[float] = None
    w_prime_fd: Optional[float] = None

    def to_dict(self) -> dict:
        out = {
            "k": list(self.k),
            "z": self.z,
            "F": [[{"re": v.real, "im": v.imag} for v in row] for row in self.f_matrix],
            "q0_smallest_singular": self.q0_smallest_singular,
            "norm_WRU": self.norm_wru,
            "norm_Finv": self.norm_finv,
            "regime": self.regime,
        }
        if self.w_vector is not None:
            out["W_vector"] = [float(v) for v in self.w_vector]
            out["w_value"] = self.w_value
            out["s_chi"] = self.s_chi
            out["w_prime_analytic"] = self.w_prime_analytic
            out["w_prime_fd"] = self.w_prime_fd
        return out


def build_report(profile: MassProfile, alpha: float, beta: float,
                 k: Tuple[float, float], z: float, cutoff: int,
                 fd_step: Optional[float] = None) -> FeshbachReport:
    op = assemble(profile, alpha, beta, k, cutoff, dense=True)
    f, smin = schur_complement(op, z)
    sf = scipy.linalg.svdvals(f)[-1]
    norm_finv = math.inf if sf < 1e-14 * op.norm_scale else 1.0 / float(sf)
    phi_zero = abs(profile.phi) <= 1e-10
    if not phi_zero:
        regime = "phi_positive"
    elif math.hypot(*k) <= 2.0 * beta ** 2 / math.pi ** 2:
        regime = "phi_zero_small_k"
    else:
        regime = "phi_zero_large_k"
    report = FeshbachReport(
        k=tuple(k), z=z, f_matrix=f, q0_smallest_singular=smin,
        norm_wru=wru_norm(profile, alpha, beta, z, cutoff, k),
        norm_finv=norm_finv, regime=regime)
    if phi_zero and alpha == 1.0:
        m, wvec = m_matrix(profile, beta, k, cutoff)
        report.w_vector = wvec
        report.w_value = w_of_beta(profile, beta, cutoff)
        report.s_chi = hyp1_sum(profile, cutoff)
        wa, wf = w_prime_zero(profile, cutoff, fd_step)
        report.w_prime_analytic = wa
        report.w_prime_fd = wf
    return report
