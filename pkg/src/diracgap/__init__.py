"""diracgap: spectral gaps of the 2D massless Dirac operator with a
periodic mass insertion.

Plane-wave fiber operators over the Brillouin zone, certified gap scans,
Schur-complement (Feshbach) diagnostics of the effective two-level
problem, the modified-Bessel resolvent kernel, and scaling-law sweeps for
the two gap regimes (mean-carrying masses: gap ~ alpha^2 beta Phi;
mean-free masses: gap ~ beta^3).
"""

__version__ = "0.1.0"

from .bessel import (KernelBoundReport, KernelSample, bessel_j1, bessel_k0,
                     bessel_k1, kernel_bound_check, resolvent_kernel)
from .experiments import (PhysicalGap, ScalingFit, SweepReport, fit_loglog,
                          sweep_alpha, sweep_beta, to_physical)
from .feshbach import (FeshbachReport, b_p0_norm, feshbach_inverse_norm,
                       m_matrix, q0_smallest_singular, schur_complement,
                       w_of_beta, w_prime_zero, wru_norm)
from .fiber import (FiberOperator, Spectrum, assemble, eigenvalues_dense,
                    eigenvalues_near_zero)
from .gapscan import GapReport, ScanSpec, global_gap, min_abs_eig
from .profiles import (FourierTable, MassProfile, annulus_profile,
                       disk_profile, fourier_coeff, fourier_table,
                       grid_profile, hyp1_details, hyp1_sum, normalize,
                       square_profile)

__all__ = [name for name in dir() if not name.startswith("_")]
