"""Backend equivalence: the numba kernels and the numpy fallbacks must
compute the same numbers (up to summation-order rounding)."""
import numpy as np

from diracgap import _kernels
from diracgap.fiber import index_set
from diracgap.profiles import annulus_profile, fourier_table


def _hyp1_inputs():
    ann = annulus_profile(4, 1)
    table = fourier_table(ann, 1.0, 6)
    w = table.off
    span = np.arange(-6, 7)
    g1, g2 = np.meshgrid(span, span, indexing="ij")
    coeff = table.data[g1 + w, g2 + w]
    keep = (np.abs(coeff) > 0) & ~((g1 == 0) & (g2 == 0))
    m = np.stack([g1[keep], g2[keep]], axis=1).astype(np.int64)
    return m, coeff[keep].astype(complex), table.data, w


def test_backend_is_selected():
    assert _kernels.BACKEND in ("numba", "numpy")


def test_hyp1_backends_agree():
    m, c, data, off = _hyp1_inputs()
    a_np, mag_np = _kernels.numpy_hyp1_pair_sum(m, c, data, off)
    a_kr, mag_kr = _kernels.hyp1_pair_sum(m, c, data, off)
    assert abs(a_np - a_kr) <= 1e-12 * max(abs(a_np), 1.0)
    assert abs(mag_np - mag_kr) <= 1e-10 * max(mag_np, 1.0)


def test_mass_fill_backends_agree():
    idx = index_set(5)
    ann = annulus_profile(4, 1)
    table = fourier_table(ann, 1.0, 5)
    n = 2 * idx.shape[0]
    h1 = np.zeros((n, n), dtype=complex)
    h2 = np.zeros((n, n), dtype=complex)
    _kernels.numpy_mass_fill(h1, idx, table.data, table.off, 0.37)
    _kernels.mass_fill(h2, idx, table.data, table.off, 0.37)
    assert np.max(np.abs(h1 - h2)) <= 1e-14 * max(np.max(np.abs(h1)), 1.0)
