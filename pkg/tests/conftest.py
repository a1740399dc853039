import numpy as np
import pytest

from diracgap.profiles import annulus_profile, disk_profile, normalize


@pytest.fixture(scope="session")
def disk02():
    """Normalized disk of radius 0.2, the workhorse positive-mean profile."""
    return normalize(disk_profile(0.2))


@pytest.fixture(scope="session")
def annulus41():
    """The small mean-free ring profile (modes with 3 <= |m| <= 5)."""
    return annulus_profile(4, 1)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
