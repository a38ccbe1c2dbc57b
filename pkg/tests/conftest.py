import math

import numpy as np
import pytest

from geosnap import Scheme, SnapTarget, SystemParams
from geosnap.metrics import LAMBDA_DEFAULT


@pytest.fixture(scope="session")
def target():
    return SnapTarget((0.0, -math.pi / 4.0, math.pi / 2.0))


@pytest.fixture(scope="session")
def params():
    """Reference operating constants used across the suite."""
    return SystemParams.from_linear_frequencies(
        chi_mhz=2.5,
        gamma_decay_khz=1.45,
        gamma_phi_khz=1.45,
        kerr_khz=3.0,
        chi_prime_khz=5.0,
        n_max=3,
    )


@pytest.fixture(scope="session")
def omega_ref(params):
    """Drive cap 2*pi*0.66 MHz, the standard operating amplitude."""
    return 2.0 * math.pi * 0.66e6


@pytest.fixture(scope="session")
def lam_default():
    return LAMBDA_DEFAULT
