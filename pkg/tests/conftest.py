import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from polyfloer import spectral as sp

settings.register_profile(
    "polyfloer",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("polyfloer")

SQRT2 = math.sqrt(2.0)


@pytest.fixture
def grid16():
    return sp.TorusGrid.from_ratio(SQRT2, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_smooth_field(grid, components, rng, band=4):
    """Real field with only low modes, so spectral derivatives are exact."""
    c = rng.standard_normal((components,) + grid.shape)
    s = sp.dft_forward(sp.FieldState(grid, c))
    mm, kk = grid.lattice()
    coeffs = s.coeffs.copy()
    coeffs[:, (np.abs(mm) > band) | (np.abs(kk) > band)] = 0.0
    return sp.dft_inverse(s.replace(coeffs)).values
