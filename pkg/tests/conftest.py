import math

import numpy as np
import pytest

from petallab.germs import corner_germ, germ_from_coeff_maps, normalize
from petallab.sectors import DomainSpec, KIND_U, KIND_V


@pytest.fixture(scope="session")
def ref_germ():
    """The reference corner germ (x - x^2 y/2, y - x y^2/2)."""
    return corner_germ(1, 1, -0.5, -0.5)


@pytest.fixture(scope="session")
def ref_petal(ref_germ):
    _, _, petal = normalize(ref_germ)
    return petal


@pytest.fixture(scope="session")
def ref_uspec(ref_petal):
    return DomainSpec(petal=ref_petal, epsilon=1e-2, theta=math.pi / 6, kind=KIND_U)


@pytest.fixture(scope="session")
def ref_vspec(ref_petal):
    return DomainSpec(petal=ref_petal, epsilon=1 / 32, theta=math.pi / 6,
                      r=0.7, kind=KIND_V)


@pytest.fixture(scope="session")
def curve_germ():
    """Noncorner germ (x - x^2, y - x y + x^2) with a genuine curve."""
    return germ_from_coeff_maps(
        {(1, 0): 1 + 0j, (2, 0): -1 + 0j},
        {(0, 1): 1 + 0j, (1, 1): -1 + 0j, (2, 0): 1 + 0j}, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
