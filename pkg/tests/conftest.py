import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from wrenchfield import GridSpec, VectorField2D


def make_smooth_field(grid: GridSpec, rng: np.random.Generator, smooth: float = 3.5) -> VectorField2D:
    """Random field low-passed enough to be representable on the grid.

    smooth=3.5 keeps the remainder's interior divergence/curl within the
    documented 10%-of-input bound; rougher fields leave visible residue.
    """
    u = gaussian_filter(rng.standard_normal(grid.shape), smooth)
    v = gaussian_filter(rng.standard_normal(grid.shape), smooth)
    return VectorField2D(grid, u, v)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def grid24():
    return GridSpec(24, 24, 1.0)


@pytest.fixture
def grid32():
    return GridSpec(32, 32, 1.0)
