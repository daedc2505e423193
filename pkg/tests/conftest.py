import numpy as np
import pytest

from emhd2d.grid import SpectralField, fft2, make_grid
from emhd2d.model import ModelParams, PerturbationState
from emhd2d.storage import random_band_state


def band_field(grid, rng, kmax=None):
    """Random real field; band-limited to |m| <= kmax when given, Nyquist lines removed."""
    c = fft2(rng.standard_normal(grid.shape))
    if kmax is not None:
        idx2 = grid.mx[:, None] ** 2 + grid.my[None, :] ** 2
        c = np.where(idx2 <= kmax * kmax, c, 0)
    return SpectralField(grid, np.where(grid.nyquist_mask, 0, c))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid32():
    return make_grid(32, 32)


@pytest.fixture
def grid64():
    return make_grid(64, 64)


@pytest.fixture
def small_state(grid32):
    return random_band_state(grid32, 1e-2, 4, seed=7, params=ModelParams(0.0, 1.0))


def zero_state(grid, params=None):
    z = np.zeros(grid.shape, dtype=complex)
    return PerturbationState.from_arrays(grid, z, z, params or ModelParams())
