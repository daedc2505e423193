"""Pseudo-spectral simulator and analysis tools for 2D electron MHD with anisotropic resistivity."""

__version__ = "0.1.0"

from .grid import Grid, SpectralField, make_grid  # noqa: E402
from .kernels import BACKEND  # noqa: E402
from .model import ModelParams, PerturbationState  # noqa: E402

__all__ = ["BACKEND", "Grid", "ModelParams", "PerturbationState", "SpectralField", "make_grid", "__version__"]
