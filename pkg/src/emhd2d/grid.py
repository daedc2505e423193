"""Periodic grid, spectral transforms, derivatives, fractional multipliers, dealiasing.

Coefficients are stored full-complex with shape ``(nx, ny)`` in standard FFT
ordering; axis 0 is x, axis 1 is y. The forward transform divides by
``nx * ny`` so the zero mode is the mean of the physical field.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.fft as sfft

MAX_DERIVATIVE_ORDER = 8


@dataclass(frozen=True, eq=False)
class Grid:
    """Periodic rectangle ``[0, Lx) x [0, Ly)`` with ``nx x ny`` points."""

    nx: int
    ny: int
    Lx: float = 2 * np.pi
    Ly: float = 2 * np.pi

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if int(n) != n or n % 2 or n < 8:
                raise ValueError(f"{name} must be an even integer >= 8, got {n}")
        for name in ("Lx", "Ly"):
            L = getattr(self, name)
            if not np.isfinite(L) or L <= 0:
                raise ValueError(f"{name} must be positive and finite, got {L}")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "Lx", float(self.Lx))
        object.__setattr__(self, "Ly", float(self.Ly))

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return self.spec == other.spec

    def __hash__(self):
        return hash(self.spec)

    def __repr__(self):
        return f"Grid(nx={self.nx}, ny={self.ny}, Lx={self.Lx!r}, Ly={self.Ly!r})"

    @property
    def spec(self) -> tuple[int, int, float, float]:
        return (self.nx, self.ny, self.Lx, self.Ly)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @cached_property
    def mx(self) -> np.ndarray:
        """Integer mode indices along x in FFT ordering."""
        return _frozen(np.fft.fftfreq(self.nx, 1.0 / self.nx).astype(np.int64))

    @cached_property
    def my(self) -> np.ndarray:
        return _frozen(np.fft.fftfreq(self.ny, 1.0 / self.ny).astype(np.int64))

    @cached_property
    def kx(self) -> np.ndarray:
        return _frozen(2 * np.pi / self.Lx * self.mx)

    @cached_property
    def ky(self) -> np.ndarray:
        return _frozen(2 * np.pi / self.Ly * self.my)

    @cached_property
    def KX(self) -> np.ndarray:
        return _frozen(np.broadcast_to(self.kx[:, None], self.shape).copy())

    @cached_property
    def KY(self) -> np.ndarray:
        return _frozen(np.broadcast_to(self.ky[None, :], self.shape).copy())

    @cached_property
    def K2(self) -> np.ndarray:
        """|xi|^2 on the mode lattice."""
        return _frozen(self.KX**2 + self.KY**2)

    @cached_property
    def ikx(self) -> np.ndarray:
        """``i xi1`` with Nyquist lines zeroed (first-derivative multiplier)."""
        return _frozen(np.where(self.nyquist_mask, 0, 1j * self.KX))

    @cached_property
    def iky(self) -> np.ndarray:
        return _frozen(np.where(self.nyquist_mask, 0, 1j * self.KY))

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on the Nyquist row/column (index -n/2 in either direction)."""
        m = (self.mx[:, None] == -self.nx // 2) | (self.my[None, :] == -self.ny // 2)
        return _frozen(m)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True on modes kept by the 2/3 rule."""
        keep = (np.abs(self.mx)[:, None] <= self.nx // 3) & (
            np.abs(self.my)[None, :] <= self.ny // 3
        )
        return _frozen(keep)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical coordinates ``(X, Y)``, each of shape ``(nx, ny)``."""
        x = np.arange(self.nx) * (self.Lx / self.nx)
        y = np.arange(self.ny) * (self.Ly / self.ny)
        X, Y = np.meshgrid(x, y, indexing="ij")
        return _frozen(X), _frozen(Y)

    def padded(self, factor: int = 2) -> "Grid":
        """Same domain with ``factor`` times the points per direction."""
        return Grid(self.nx * factor, self.ny * factor, self.Lx, self.Ly)


def make_grid(nx: int, ny: int, Lx: float = 2 * np.pi, Ly: float = 2 * np.pi) -> Grid:
    return Grid(nx, ny, Lx, Ly)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a real scalar field on ``grid``."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    def physical(self) -> np.ndarray:
        return transform_inverse(self)

    def _check(self, other: "SpectralField"):
        if self.grid != other.grid:
            raise ValueError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.coeffs + other.coeffs)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.coeffs - other.coeffs)
        return NotImplemented

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, alpha):
        if np.isscalar(alpha) and np.isreal(alpha):
            return SpectralField(self.grid, self.coeffs * float(alpha))
        return NotImplemented

    __rmul__ = __mul__

    def norm2(self) -> float:
        """Squared L^2 norm over the torus (Parseval)."""
        return l2_norm_squared(self.coeffs, self.grid)

    def inner(self, other: "SpectralField") -> float:
        self._check(other)
        return inner_product(self.coeffs, other.coeffs, self.grid)

    def hermitian_defect(self) -> float:
        """Max of |c(-k) - conj(c(k))| relative to max |c|, Nyquist lines excluded."""
        c = np.where(self.grid.nyquist_mask, 0, self.coeffs)
        mirrored = np.conj(np.roll(np.flip(c, axis=(0, 1)), 1, axis=(0, 1)))
        scale = np.max(np.abs(c)) or 1.0
        return float(np.max(np.abs(c - mirrored)) / scale)


def l2_norm_squared(coeffs: np.ndarray, grid: Grid) -> float:
    return float(grid.area * np.sum(np.abs(coeffs) ** 2))


def inner_product(f: np.ndarray, g: np.ndarray, grid: Grid) -> float:
    """``\\int f g`` for real fields given by their coefficients."""
    return float(grid.area * np.sum((np.conj(f) * g).real))


def fft2(u: np.ndarray) -> np.ndarray:
    return sfft.fft2(u) / (u.shape[0] * u.shape[1])


def ifft2(c: np.ndarray) -> np.ndarray:
    return sfft.ifft2(c).real * (c.shape[0] * c.shape[1])


def irfft2_real(c: np.ndarray) -> np.ndarray:
    """``ifft2`` for Hermitian coefficients using the half spectrum (Nyquist column zeroed)."""
    ny = c.shape[1]
    half = c[:, : ny // 2 + 1].copy()
    half[:, -1] = 0
    return sfft.irfft2(half, s=c.shape) * (c.shape[0] * c.shape[1])


def rfft2_full(u: np.ndarray) -> np.ndarray:
    """``fft2`` of a real array, computed on the half spectrum and mirrored."""
    nx, ny = u.shape
    half = sfft.rfft2(u) / (nx * ny)
    out = np.empty((nx, ny), dtype=np.complex128)
    out[:, : ny // 2 + 1] = half
    rows = (-np.arange(nx)) % nx
    out[:, ny // 2 + 1 :] = np.conj(half[rows, 1 : ny - ny // 2][:, ::-1])
    return out


def transform_forward(physical: np.ndarray, grid: Grid) -> SpectralField:
    u = np.asarray(physical, dtype=float)
    if u.shape != grid.shape:
        raise ValueError(f"array shape {u.shape} does not match grid {grid.shape}")
    return SpectralField(grid, fft2(u))


def transform_inverse(field: SpectralField) -> np.ndarray:
    return ifft2(field.coeffs)


def derivative_multiplier(grid: Grid, order_x: int, order_y: int) -> np.ndarray:
    for o in (order_x, order_y):
        if int(o) != o or o < 0 or o > MAX_DERIVATIVE_ORDER:
            raise ValueError(f"derivative order must be an integer in [0, {MAX_DERIVATIVE_ORDER}], got {o}")
    mult = (1j * grid.kx[:, None]) ** order_x * (1j * grid.ky[None, :]) ** order_y
    return np.where(grid.nyquist_mask, 0, mult)


def derivative(f: SpectralField, order_x: int, order_y: int) -> SpectralField:
    """Spectral partial derivative; Nyquist modes are zeroed."""
    return SpectralField(f.grid, f.coeffs * derivative_multiplier(f.grid, order_x, order_y))


def laplacian(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, np.where(f.grid.nyquist_mask, 0, -f.grid.K2 * f.coeffs))


class MultiplierResult(NamedTuple):
    field: SpectralField
    discarded_mass: float


def fractional_weight(grid: Grid, sx: float, s: float) -> np.ndarray:
    """``|xi1|^sx |xi|^s`` with singular lines set to zero (see ``fractional_multiplier``)."""
    ax = np.abs(grid.KX)
    ak = np.sqrt(grid.K2)
    with np.errstate(divide="ignore", invalid="ignore"):
        wx = ax**sx if sx != 0 else np.ones_like(ax)
        wk = ak**s if s != 0 else np.ones_like(ak)
        w = wx * wk
    if sx < 0:
        w[ax == 0] = 0.0
    if s < 0:
        w[ak == 0] = 0.0
    w[grid.nyquist_mask] = 0.0
    return w


def fractional_multiplier(f: SpectralField, sx: float, s: float) -> MultiplierResult:
    """Apply ``|D_x|^sx |D|^s``.

    With a negative exponent the multiplier is singular on ``xi1 = 0`` (or at
    ``xi = 0``); those modes are projected out and their L^2 mass is reported.
    """
    grid = f.grid
    singular = np.zeros(grid.shape, dtype=bool)
    if sx < 0:
        singular |= grid.KX == 0
    if s < 0:
        singular |= grid.K2 == 0
    discarded = l2_norm_squared(np.where(singular, f.coeffs, 0), grid)
    out = f.coeffs * fractional_weight(grid, sx, s)
    return MultiplierResult(SpectralField(grid, out), discarded)


def dealias(f: SpectralField) -> SpectralField:
    """2/3 rule: zero every mode with |index| > n // 3 in either direction."""
    return SpectralField(f.grid, np.where(f.grid.dealias_mask, f.coeffs, 0))


def product(f: SpectralField, g: SpectralField, truncate: bool = True) -> SpectralField:
    """Pointwise product on the grid, optionally 2/3-truncated afterwards."""
    f._check(g)
    c = fft2(ifft2(f.coeffs) * ifft2(g.coeffs))
    if truncate:
        c = np.where(f.grid.dealias_mask, c, 0)
    return SpectralField(f.grid, c)


def resample(f: SpectralField, grid: Grid) -> SpectralField:
    """Zero-pad or truncate coefficients onto another grid over the same domain.

    Nyquist lines of the source are dropped so the result stays Hermitian.
    """
    if (grid.Lx, grid.Ly) != (f.grid.Lx, f.grid.Ly):
        raise ValueError("resample requires the same domain")
    src = f.grid
    out = np.zeros(grid.shape, dtype=np.complex128)
    hx = min(src.nx, grid.nx) // 2
    hy = min(src.ny, grid.ny) // 2
    ix = np.r_[0:hx, -hx + 1 : 0]
    iy = np.r_[0:hy, -hy + 1 : 0]
    out[np.ix_(ix, iy)] = f.coeffs[np.ix_(ix, iy)]
    return SpectralField(grid, out)
