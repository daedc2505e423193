"""Electron-MHD model equations in potential form.

The magnetic field is ``B = (a_y, -a_x, b)``. The resistive system for the
potentials reads

    a_t = mu1 Lap a - (a_y b_x - a_x b_y)
    b_t = mu2 Lap b + (a_y Lap a_x - a_x Lap a_y)

and around the current sheet ``(a, b) = (y, 0)`` the perturbation
``psi = a - y`` obeys

    psi_t = mu1 Lap psi - b_x + b_y psi_x - b_x psi_y
    b_t   = mu2 Lap b + Lap psi_x + psi_y Lap psi_x - psi_x Lap psi_y.

Every physical-space product is followed by 2/3 truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal

import numpy as np

from .grid import Grid, SpectralField, fft2, ifft2, irfft2_real, rfft2_full, transform_forward


@dataclass(frozen=True)
class ModelParams:
    mu1: float = 0.0
    mu2: float = 1.0

    def __post_init__(self):
        for name in ("mu1", "mu2"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


def _same_grid(*fields: SpectralField) -> Grid:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise ValueError(f"grid mismatch: {g} vs {f.grid}")
    return g


@dataclass(frozen=True)
class PerturbationState:
    psi: SpectralField
    b: SpectralField
    params: ModelParams = field(default_factory=ModelParams)
    time: float = 0.0

    def __post_init__(self):
        _same_grid(self.psi, self.b)

    @property
    def grid(self) -> Grid:
        return self.psi.grid

    @classmethod
    def from_arrays(cls, grid, psi_hat, b_hat, params=None, time=0.0):
        return cls(
            SpectralField(grid, psi_hat),
            SpectralField(grid, b_hat),
            params or ModelParams(),
            float(time),
        )

    def with_fields(self, psi_hat, b_hat, time=None) -> "PerturbationState":
        return replace(
            self,
            psi=SpectralField(self.grid, psi_hat),
            b=SpectralField(self.grid, b_hat),
            time=self.time if time is None else float(time),
        )

    def scaled(self, alpha: float) -> "PerturbationState":
        return replace(self, psi=self.psi * alpha, b=self.b * alpha)


@dataclass(frozen=True)
class FullState:
    """Periodic potentials ``(a, b)``; the affine part ``y`` is not representable here."""

    a: SpectralField
    b: SpectralField
    params: ModelParams = field(default_factory=ModelParams)
    time: float = 0.0

    def __post_init__(self):
        _same_grid(self.a, self.b)

    @property
    def grid(self) -> Grid:
        return self.a.grid


class _Derivs:
    """Physical-space derivative fields of one potential, computed once."""

    def __init__(self, c: np.ndarray, grid: Grid, need_lap_grad: bool):
        ikx, iky = grid.ikx, grid.iky
        # every multiplier below vanishes on the Nyquist lines, so the
        # half-spectrum inverse is exact
        self.x = irfft2_real(ikx * c)
        self.y = irfft2_real(iky * c)
        if need_lap_grad:
            lap = -grid.K2 * c
            self.lap_x = irfft2_real(ikx * lap)
            self.lap_y = irfft2_real(iky * lap)


def _truncated(u: np.ndarray, grid: Grid) -> np.ndarray:
    return np.where(grid.dealias_mask, rfft2_full(u), 0)


def brackets(a_hat: np.ndarray, b_hat: np.ndarray, grid: Grid, dealias: bool = True):
    """Both Hall brackets ``(a_y b_x - a_x b_y, a_y Lap a_x - a_x Lap a_y)`` in coefficients."""
    mask = grid.dealias_mask
    if dealias:
        a_hat = np.where(mask, a_hat, 0)
        b_hat = np.where(mask, b_hat, 0)
    da = _Derivs(a_hat, grid, need_lap_grad=True)
    db = _Derivs(b_hat, grid, need_lap_grad=False)
    j1 = da.y * db.x - da.x * db.y
    j2 = da.y * da.lap_x - da.x * da.lap_y
    if dealias:
        return _truncated(j1, grid), _truncated(j2, grid)
    return rfft2_full(j1), rfft2_full(j2)


def nonlinear_perturbed(psi_hat: np.ndarray, b_hat: np.ndarray, grid: Grid, dealias: bool = True):
    """Quadratic part of the perturbed tendencies: ``(b_y psi_x - b_x psi_y, psi_y Lap psi_x - psi_x Lap psi_y)``."""
    j1, j2 = brackets(psi_hat, b_hat, grid, dealias)
    return -j1, j2


def linear_perturbed(psi_hat: np.ndarray, b_hat: np.ndarray, grid: Grid, params: ModelParams):
    """Linear part ``(mu1 Lap psi - b_x, mu2 Lap b + Lap psi_x)`` in coefficients."""
    ikx = grid.ikx
    k2 = np.where(grid.nyquist_mask, 0, grid.K2)
    dpsi = -params.mu1 * k2 * psi_hat - ikx * b_hat
    db = -params.mu2 * k2 * b_hat - k2 * ikx * psi_hat
    return dpsi, db


def rhs_full(state: FullState) -> tuple[SpectralField, SpectralField]:
    g = state.grid
    p = state.params
    k2 = np.where(g.nyquist_mask, 0, g.K2)
    j1, j2 = brackets(state.a.coeffs, state.b.coeffs, g)
    da = -p.mu1 * k2 * state.a.coeffs - j1
    db = -p.mu2 * k2 * state.b.coeffs + j2
    return SpectralField(g, da), SpectralField(g, db)


def rhs_perturbed(state: PerturbationState) -> tuple[SpectralField, SpectralField]:
    g = state.grid
    lp, lb = linear_perturbed(state.psi.coeffs, state.b.coeffs, g, state.params)
    n_psi, n_b = nonlinear_perturbed(state.psi.coeffs, state.b.coeffs, g)
    return SpectralField(g, lp + n_psi), SpectralField(g, lb + n_b)


def linearized_rhs(state: PerturbationState) -> tuple[SpectralField, SpectralField]:
    g = state.grid
    lp, lb = linear_perturbed(state.psi.coeffs, state.b.coeffs, g, state.params)
    return SpectralField(g, lp), SpectralField(g, lb)


def reconstruct_B(grad_a, b: SpectralField, background_grad=(0.0, 0.0)):
    """Physical ``(B1, B2, B3) = (a_y, -a_x, b)`` from ``grad_a = (a_x, a_y)``.

    ``background_grad`` is a constant gradient added analytically; the current
    sheet ``a = y`` contributes ``(0, 1)``.
    """
    ax, ay = grad_a
    _same_grid(ax, ay, b)
    B1 = ay.physical() + background_grad[1]
    B2 = -(ax.physical() + background_grad[0])
    B3 = b.physical()
    return B1, B2, B3


def reconstruct_B_from_potential(a: SpectralField, b: SpectralField, current_sheet: bool = False):
    from .grid import derivative

    bg = (0.0, 1.0) if current_sheet else (0.0, 0.0)
    return reconstruct_B((derivative(a, 1, 0), derivative(a, 0, 1)), b, bg)


def divergence(B1: np.ndarray, B2: np.ndarray, grid: Grid) -> np.ndarray:
    ikx = np.where(grid.nyquist_mask, 0, 1j * grid.KX)
    iky = np.where(grid.nyquist_mask, 0, 1j * grid.KY)
    return ifft2(ikx * fft2(B1) + iky * fft2(B2))


# -- steady states ---------------------------------------------------------

SteadyKind = Literal["shear-x", "shear-y", "radial", "current-sheet"]


def _trig_profile(modes, coord, length):
    out = np.zeros_like(coord)
    for m, amp, phase in modes:
        out = out + amp * np.cos(2 * np.pi * m * coord / length + phase)
    return out


def bump_window(r: np.ndarray, r_inner: float, r_outer: float) -> np.ndarray:
    """Smooth compactly supported radial window: 1 for r <= r_inner, 0 for r >= r_outer."""
    s = np.clip((r - r_inner) / (r_outer - r_inner), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1 - s, 1.0)), 0.0)
        g = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
    return f / (f + g)


@dataclass(frozen=True)
class SteadyState:
    """Hall equilibrium descriptor.

    Shear kinds take ``a_modes``/``b_modes`` as ``(mode, amplitude, phase)``
    triples of a cosine series in x (shear-x) or y (shear-y). Radial kinds take
    Gaussian amplitudes/widths centred in the domain and multiplied by a bump
    window so the profile is periodic.
    """

    kind: SteadyKind
    a_modes: tuple = ((1, 1.0, 0.0),)
    b_modes: tuple = ((2, 0.5, 0.3),)
    a_amp: float = 1.0
    b_amp: float = 0.5
    width: float = 0.6
    window: tuple[float, float] = (1.8, 2.9)

    def __post_init__(self):
        if self.kind not in ("shear-x", "shear-y", "radial", "current-sheet"):
            raise ValueError(f"unknown steady-state kind {self.kind!r}")

    def profiles(self, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        """Physical ``(a*, b*)``; the current sheet returns only its periodic part (zero)."""
        X, Y = grid.coords
        if self.kind == "shear-x":
            return _trig_profile(self.a_modes, X, grid.Lx), _trig_profile(self.b_modes, X, grid.Lx)
        if self.kind == "shear-y":
            return _trig_profile(self.a_modes, Y, grid.Ly), _trig_profile(self.b_modes, Y, grid.Ly)
        if self.kind == "radial":
            r = np.hypot(X - grid.Lx / 2, Y - grid.Ly / 2)
            w = bump_window(r, *self.window)
            g = np.exp(-((r / self.width) ** 2)) * w
            return self.a_amp * g, self.b_amp * g
        return np.zeros(grid.shape), np.zeros(grid.shape)

    @property
    def background_grad(self) -> tuple[float, float]:
        return (0.0, 1.0) if self.kind == "current-sheet" else (0.0, 0.0)


def bracket_residual(a: SpectralField, b: SpectralField, background_grad=(0.0, 0.0)) -> float:
    """Max-norm of both Hall brackets for ``a + background`` and ``b`` (no dealiasing)."""
    g = _same_grid(a, b)
    da = _Derivs(a.coeffs, g, need_lap_grad=True)
    db = _Derivs(b.coeffs, g, need_lap_grad=False)
    ax = da.x + background_grad[0]
    ay = da.y + background_grad[1]
    j1 = ay * db.x - ax * db.y
    j2 = ay * da.lap_x - ax * da.lap_y
    return float(max(np.max(np.abs(j1)), np.max(np.abs(j2))))


def steady_residual(ss: SteadyState, grid: Grid) -> float:
    a, b = ss.profiles(grid)
    return bracket_residual(transform_forward(a, grid), transform_forward(b, grid), ss.background_grad)


def field_from_function(grid: Grid, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> SpectralField:
    X, Y = grid.coords
    return transform_forward(fn(X, Y), grid)
