"""Time stepping for the nonlinear perturbed system.

The quadratic brackets are always explicit. ``etd-rk4`` is the Cox-Matthews
exponential Runge-Kutta scheme with matrix phi-functions of the 2x2 per-mode
operator, so the linear part is exact. ``imex-cn-ab2`` is Crank-Nicolson on
the linear part (second order, not exact) with second-order Adams-Bashforth
for the brackets (first step: forward Euler on the brackets).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy.linalg import expm

from . import kernels
from .grid import Grid, ifft2
from .model import ModelParams, PerturbationState, nonlinear_perturbed

Scheme = Literal["imex-cn-ab2", "etd-rk4"]


class IntegrationError(FloatingPointError):
    """Non-finite values appeared; ``snapshot`` is the last finite state."""

    def __init__(self, message: str, snapshot: PerturbationState):
        super().__init__(message)
        self.snapshot = snapshot


class StepSizeWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: Scheme = "etd-rk4"
    dt: float = 1e-3
    t_end: float = 1.0
    output_stride: int = 1
    dealias: bool = True
    nonlinear: bool = True

    def __post_init__(self):
        if self.scheme not in ("imex-cn-ab2", "etd-rk4"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise ValueError(f"t_end must be non-negative, got {self.t_end}")
        if self.t_end > 0 and self.dt > self.t_end:
            raise ValueError("dt must not exceed t_end")
        if int(self.output_stride) != self.output_stride or self.output_stride < 1:
            raise ValueError("output_stride must be an integer >= 1")
        n = self.n_steps
        if n % self.output_stride:
            raise ValueError(f"{n} steps are not a multiple of output_stride={self.output_stride}")

    @property
    def n_steps(self) -> int:
        n = round(self.t_end / self.dt)
        if abs(n * self.dt - self.t_end) > 1e-9 * max(1.0, self.t_end):
            raise ValueError(f"t_end={self.t_end} is not an integer multiple of dt={self.dt}")
        return n


@dataclass(frozen=True)
class Trajectory:
    times: tuple[float, ...]
    states: tuple[PerturbationState, ...]
    config: IntegratorConfig
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("snapshot times must increase strictly")

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        return iter(zip(self.times, self.states))

    @property
    def final(self) -> PerturbationState:
        return self.states[-1]


# -- per-mode operators ----------------------------------------------------
# A per-mode 2x2 matrix is held as four contiguous arrays (m00, m01, m10, m11)
# and a state as the pair (psi_hat, b_hat).


def _mode_arrays(grid: Grid):
    xi1 = np.where(grid.nyquist_mask, 0.0, grid.KX)
    k2 = np.where(grid.nyquist_mask, 0.0, grid.K2)
    return xi1, k2


def _operator(grid: Grid, params: ModelParams) -> np.ndarray:
    """Per-mode 2x2 linear operator, shape ``(nx, ny, 2, 2)``."""
    xi1, k2 = _mode_arrays(grid)
    L = np.zeros(grid.shape + (2, 2), dtype=complex)
    L[..., 0, 0] = -params.mu1 * k2
    L[..., 0, 1] = -1j * xi1
    L[..., 1, 0] = -1j * xi1 * k2
    L[..., 1, 1] = -params.mu2 * k2
    return L


def _split(M: np.ndarray):
    return tuple(np.ascontiguousarray(M[..., i, j]) for i in (0, 1) for j in (0, 1))


def _exp_matrix(grid: Grid, params: ModelParams, t: float):
    xi1, k2 = _mode_arrays(grid)
    pp, bb, s = kernels.linear_coefficients(xi1, k2, params.mu1, params.mu2, t)
    off = -1j * xi1 * s
    return (pp + 0j, off, off * k2, bb + 0j)


def _phi_functions(A: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``phi_1, phi_2, phi_3`` of a batch of 2x2 matrices via one augmented exponential."""
    n = A.shape[:-2]
    Z = np.zeros(n + (8, 8), dtype=complex)
    eye = np.eye(2)
    Z[..., 0:2, 0:2] = A
    Z[..., 0:2, 2:4] = eye
    Z[..., 2:4, 4:6] = eye
    Z[..., 4:6, 6:8] = eye
    F = expm(Z.reshape(-1, 8, 8)).reshape(n + (8, 8))
    return F[..., 0:2, 2:4], F[..., 0:2, 4:6], F[..., 0:2, 6:8]


def _apply(M, u):
    m00, m01, m10, m11 = M
    p, b = u
    return (m00 * p + m01 * b, m10 * p + m11 * b)


def _add(u, v):
    return (u[0] + v[0], u[1] + v[1])


@dataclass(frozen=True)
class _ETDCoefficients:
    E: tuple
    E2: tuple
    Q: tuple
    f1: tuple
    f2: tuple
    f3: tuple


@lru_cache(maxsize=8)
def _etd_coefficients(grid: Grid, params: ModelParams, dt: float) -> _ETDCoefficients:
    hL = dt * _operator(grid, params)
    p1, p2, p3 = _phi_functions(hL)
    h1, _, _ = _phi_functions(0.5 * hL)
    return _ETDCoefficients(
        E=_exp_matrix(grid, params, dt),
        E2=_exp_matrix(grid, params, 0.5 * dt),
        Q=_split(0.5 * dt * h1),
        f1=_split(dt * (p1 - 3 * p2 + 4 * p3)),
        f2=_split(dt * 2 * (p2 - 2 * p3)),
        f3=_split(dt * (4 * p3 - p2)),
    )


@lru_cache(maxsize=8)
def _cn_coefficients(grid: Grid, params: ModelParams, dt: float):
    L = _operator(grid, params)
    eye = np.eye(2)
    inv = np.linalg.inv(eye - 0.5 * dt * L)
    return _split(inv @ (eye + 0.5 * dt * L)), _split(inv * dt)


def _nonlinear(u, grid: Grid, cfg: IntegratorConfig):
    return nonlinear_perturbed(u[0], u[1], grid, dealias=cfg.dealias)


def _etd_step(u, grid, params, cfg):
    c = _etd_coefficients(grid, params, cfg.dt)
    if not cfg.nonlinear:
        return _apply(c.E, u)
    Nu = _nonlinear(u, grid, cfg)
    Eu = _apply(c.E2, u)
    a = _add(Eu, _apply(c.Q, Nu))
    Na = _nonlinear(a, grid, cfg)
    b = _add(Eu, _apply(c.Q, Na))
    Nb = _nonlinear(b, grid, cfg)
    cc = _add(_apply(c.E2, a), _apply(c.Q, (2 * Nb[0] - Nu[0], 2 * Nb[1] - Nu[1])))
    Nc = _nonlinear(cc, grid, cfg)
    out = _add(_apply(c.E, u), _apply(c.f1, Nu))
    out = _add(out, _apply(c.f2, _add(Na, Nb)))
    return _add(out, _apply(c.f3, Nc))


def _imex_step(u, grid, params, cfg, n_prev=None):
    """Returns ``(u_next, N(u))``; ``n_prev`` absent means forward-Euler start."""
    A, B = _cn_coefficients(grid, params, cfg.dt)
    if not cfg.nonlinear:
        return _apply(A, u), None
    Nu = _nonlinear(u, grid, cfg)
    if n_prev is None:
        forcing = Nu
    else:
        forcing = (1.5 * Nu[0] - 0.5 * n_prev[0], 1.5 * Nu[1] - 0.5 * n_prev[1])
    return _add(_apply(A, u), _apply(B, forcing)), Nu


def third_derivative_sup(state: PerturbationState) -> float:
    """``max |d^3 psi|`` over all third partial derivatives."""
    g = state.grid
    c = state.psi.coeffs
    return max(float(np.max(np.abs(ifft2(g.ikx**p * g.iky ** (3 - p) * c)))) for p in range(4))


def _finite(u) -> bool:
    return bool(np.all(np.isfinite(u[0])) and np.all(np.isfinite(u[1])))


def step(state: PerturbationState, cfg: IntegratorConfig) -> PerturbationState:
    """Advance one step of size ``cfg.dt`` (imex-cn-ab2 uses its Euler start)."""
    g, p = state.grid, state.params
    u = (state.psi.coeffs, state.b.coeffs)
    if cfg.scheme == "etd-rk4":
        u1 = _etd_step(u, g, p, cfg)
    else:
        u1, _ = _imex_step(u, g, p, cfg)
    t = state.time + cfg.dt
    if not _finite(u1):
        raise IntegrationError(f"non-finite values at t={t:g}", state)
    return state.with_fields(u1[0], u1[1], time=t)


def integrate(state0: PerturbationState, cfg: IntegratorConfig) -> Trajectory:
    """Run to ``cfg.t_end`` collecting a snapshot every ``output_stride`` steps."""
    g, p = state0.grid, state0.params
    t0 = state0.time
    times = [t0]
    states = [state0]
    notes: list[str] = []
    u = (state0.psi.coeffs, state0.b.coeffs)
    n_prev = None
    for n in range(1, cfg.n_steps + 1):
        if cfg.scheme == "etd-rk4":
            u_next = _etd_step(u, g, p, cfg)
        else:
            u_next, n_prev = _imex_step(u, g, p, cfg, n_prev)
        t = t0 + n * cfg.dt
        if not _finite(u_next):
            last = state0.with_fields(u[0], u[1], time=t0 + (n - 1) * cfg.dt)
            raise IntegrationError(f"non-finite values at t={t:g}", last)
        u = u_next
        if n % cfg.output_stride == 0:
            snap = state0.with_fields(u[0], u[1], time=t)
            # step-size guard, sampled at snapshots and reported once
            if cfg.nonlinear and not notes:
                lip = cfg.dt * third_derivative_sup(snap)
                if lip > 1:
                    msg = f"dt * max|d^3 psi| = {lip:.3g} > 1 at t={t:g}"
                    warnings.warn(msg, StepSizeWarning, stacklevel=2)
                    notes.append(msg)
            times.append(t)
            states.append(snap)
    return Trajectory(tuple(times), tuple(states), cfg, tuple(notes))
