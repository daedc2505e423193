"""Exact solution of the linearized perturbed system.

For ``mu1 = 0, mu2 = 1`` each Fourier mode of ``b`` solves

    b'' + |xi|^2 b' + xi1^2 |xi|^2 b = 0,

with roots ``lam_pm = -|xi|^2 (1 +/- sqrt(1 - 4 xi1^2/|xi|^2)) / 2``.
``mode_solution`` evaluates the textbook two-exponential form; the grid
propagator and the decay quadrature go through the cancellation-free kernels
in ``kernels``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import roots_legendre

from . import kernels
from .model import ModelParams, PerturbationState

Regime = Literal["distinct-real", "complex-pair", "double-root", "zero-xi1"]

DOUBLE_ROOT_TOL = 1e-12


class QuadratureError(RuntimeError):
    """Resolution doubling changed a quadrature result beyond tolerance."""


def classify(xi1: float, xi2: float) -> Regime:
    k2 = xi1 * xi1 + xi2 * xi2
    if xi1 == 0:
        return "zero-xi1"
    disc = k2 * k2 - 4 * xi1 * xi1 * k2
    if abs(disc) < DOUBLE_ROOT_TOL * k2 * k2:
        return "double-root"
    return "complex-pair" if disc < 0 else "distinct-real"


def mode_roots(xi1: float, xi2: float) -> tuple[complex, complex, Regime]:
    """``(lambda_plus, lambda_minus, regime)``; ``lambda_minus`` is the slow root."""
    k2 = xi1 * xi1 + xi2 * xi2
    if k2 == 0:
        raise ValueError("zero frequency has no characteristic roots")
    regime = classify(xi1, xi2)
    ratio = 4 * xi1 * xi1 / k2
    if regime == "double-root":
        lam = complex(-0.5 * k2)
        return lam, lam, regime
    if ratio <= 1:
        r = math.sqrt(1 - ratio)
        lam_p = -0.5 * k2 * (1 + r)
        # product form avoids cancellation when xi1^2 << |xi|^2
        lam_m = -2 * xi1 * xi1 / (1 + r)
        return complex(lam_p), complex(lam_m), regime
    r = cmath.sqrt(1 - ratio)
    return -0.5 * k2 * (1 + r), -0.5 * k2 * (1 - r), regime


def batch_roots(xi1: np.ndarray, xi2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``mode_roots`` (roots only)."""
    xi1 = np.asarray(xi1, dtype=float)
    k2 = xi1**2 + np.asarray(xi2, dtype=float) ** 2
    ratio = 4 * xi1**2 / k2
    real = ratio <= 1
    r = np.sqrt(np.where(real, 1 - ratio, 0.0))
    ri = np.sqrt(np.where(real, 0.0, ratio - 1))
    lam_p = np.where(real, -0.5 * k2 * (1 + r), -0.5 * k2 * (1 + 1j * ri))
    lam_m = np.where(real, -2 * xi1**2 / (1 + r), -0.5 * k2 * (1 - 1j * ri))
    return lam_p.astype(complex), lam_m.astype(complex)


@dataclass(frozen=True)
class ModeLinearSolution:
    xi1: float
    xi2: float
    lambda_plus: complex
    lambda_minus: complex
    c1: complex
    c2: complex
    regime: Regime
    psi0_hat: complex
    b0_hat: complex
    b1_hat: complex

    @property
    def k2(self) -> float:
        return self.xi1 * self.xi1 + self.xi2 * self.xi2

    def b(self, t):
        t = np.asarray(t, dtype=float)
        if self.regime == "double-root":
            return (self.c1 + self.c2 * t) * np.exp(self.lambda_plus * t)
        return self.c1 * np.exp(self.lambda_plus * t) + self.c2 * np.exp(self.lambda_minus * t)

    def db_dt(self, t):
        t = np.asarray(t, dtype=float)
        lp, lm = self.lambda_plus, self.lambda_minus
        if self.regime == "double-root":
            return (self.c2 + lp * (self.c1 + self.c2 * t)) * np.exp(lp * t)
        return self.c1 * lp * np.exp(lp * t) + self.c2 * lm * np.exp(lm * t)

    def psi(self, t):
        """``psi(t) = psi0 - i xi1 \\int_0^t b``, integrated exactly."""
        t = np.asarray(t, dtype=float)
        if self.regime == "zero-xi1":
            return np.full(t.shape, self.psi0_hat, dtype=complex)
        lp, lm = self.lambda_plus, self.lambda_minus
        if self.regime == "double-root":
            e = np.exp(lp * t)
            integral = self.c1 * (e - 1) / lp + self.c2 * (t * e / lp - (e - 1) / lp**2)
        else:
            integral = self.c1 * _expm1_over(lp, t) + self.c2 * _expm1_over(lm, t)
        return self.psi0_hat - 1j * self.xi1 * integral


def _expm1_over(lam: complex, t):
    """``(exp(lam t) - 1) / lam``, with the ``lam -> 0`` limit ``t``."""
    if lam == 0:
        return t.astype(complex)
    return np.expm1(lam * t) / lam


def mode_solution(xi, psi0_hat: complex, b0_hat: complex) -> ModeLinearSolution:
    """Closed-form coefficients ``c1, c2`` for one mode (``mu1 = 0, mu2 = 1``).

    ``b1 = b_t(0)`` is derived from the first-order system:
    ``b1 = -i xi1 |xi|^2 psi0 - |xi|^2 b0``.
    """
    xi1, xi2 = float(xi[0]), float(xi[1])
    lam_p, lam_m, regime = mode_roots(xi1, xi2)
    k2 = xi1 * xi1 + xi2 * xi2
    b1 = -1j * xi1 * k2 * psi0_hat - k2 * b0_hat
    if regime == "double-root":
        c1 = complex(b0_hat)
        c2 = b1 - lam_p * b0_hat
    else:
        root = cmath.sqrt(1 - 4 * xi1 * xi1 / k2)
        denom = k2 * root
        c1 = (lam_m * b0_hat - b1) / denom
        c2 = -(lam_p * b0_hat - b1) / denom
    return ModeLinearSolution(xi1, xi2, lam_p, lam_m, c1, c2, regime, complex(psi0_hat), complex(b0_hat), b1)


def propagate_linear_grid(state0: PerturbationState, t: float) -> PerturbationState:
    """Exact linear evolution of every grid mode over time ``t``.

    The closed form covers any ``mu1, mu2 >= 0``; ``mu1 = 0, mu2 = 1`` is the
    regime the mode formulas above describe.
    """
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    if t == 0:
        return state0
    g = state0.grid
    p = state0.params
    k2 = np.where(g.nyquist_mask, 0.0, g.K2)
    xi1 = np.where(g.nyquist_mask, 0.0, g.KX)
    psi, b = kernels.propagate(xi1, k2, p.mu1, p.mu2, float(t), state0.psi.coeffs, state0.b.coeffs)
    return state0.with_fields(psi, b, time=state0.time + t)


# -- decay quadrature on R^2 -----------------------------------------------

ProfileShape = Literal["d8", "borderline"]


@dataclass(frozen=True)
class DecayProfile:
    """Initial data on R^2 for the decay quadrature.

    ``d8``: ``b0 = |xi1|^s exp(-|xi|^2)``, ``psi0 = 0``.
    ``borderline``: ``|xi| psi0 = |xi1|^(s - 1/2 + eta) exp(-|xi|^2)``, ``b0 = 0``;
    this sits at the edge of the ``|D_x|^{-s}`` weighted class.
    """

    s: float = 0.45
    shape: ProfileShape = "d8"
    eta: float = 0.02
    radius: float = 6.0
    panels: int = 34
    points: int = 12
    mu1: float = 0.0
    mu2: float = 1.0

    def __post_init__(self):
        if not 0 < self.s < 0.5:
            raise ValueError(f"s must lie in (0, 1/2), got {self.s}")
        if self.shape not in ("d8", "borderline"):
            raise ValueError(f"unknown profile shape {self.shape!r}")
        if self.shape == "borderline" and not 0 < self.eta:
            raise ValueError("borderline profile needs eta > 0")

    def initial(self, xi1: np.ndarray, xi2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        k2 = xi1**2 + xi2**2
        g = np.exp(-k2)
        if self.shape == "d8":
            return np.zeros_like(k2), np.abs(xi1) ** self.s * g
        with np.errstate(divide="ignore", invalid="ignore"):
            psi0 = np.abs(xi1) ** (self.s - 0.5 + self.eta) * g / np.sqrt(k2)
        return np.where(k2 > 0, psi0, 0.0), np.zeros_like(k2)

    def nodes(self, points: int | None = None):
        """Graded tensor Gauss-Legendre rule on ``[-R, R] x [0, R]`` (y-symmetry folded)."""
        n = points or self.points
        x, w = _graded_rule(self.radius, self.panels, n)
        X1 = np.concatenate([-x[::-1], x])
        W1 = np.concatenate([w[::-1], w])
        xi1, xi2 = np.meshgrid(X1, x, indexing="ij")
        weights = np.outer(W1, 2 * w)
        return xi1.ravel(), xi2.ravel(), weights.ravel()


def _graded_rule(R: float, panels: int, n: int):
    """Gauss-Legendre on geometrically graded panels ``[R 2^-(i+1), R 2^-i]`` plus ``[0, R 2^-panels]``."""
    edges = np.concatenate([[0.0], R * 2.0 ** -np.arange(panels, -1, -1)])
    x, w = roots_legendre(n)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def _norm_series(profile: DecayProfile, times, k, points, field):
    xi1, xi2, w = profile.nodes(points)
    k2 = xi1**2 + xi2**2
    psi0, b0 = profile.initial(xi1, xi2)
    out = np.empty(len(times))
    for i, t in enumerate(times):
        sb, sp = kernels.decay_sums(xi1, k2, w, psi0, b0, float(t), int(k), profile.mu1, profile.mu2)
        out[i] = sb if field == "b" else sp
    # non-unitary transform convention: ||f||^2 = (2 pi)^-2 \int |f_hat|^2
    return np.sqrt(out) / (2 * np.pi)


def decay_quadrature(
    profile: DecayProfile,
    times,
    k: int = 0,
    field: Literal["b", "grad_psi"] = "b",
    rtol: float = 1e-3,
) -> np.ndarray:
    """``||d_x^k b(t)||_{L^2(R^2)}`` (or of ``grad psi``) for each time.

    The rule is re-run with doubled points per panel; a relative change above
    ``rtol`` at any time raises ``QuadratureError``.
    """
    if k not in (0, 1, 2):
        raise ValueError(f"k must be 0, 1 or 2, got {k}")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) <= 0) or np.any(times < 0):
        raise ValueError("times must be a strictly increasing sequence of non-negative reals")
    coarse = _norm_series(profile, times, k, profile.points, field)
    fine = _norm_series(profile, times, k, 2 * profile.points, field)
    rel = np.abs(fine - coarse) / np.maximum(np.abs(fine), np.finfo(float).tiny)
    if np.any(rel > rtol):
        worst = int(np.argmax(rel))
        raise QuadratureError(
            f"quadrature not converged at t={times[worst]:g}: relative change {rel[worst]:.3e} > {rtol:g}"
        )
    return fine


def d8_initial_norm(s: float) -> float:
    """Closed form of ``||b0||_{L^2(R^2)}`` for the d8 profile.

    ``\\int |xi1|^{2s} exp(-2|xi|^2) dxi = Gamma(s + 1/2) sqrt(pi) / 2^(s+1)``.
    """
    from scipy.special import gamma

    return math.sqrt(gamma(s + 0.5) * math.sqrt(math.pi) / 2 ** (s + 1)) / (2 * math.pi)
