"""Scalar functionals along trajectories: energies, dissipations, Besov quantities, decay fits.

All integrals are Parseval sums over the grid spectrum. Horizontal negative
powers ``|d_x|^{-s}`` drop the ``xi1 = 0`` line.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import lp
from .grid import Grid, SpectralField, fractional_weight
from .model import PerturbationState

EPS1_LADDER = (0.5, 0.2, 0.1, 0.05, 0.02, 0.01)


@dataclass(frozen=True)
class DiagnosticsConfig:
    eps1: float = 0.1
    s: float = 0.45
    s1_list: tuple[float, ...] = (0.0, 1.0)
    fit_window: tuple[float, float] = (10.0, 1e3)

    def __post_init__(self):
        if not (math.isfinite(self.eps1) and self.eps1 > 0):
            raise ValueError(f"eps1 must be positive, got {self.eps1}")
        if not 0 < self.s < 0.5:
            raise ValueError(f"s must lie in (0, 1/2), got {self.s}")
        if not self.s > 1 / 3:
            warnings.warn(f"s={self.s} is outside (1/3, 1/2); higher-order estimates assume s > 1/3", stacklevel=2)
        lo, hi = self.fit_window
        if not 0 <= lo < hi:
            raise ValueError("fit_window must satisfy 0 <= lo < hi")
        object.__setattr__(self, "s1_list", tuple(float(v) for v in self.s1_list))


# -- coercivity certification ----------------------------------------------


def _min_eig_2x2(a, d, o):
    """Smallest eigenvalue of the symmetric matrices ``[[a, o], [o, d]]``."""
    return 0.5 * (a + d) - np.sqrt((0.5 * (a - d)) ** 2 + o * o)


@dataclass(frozen=True)
class Certification:
    eps1: float
    c_E: float
    c_D: float

    @property
    def c(self) -> float:
        return min(self.c_E, self.c_D)

    @property
    def valid(self) -> bool:
        return self.c_E > 0 and self.c_D >= 0


def coercivity_constants(xi1: np.ndarray, k2: np.ndarray, eps1: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode minimum eigenvalues of E and D relative to their reference norms.

    With ``x = sqrt(1+k2) b``, ``y = sqrt(k2+k2^2) psi`` the form of E is
    ``|x|^2 + |y|^2 + 2 eps1 xi1 Re(conj(b) i psi)``; D is normalized by
    ``x = sqrt(k2+k2^2) b``, ``y = |xi1| sqrt(k2) psi``. Modes where a
    reference weight vanishes reduce to a single diagonal entry.
    """
    xi1 = np.abs(np.asarray(xi1, dtype=float))
    k2 = np.asarray(k2, dtype=float)
    wb = 1 + k2
    wp = k2 + k2 * k2
    with np.errstate(divide="ignore", invalid="ignore"):
        off_e = np.where(wp > 0, eps1 * xi1 / np.sqrt(wb * wp), 0.0)
    cE = np.where(wp > 0, 1 - off_e, 1.0)

    wbd = k2 + k2 * k2
    wpd = xi1 * xi1 * k2
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(wbd > 0, 1 - eps1 * xi1 * xi1 / wbd, 1.0)
        o = np.where(wbd > 0, eps1 / (2 * np.sqrt(1 + k2)), 0.0)
    both = (wbd > 0) & (wpd > 0)
    cD = np.where(both, _min_eig_2x2(a, eps1, o), np.where(wbd > 0, a, np.inf))
    return cE, cD


@lru_cache(maxsize=32)
def certify(grid: Grid, eps1: float) -> Certification:
    """Coercivity constants over the grid spectrum for the given ``eps1``."""
    xi1 = np.where(grid.nyquist_mask, 0.0, grid.KX)
    k2 = np.where(grid.nyquist_mask, 0.0, grid.K2)
    cE, cD = coercivity_constants(xi1, k2, eps1)
    finite = np.isfinite(cD)
    return Certification(float(eps1), float(cE.min()), float(cD[finite].min()) if finite.any() else math.inf)


def eps1_ladder(grid: Grid, threshold: float = 0.1, ladder: Sequence[float] = EPS1_LADDER) -> Certification | None:
    """Largest ladder value whose E and D constants both exceed ``threshold``."""
    for e in sorted(ladder, reverse=True):
        cert = certify(grid, float(e))
        if cert.c > threshold:
            return cert
    return None


# -- quadratic functionals -------------------------------------------------


def _modes(grid: Grid):
    xi1 = np.where(grid.nyquist_mask, 0.0, grid.KX)
    k2 = np.where(grid.nyquist_mask, 0.0, grid.K2)
    return xi1, k2


def _parts(state: PerturbationState, weight=1.0) -> dict[str, float]:
    """Weighted Parseval integrals of every quadratic term in E and D."""
    g = state.grid
    xi1, k2 = _modes(g)
    p, b = state.psi.coeffs, state.b.coeffs
    pb2 = np.abs(b) ** 2 * weight
    pp2 = np.abs(p) ** 2 * weight
    # Re(conj(b) * i xi1 psi), the density of <b, psi_x>
    cross = (np.conj(b) * (1j * xi1 * p)).real * weight
    A = g.area
    return {
        "b": A * float(np.sum(pb2)),
        "grad_b": A * float(np.sum(k2 * pb2)),
        "hess_b": A * float(np.sum(k2 * k2 * pb2)),
        "b_x": A * float(np.sum(xi1 * xi1 * pb2)),
        "grad_psi": A * float(np.sum(k2 * pp2)),
        "hess_psi": A * float(np.sum(k2 * k2 * pp2)),
        "grad_psi_x": A * float(np.sum(xi1 * xi1 * k2 * pp2)),
        "b_psi_x": A * float(np.sum(cross)),
        "lap_b_psi_x": A * float(np.sum(-k2 * cross)),
    }


def _assemble(q: dict[str, float], eps1: float) -> tuple[float, float]:
    E = q["b"] + q["grad_psi"] + q["grad_b"] + q["hess_psi"] + 2 * eps1 * q["b_psi_x"]
    D = q["grad_b"] + q["hess_b"] + eps1 * q["grad_psi_x"] - eps1 * q["b_x"] - eps1 * q["lap_b_psi_x"]
    return E, D


def eval_E_D(state: PerturbationState, cfg: DiagnosticsConfig) -> tuple[float, float]:
    return _assemble(_parts(state), cfg.eps1)


def reference_norms(state: PerturbationState) -> tuple[float, float]:
    """``(||b||^2 + ||grad psi||^2 + ||grad b||^2 + ||grad^2 psi||^2, ||grad b||^2 + ||grad^2 b||^2 + ||grad psi_x||^2)``."""
    q = _parts(state)
    return (
        q["b"] + q["grad_psi"] + q["grad_b"] + q["hess_psi"],
        q["grad_b"] + q["hess_b"] + q["grad_psi_x"],
    )


def eval_E_s(state: PerturbationState, cfg: DiagnosticsConfig) -> float:
    g = state.grid
    _, k2 = _modes(g)
    w0 = fractional_weight(g, -cfg.s, 0.0) ** 2
    w1 = fractional_weight(g, -cfg.s, 1.0 + cfg.s) ** 2
    pb2 = np.abs(state.b.coeffs) ** 2
    pp2 = k2 * np.abs(state.psi.coeffs) ** 2
    return g.area * float(np.sum((w0 + w1) * (pb2 + pp2)))


def lp_block_weight(grid: Grid, l: int) -> np.ndarray:
    """``(sum_j phi_j^2)(sum_k lambda_k^(2l) phi_k(xi1)^2)`` per mode.

    Summing ``lambda_k^(2l) ||Delta_j Delta_k^h f||^2`` over all blocks equals
    the Parseval sum of this weight times ``|f_hat|^2``.
    """
    return lp._lp_weight_sq(grid, float(l), 0.0)


def eval_El_Dl(state: PerturbationState, cfg: DiagnosticsConfig, l: int) -> tuple[float, float]:
    if l not in (0, 1, 2):
        raise ValueError(f"l must be 0, 1 or 2, got {l}")
    return _assemble(_parts(state, lp_block_weight(state.grid, l)), cfg.eps1)


def el_lower_bound_constant(grid: Grid, l: int, eps1: float) -> float:
    """``c`` with ``E_l >= c (||d_x^l b||^2 + ||d_x^l grad b||^2 + ||d_x^l grad psi||^2 + ||d_x^l grad^2 psi||^2)``."""
    xi1, k2 = _modes(grid)
    cE, _ = coercivity_constants(xi1, k2, eps1)
    w = lp_block_weight(grid, l)
    ax = np.abs(xi1) ** (2 * l)
    ok = ax > 0
    return float(np.min(cE[ok] * w[ok] / ax[ok]))


def eval_E_high(state: PerturbationState, cfg: DiagnosticsConfig, s1: float) -> float:
    """``||b||^2 + ||grad psi||^2`` in ``H^{-s,s1}`` plus the same in ``H^{-s,s1+1}``."""
    g = state.grid
    _, k2 = _modes(g)
    w = fractional_weight(g, -cfg.s, s1) ** 2 + fractional_weight(g, -cfg.s, s1 + 1) ** 2
    return g.area * float(np.sum(w * (np.abs(state.b.coeffs) ** 2 + k2 * np.abs(state.psi.coeffs) ** 2)))


def _grad(f: SpectralField) -> tuple[SpectralField, SpectralField]:
    g = f.grid
    return SpectralField(g, g.ikx * f.coeffs), SpectralField(g, g.iky * f.coeffs)


def eval_g(state: PerturbationState) -> tuple[float, float, float]:
    b, psi = state.b, state.psi
    gb, gp = _grad(b), _grad(psi)
    B = lp.besov_norm
    g1 = B(gb, 0.5, 1.5) + B(gp, 1.5, 0.5) + B(gp, 0.5, 1.5)
    g2 = B(b, 1.5, 0.5)
    g3 = (
        B(b, 0.5, 1.5)
        + g2
        + B(psi, 1.5, 0.5)
        + B(gp, 1.5, 0.5)
        + B(psi, 0.5, 1.5) ** 2
        + B(gp, 0.5, 1.5) ** 2
    )
    return g1, g2, g3


# -- energy law ------------------------------------------------------------


def basic_energy(state: PerturbationState) -> float:
    """``1/2 (||grad psi||^2 + ||b||^2)``."""
    q = _parts(state)
    return 0.5 * (q["grad_psi"] + q["b"])


def basic_dissipation(state: PerturbationState) -> float:
    """``mu1 ||Lap psi||^2 + mu2 ||grad b||^2``."""
    q = _parts(state)
    p = state.params
    return p.mu1 * q["hess_psi"] + p.mu2 * q["grad_b"]


def time_derivative(times: np.ndarray, values: np.ndarray, order: int = 2) -> np.ndarray:
    """Centered differences on uniform snapshots (one-sided at the ends)."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(t) < 3:
        raise ValueError("need at least 3 snapshots for a time derivative")
    h = np.diff(t)
    if np.any(np.abs(h - h[0]) > 1e-9 * abs(h[0])):
        raise ValueError("snapshots must be uniformly spaced")
    h = h[0]
    if order == 2:
        return np.gradient(v, h, edge_order=2)
    if order == 4:
        if len(v) < 5:
            raise ValueError("fourth-order stencil needs at least 5 snapshots")
        d = np.gradient(v, h, edge_order=2)
        d[2:-2] = (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * h)
        return d
    raise ValueError("order must be 2 or 4")


def energy_law_residual(times, states: Sequence[PerturbationState], order: int = 2) -> np.ndarray:
    """Relative residual of ``d/dt basic_energy + basic_dissipation = 0`` per snapshot."""
    E = np.array([basic_energy(s) for s in states])
    Dis = np.array([basic_dissipation(s) for s in states])
    dE = time_derivative(times, E, order)
    scale = np.maximum(np.maximum(np.abs(dE), Dis), np.finfo(float).tiny)
    res = np.abs(dE + Dis) / scale
    return np.where((np.abs(dE) == 0) & (Dis == 0), 0.0, res)


# -- records ---------------------------------------------------------------

CSV_COLUMNS_FIXED = ("time", "E", "D", "E_s", "E_1", "D_1", "E_2", "D_2")
CSV_COLUMNS_TAIL = ("g1", "g2", "g3", "energy_law_residual")


def csv_columns(cfg: DiagnosticsConfig) -> tuple[str, ...]:
    return CSV_COLUMNS_FIXED + tuple(f"E_high:{s1:g}" for s1 in cfg.s1_list) + CSV_COLUMNS_TAIL


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    E: float
    D: float
    E_s: float
    E_1: float
    D_1: float
    E_2: float
    D_2: float
    E_high: dict[float, float] = field(default_factory=dict)
    g1: float = 0.0
    g2: float = 0.0
    g3: float = 0.0
    energy_law_residual: float = float("nan")

    def row(self, cfg: DiagnosticsConfig) -> list[float]:
        head = [self.time, self.E, self.D, self.E_s, self.E_1, self.D_1, self.E_2, self.D_2]
        return head + [self.E_high[s1] for s1 in cfg.s1_list] + [self.g1, self.g2, self.g3, self.energy_law_residual]


def evaluate(state: PerturbationState, cfg: DiagnosticsConfig, residual: float = float("nan")) -> DiagnosticsRecord:
    E, D = eval_E_D(state, cfg)
    E1, D1 = eval_El_Dl(state, cfg, 1)
    E2, D2 = eval_El_Dl(state, cfg, 2)
    g1, g2, g3 = eval_g(state)
    return DiagnosticsRecord(
        time=state.time,
        E=E,
        D=D,
        E_s=eval_E_s(state, cfg),
        E_1=E1,
        D_1=D1,
        E_2=E2,
        D_2=D2,
        E_high={s1: eval_E_high(state, cfg, s1) for s1 in cfg.s1_list},
        g1=g1,
        g2=g2,
        g3=g3,
        energy_law_residual=residual,
    )


def evaluate_trajectory(times, states, cfg: DiagnosticsConfig) -> list[DiagnosticsRecord]:
    res = energy_law_residual(times, states) if len(states) >= 3 else [float("nan")] * len(states)
    return [evaluate(s, cfg, float(r)) for s, r in zip(states, res)]


# -- decay fits and monotonicity -------------------------------------------


def fit_decay(times, values, window: tuple[float, float] | None = None, min_samples: int = 8) -> tuple[float, float]:
    """Least-squares slope of ``log(values)`` against ``log(1 + t)`` and its ``r^2``."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape:
        raise ValueError("times and values differ in shape")
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, v = t[keep], v[keep]
    if len(t) < min_samples:
        raise ValueError(f"need at least {min_samples} samples in the fit window, got {len(t)}")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ValueError("values must be positive and finite")
    x, y = np.log1p(t), np.log(v)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


@dataclass(frozen=True)
class MonotonicityReport:
    times: np.ndarray
    E: np.ndarray
    D: np.ndarray
    dEdt: np.ndarray
    tolerance: np.ndarray
    c: float
    flagged: tuple[tuple[float, float], ...]
    increasing: tuple[tuple[float, float], ...]

    @property
    def passed(self) -> bool:
        return not self.flagged


def monotonicity_probe(times, states: Sequence[PerturbationState], cfg: DiagnosticsConfig, rtol: float = 1e-8) -> MonotonicityReport:
    """Check ``dE/dt + c D <= 0`` on snapshot intervals with the certified ``c``.

    The discrete derivative's truncation error is estimated by comparing the
    centered stencil at spacings ``h`` and ``2h``; an interval is flagged only
    when the inequality fails by more than that estimate plus ``rtol`` times
    the local scale.
    """
    t = np.asarray(times, dtype=float)
    if len(t) < 5:
        raise ValueError("monotonicity probe needs at least 5 snapshots")
    grid = states[0].grid
    cert = certify(grid, cfg.eps1)
    if not cert.valid:
        raise ValueError(f"eps1={cfg.eps1} is not certified on this grid (c_E={cert.c_E:.3g}, c_D={cert.c_D:.3g})")
    c = cert.c
    ED = np.array([eval_E_D(s, cfg) for s in states])
    E, D = ED[:, 0], ED[:, 1]
    dE = time_derivative(t, E)
    coarse = np.full_like(dE, np.nan)
    coarse[2:-2] = (E[4:] - E[:-4]) / (t[4:] - t[:-4])
    trunc = np.abs(dE - coarse) / 3
    trunc[~np.isfinite(trunc)] = np.nanmax(trunc) if np.any(np.isfinite(trunc)) else 0.0
    scale = np.maximum(np.abs(dE), c * np.abs(D))
    tol = trunc + rtol * scale + np.finfo(float).tiny
    lhs = dE + c * D
    bad = lhs > tol
    flagged = tuple((float(t[max(i - 1, 0)]), float(t[min(i + 1, len(t) - 1)])) for i in np.flatnonzero(bad))
    dE_pairs = np.diff(E)
    inc_tol = rtol * np.maximum(np.abs(E[:-1]), np.finfo(float).tiny)
    increasing = tuple((float(t[i]), float(t[i + 1])) for i in np.flatnonzero(dE_pairs > inc_tol))
    return MonotonicityReport(t, E, D, dE, tol, c, flagged, increasing)


def is_nonincreasing(values, rtol: float = 1e-12) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) <= rtol * np.maximum(np.abs(v[:-1]), np.finfo(float).tiny)))
