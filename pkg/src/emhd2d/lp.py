"""Isotropic and horizontal Littlewood-Paley machinery on the periodic grid.

Cutoffs are evaluated at the physical wavenumbers ``xi = 2 pi m / L``, so the
dyadic geometry is the one of R^2 restricted to the lattice. ``lambda_q = 2^q``
for ``q >= -1``; block ``-1`` is the low-pass ``chi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Mapping, Sequence

import numpy as np

from .grid import Grid, SpectralField, fft2, fractional_weight, ifft2, resample

Axis = Literal["isotropic", "horizontal"]
PLATEAU = 0.75
EDGE = 1.0


def smoothstep(t):
    """Quintic ``10 t^3 - 15 t^4 + 6 t^5`` clamped to [0, 1]; C^2 at both ends."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


@dataclass(frozen=True)
class CutoffFamily:
    plateau: float = PLATEAU
    edge: float = EDGE

    def __post_init__(self):
        if not 0 < self.plateau < self.edge <= 2 * self.plateau:
            raise ValueError("need 0 < plateau < edge <= 2 * plateau")

    def chi(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        return 1.0 - smoothstep((r - self.plateau) / (self.edge - self.plateau))

    def phi(self, r):
        return self.chi(np.asarray(r, dtype=float) / 2) - self.chi(r)

    def weight(self, r, q: int):
        """``phi_q(r)``: ``phi(r / 2^q)`` for ``q >= 0``, ``chi(r)`` for ``q = -1``."""
        if q < -1:
            return np.zeros_like(np.asarray(r, dtype=float))
        if q == -1:
            return self.chi(r)
        return self.phi(np.asarray(r, dtype=float) / 2.0**q)

    def low_pass(self, r, q: int):
        """Weight of ``S_q = sum_{q' <= q-1} Delta_q'``, which telescopes to ``chi(r / 2^q)``; zero for ``q <= -1``."""
        if q <= -1:
            return np.zeros_like(np.asarray(r, dtype=float))
        return self.chi(np.asarray(r, dtype=float) / 2.0**q)

    def tilde(self, r, q: int):
        return sum(self.weight(r, p) for p in (q - 1, q, q + 1))


DEFAULT_CUTOFFS = CutoffFamily()


def lam(q: int) -> float:
    return 2.0**q


def _radius(grid: Grid, axis: Axis) -> np.ndarray:
    if axis == "isotropic":
        return np.sqrt(grid.K2)
    if axis == "horizontal":
        return np.abs(grid.KX)
    raise ValueError(f"unknown axis {axis!r}")


def max_index(grid: Grid, axis: Axis, cutoffs: CutoffFamily = DEFAULT_CUTOFFS) -> int:
    """Largest block index with nonzero weight somewhere on the grid.

    Blocks ``-1..J`` sum to ``chi(xi / 2^(J+1))``, which is 1 on the whole
    lattice once ``r_max <= plateau * 2^(J+1)``.
    """
    r_max = float(np.max(_radius(grid, axis)))
    J = -1
    while r_max > cutoffs.plateau * 2.0 ** (J + 1):
        J += 1
    return J


def index_range(grid: Grid, axis: Axis) -> range:
    return range(-1, max_index(grid, axis) + 1)


def _check_index(grid: Grid, q: int, axis: Axis):
    if int(q) != q or q < -1 or q > max_index(grid, axis):
        raise IndexError(f"{axis} block index {q} outside [-1, {max_index(grid, axis)}]")


def block_multiplier(grid: Grid, j: int | None, k: int | None, cutoffs=DEFAULT_CUTOFFS) -> np.ndarray:
    """Multiplier of ``Delta_j Delta_k^h``; ``None`` skips that factor."""
    w = np.ones(grid.shape)
    if j is not None:
        w = w * cutoffs.weight(_radius(grid, "isotropic"), j)
    if k is not None:
        w = w * cutoffs.weight(_radius(grid, "horizontal"), k)
    return w


def project(u: SpectralField, j: int, axis: Axis = "isotropic", cutoffs=DEFAULT_CUTOFFS) -> SpectralField:
    _check_index(u.grid, j, axis)
    return SpectralField(u.grid, u.coeffs * cutoffs.weight(_radius(u.grid, axis), j))


def low_pass(u: SpectralField, q: int, axis: Axis = "isotropic", cutoffs=DEFAULT_CUTOFFS) -> SpectralField:
    return SpectralField(u.grid, u.coeffs * cutoffs.low_pass(_radius(u.grid, axis), q))


def tilde(u: SpectralField, q: int, axis: Axis = "isotropic", cutoffs=DEFAULT_CUTOFFS) -> SpectralField:
    return SpectralField(u.grid, u.coeffs * cutoffs.tilde(_radius(u.grid, axis), q))


@dataclass(frozen=True)
class LPDecomposition:
    source: SpectralField
    blocks: Mapping[tuple[int, int], SpectralField]
    j_range: range
    k_range: range

    def reconstruct(self) -> SpectralField:
        total = np.zeros(self.source.grid.shape, dtype=complex)
        for blk in self.blocks.values():
            total = total + blk.coeffs
        return SpectralField(self.source.grid, total)

    def energies(self) -> dict[tuple[int, int], float]:
        """``||Delta_j Delta_k^h u||_2^2`` per block."""
        return {jk: blk.norm2() for jk, blk in self.blocks.items()}


def decompose(u: SpectralField, cutoffs=DEFAULT_CUTOFFS) -> LPDecomposition:
    g = u.grid
    jr, kr = index_range(g, "isotropic"), index_range(g, "horizontal")
    r_iso, r_h = _radius(g, "isotropic"), _radius(g, "horizontal")
    wk = {k: cutoffs.weight(r_h, k) for k in kr}
    blocks = {}
    for j in jr:
        wj = cutoffs.weight(r_iso, j)
        for k in kr:
            blocks[(j, k)] = SpectralField(g, u.coeffs * wj * wk[k])
    return LPDecomposition(u, blocks, jr, kr)


def decompose_1d(u: SpectralField, axis: Axis = "isotropic", cutoffs=DEFAULT_CUTOFFS) -> dict[int, SpectralField]:
    return {q: project(u, q, axis, cutoffs) for q in index_range(u.grid, axis)}


# -- norms -----------------------------------------------------------------

FieldLike = SpectralField | Sequence[SpectralField]


def _components(u: FieldLike) -> list[SpectralField]:
    return [u] if isinstance(u, SpectralField) else list(u)


def _zero_line_projected(u: SpectralField, s1: float) -> SpectralField:
    """Remove the ``xi1 = 0`` line when the horizontal index is negative."""
    if s1 >= 0:
        return u
    return SpectralField(u.grid, np.where(u.grid.KX == 0, 0, u.coeffs))


def sobolev_norm(u: FieldLike, s1: float, s2: float) -> float:
    """``|| |D_x|^s1 |D|^s2 u ||_2`` by direct multiplication (singular lines projected out)."""
    total = 0.0
    for c in _components(u):
        w = fractional_weight(c.grid, s1, s2)
        total += c.grid.area * float(np.sum(np.abs(w * c.coeffs) ** 2))
    return math.sqrt(total)


def _lp_weight_sq(grid: Grid, s1: float, s2: float, cutoffs=DEFAULT_CUTOFFS) -> np.ndarray:
    """``sum_{j,k} lambda_j^(2 s2) lambda_k^(2 s1) phi_j^2 phi_k^2`` per mode."""
    r_iso, r_h = _radius(grid, "isotropic"), _radius(grid, "horizontal")
    wj = sum(lam(j) ** (2 * s2) * cutoffs.weight(r_iso, j) ** 2 for j in index_range(grid, "isotropic"))
    wk = sum(lam(k) ** (2 * s1) * cutoffs.weight(r_h, k) ** 2 for k in index_range(grid, "horizontal"))
    return wj * wk


def lp_sobolev_norm(u: FieldLike, s1: float, s2: float, cutoffs=DEFAULT_CUTOFFS) -> float:
    """Square-sum form ``(sum_{j,k} lambda_j^(2 s2) lambda_k^(2 s1) ||Delta_j Delta_k^h u||^2)^(1/2)``."""
    total = 0.0
    for c in _components(u):
        c = _zero_line_projected(c, s1)
        w = _lp_weight_sq(c.grid, s1, s2, cutoffs)
        total += c.grid.area * float(np.sum(w * np.abs(c.coeffs) ** 2))
    return math.sqrt(total)


def besov_norm(u: FieldLike, s1: float, s2: float, cutoffs=DEFAULT_CUTOFFS) -> float:
    """``sum_{j,k} lambda_j^s2 lambda_k^s1 ||Delta_j Delta_k^h u||_2``; vector fields use the
    Euclidean norm of the component blocks."""
    comps = [_zero_line_projected(c, s1) for c in _components(u)]
    g = comps[0].grid
    r_iso, r_h = _radius(g, "isotropic"), _radius(g, "horizontal")
    kr = index_range(g, "horizontal")
    wk = {k: cutoffs.weight(r_h, k) for k in kr}
    total = 0.0
    for j in index_range(g, "isotropic"):
        wj = cutoffs.weight(r_iso, j)
        for k in kr:
            w = wj * wk[k]
            e = sum(float(np.sum(np.abs(w * c.coeffs) ** 2)) for c in comps)
            total += lam(j) ** s2 * lam(k) ** s1 * math.sqrt(g.area * e)
    return total


def equivalence_bracket(grid: Grid, s1: float, s2: float, cutoffs=DEFAULT_CUTOFFS) -> tuple[float, float]:
    """Min and max over nonsingular lattice modes of ``lp_sobolev_norm / sobolev_norm`` for a single mode.

    For any field the ratio of the two norms lies inside this bracket.
    """
    mult = fractional_weight(grid, s1, s2) ** 2
    lp = _lp_weight_sq(grid, s1, s2, cutoffs)
    ok = mult > 0
    if s1 < 0:
        ok &= grid.KX != 0
    ratio = np.sqrt(lp[ok] / mult[ok])
    return float(ratio.min()), float(ratio.max())


def orthogonality_bracket(cutoffs=DEFAULT_CUTOFFS, samples: int = 20001) -> tuple[float, float]:
    """Range of ``sum_q phi_q(r)^2`` over ``r``; bounds ``sum_q ||Delta_q u||^2 / ||u||^2``."""
    r = np.linspace(0.0, 8.0, samples)
    total = sum(cutoffs.weight(r, q) ** 2 for q in range(-1, 5))
    return float(total.min()), float(total.max())


# -- paraproducts ----------------------------------------------------------


def padded_product_grid(grid: Grid) -> Grid:
    return grid.padded(2)


def _to_padded(u: SpectralField) -> SpectralField:
    return resample(u, padded_product_grid(u.grid))


class _Weights:
    """Cutoff arrays on one grid, memoized by (kind, axis, index)."""

    def __init__(self, grid: Grid, cutoffs: CutoffFamily):
        self.grid = grid
        self.cutoffs = cutoffs
        self.r = {"isotropic": _radius(grid, "isotropic"), "horizontal": _radius(grid, "horizontal")}
        self._cache: dict = {}

    def __call__(self, kind: str, axis: Axis, q: int) -> np.ndarray:
        key = (kind, axis, q)
        if key not in self._cache:
            r = self.r[axis]
            if kind == "S":
                # the low-pass partner of block q' is S_{q'-1}
                w = self.cutoffs.low_pass(r, q - 1)
            elif kind == "D":
                w = self.cutoffs.weight(r, q)
            else:
                w = self.cutoffs.tilde(r, q)
            self._cache[key] = w
        return self._cache[key]


# (f-factor, g-factor, window) per split; window "near" is |q - q'| <= 2, "far" is q' >= q - 2
_ISO_SPLITS = (("S", "D", "near"), ("D", "S", "near"), ("T", "D", "far"))
_HOR_SPLITS = (("S", "D", "near"), ("D", "S", "near"), ("T", "D", "far"))


def _window(kind: str, q: int, top: int) -> range:
    if kind == "near":
        return range(max(q - 2, -1), min(q + 2, top) + 1)
    return range(max(q - 2, -1), top + 1)


def bony_terms(f: SpectralField, g: SpectralField, j: int, k: int, cutoffs=DEFAULT_CUTOFFS) -> list[SpectralField]:
    """The nine mixed paraproduct pieces of ``Delta_j Delta_k^h (f g)``.

    Term ``3 h + i`` (zero-based) pairs the horizontal split ``h`` with the
    isotropic split ``i``; splits are (low-pass f, block g), (block f,
    low-pass g), (tilde f, block g). Products are formed on a grid padded by
    two so they are alias-free, and the results live on that padded grid.
    """
    if f.grid != g.grid:
        raise ValueError("f and g must share a grid")
    _check_index(f.grid, j, "isotropic")
    _check_index(f.grid, k, "horizontal")
    fp, gp = _to_padded(f), _to_padded(g)
    pg = fp.grid
    W = _Weights(pg, cutoffs)
    J, K = max_index(pg, "isotropic"), max_index(pg, "horizontal")
    out_w = W("D", "isotropic", j) * W("D", "horizontal", k)
    terms = []
    for hf, hg, hwin in _HOR_SPLITS:
        for jf, jg, jwin in _ISO_SPLITS:
            acc = np.zeros(pg.shape)
            for kp in _window(hwin, k, K):
                fh = fp.coeffs * W(hf, "horizontal", kp)
                gh = gp.coeffs * W(hg, "horizontal", kp)
                for jp in _window(jwin, j, J):
                    wf = W(jf, "isotropic", jp)
                    wg = W(jg, "isotropic", jp)
                    if not (wf.any() and wg.any()):
                        continue
                    acc += ifft2(fh * wf) * ifft2(gh * wg)
            terms.append(SpectralField(pg, out_w * fft2(acc)))
    return terms


def localized_product(f: SpectralField, g: SpectralField, j: int, k: int, cutoffs=DEFAULT_CUTOFFS) -> SpectralField:
    """``Delta_j Delta_k^h (f g)`` from one alias-free padded product (the oracle for ``bony_terms``)."""
    fp, gp = _to_padded(f), _to_padded(g)
    pg = fp.grid
    prod = fft2(ifft2(fp.coeffs) * ifft2(gp.coeffs))
    return SpectralField(pg, prod * block_multiplier(pg, j, k, cutoffs))


# -- Lebesgue norms, commutators, Bernstein --------------------------------


def lebesgue_norm(u: np.ndarray, grid: Grid, p: float, q: float | None = None) -> float:
    """``||u||_{L^p_x L^q_y}`` on the torus (inner integral in y); ``q`` defaults to ``p``."""
    q = p if q is None else q
    if p < 1 or q < 1:
        raise ValueError("Lebesgue exponents must be >= 1")
    a = np.abs(np.asarray(u))
    dx, dy = grid.Lx / grid.nx, grid.Ly / grid.ny
    inner = a.max(axis=1) if math.isinf(q) else (np.sum(a**q, axis=1) * dy) ** (1 / q)
    return float(inner.max()) if math.isinf(p) else float((np.sum(inner**p) * dx) ** (1 / p))


def commutator(u: Sequence[SpectralField], v: SpectralField, j: int, k: int, cutoffs=DEFAULT_CUTOFFS) -> SpectralField:
    """``Delta_j Delta_k^h (u . grad v) - u . grad Delta_j Delta_k^h v`` on the padded grid."""
    u1, u2 = u
    if not (u1.grid == u2.grid == v.grid):
        raise ValueError("u and v must share a grid")
    _check_index(v.grid, j, "isotropic")
    _check_index(v.grid, k, "horizontal")
    p1, p2, pv = _to_padded(u1), _to_padded(u2), _to_padded(v)
    pg = pv.grid
    w = block_multiplier(pg, j, k, cutoffs)
    U1, U2 = ifft2(p1.coeffs), ifft2(p2.coeffs)
    adv = U1 * ifft2(pg.ikx * pv.coeffs) + U2 * ifft2(pg.iky * pv.coeffs)
    loc = pv.coeffs * w
    adv_loc = U1 * ifft2(pg.ikx * loc) + U2 * ifft2(pg.iky * loc)
    return SpectralField(pg, w * fft2(adv) - fft2(adv_loc))


def _check_holder(r1: float, r2: float, r3: float):
    if not 1 < r1 < math.inf:
        raise ValueError("need 1 < r1 < inf")
    if r2 < 2:
        raise ValueError("need r2 >= 2")
    inv = lambda r: 0.0 if math.isinf(r) else 1.0 / r  # noqa: E731
    if abs(inv(r1) - inv(r2) - inv(r3)) > 1e-12:
        raise ValueError("exponents must satisfy 1/r1 = 1/r2 + 1/r3")


def commutator_bound_probe(u, v, j, k, r1, r2, r3, cutoffs=DEFAULT_CUTOFFS) -> tuple[float, float]:
    """``(||[Delta_j Delta_k^h, u.grad] v||_{r1}, ||grad u||_{r2} ||v||_{r3})``, evaluated on the padded grid."""
    _check_holder(r1, r2, r3)
    c = commutator(u, v, j, k, cutoffs)
    pg = c.grid
    lhs = lebesgue_norm(ifft2(c.coeffs), pg, r1)
    grads = [ifft2(m * _to_padded(ui).coeffs) for ui in u for m in (pg.ikx, pg.iky)]
    grad_mag = np.sqrt(sum(gi**2 for gi in grads))
    rhs = lebesgue_norm(grad_mag, pg, r2) * lebesgue_norm(ifft2(_to_padded(v).coeffs), pg, r3)
    return lhs, rhs


def bernstein_probe(u: SpectralField, j: int, k: int, p: float, q: float, cutoffs=DEFAULT_CUTOFFS) -> tuple[float, float]:
    """``(||Delta_j Delta_k^h u||_{L^p_x L^q_y}, lambda_j^(1/2-1/q) lambda_k^(1/2-1/p) ||Delta_j Delta_k^h u||_2)``."""
    if p < 2 or q < 2:
        raise ValueError("Bernstein probe needs p, q >= 2")
    _check_index(u.grid, j, "isotropic")
    _check_index(u.grid, k, "horizontal")
    blk = u.coeffs * block_multiplier(u.grid, j, k, cutoffs)
    phys = ifft2(blk)
    inv = lambda r: 0.0 if math.isinf(r) else 1.0 / r  # noqa: E731
    lhs = lebesgue_norm(phys, u.grid, p, q)
    rhs = lam(j) ** (0.5 - inv(q)) * lam(k) ** (0.5 - inv(p)) * lebesgue_norm(phys, u.grid, 2)
    return lhs, rhs
