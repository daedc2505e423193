"""Pure-numpy kernels. Reference semantics for the compiled core in ``_ckernels``.

Per Fourier mode the linear perturbed system is ``d/dt (psi, b) = L (psi, b)`` with

    L = [[-mu1 |xi|^2,        -i xi1   ],
         [-i xi1 |xi|^2,  -mu2 |xi|^2  ]].

Writing ``L = lam_bar I + M`` with ``M^2 = delta^2 I`` gives the closed form
``exp(tL) = C I + S M`` where ``M = [[-m, -i xi1], [-i xi1 |xi|^2, m]]``.
Only three real numbers per mode are needed: the diagonal entries
``pp = C - S m``, ``bb = C + S m`` and the scale ``S`` of the off-diagonal part.
"""

import numpy as np


def _expm1_ratio(x):
    """``(1 - exp(-x)) / x`` for x >= 0, equal to 1 at x = 0."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nz = x > 0
    out[nz] = -np.expm1(-x[nz]) / x[nz]
    return out


def linear_coefficients(xi1, k2, mu1, mu2, t):
    """Return ``(pp, bb, s)`` so that ``exp(tL)`` has entries
    ``[[pp, -i xi1 s], [-i xi1 k2 s, bb]]``."""
    xi1 = np.asarray(xi1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    t = float(t)
    q = xi1 * xi1 * k2
    lam_bar = -0.5 * (mu1 + mu2) * k2
    m = 0.5 * (mu1 - mu2) * k2
    d2 = m * m - q

    pp = np.empty_like(k2)
    bb = np.empty_like(k2)
    s = np.empty_like(k2)

    # well-separated real roots: spectral projectors, no cancellation
    eig = d2 > 0.25 * m * m
    if np.any(eig):
        d = np.sqrt(d2[eig])
        mm = m[eig]
        qq = q[eig]
        lam_f = lam_bar[eig] - d
        det = mu1 * mu2 * k2[eig] ** 2 + qq
        lam_s = det / lam_f
        es = np.exp(lam_s * t)
        ef = es * np.exp(-2.0 * d * t)
        # whichever of d -/+ m cancels is rebuilt from (d - m)(d + m) = -q
        pos = mm > 0
        dpm = d + mm
        dmm = d - mm
        with np.errstate(divide="ignore", invalid="ignore"):
            dmm = np.where(pos, -qq / dpm, dmm)
            dpm = np.where(pos, dpm, -qq / dmm)
        pp[eig] = (es * dmm + ef * dpm) / (2.0 * d)
        bb[eig] = (es * dpm + ef * dmm) / (2.0 * d)
        s[eig] = es * t * _expm1_ratio(2.0 * d * t)

    near = (~eig) & (d2 > 0)
    if np.any(near):
        d = np.sqrt(d2[near])
        es = np.exp((lam_bar[near] + d) * t)
        c = 0.5 * es * (1.0 + np.exp(-2.0 * d * t))
        sv = es * t * _expm1_ratio(2.0 * d * t)
        pp[near] = c - sv * m[near]
        bb[near] = c + sv * m[near]
        s[near] = sv

    dbl = d2 == 0
    if np.any(dbl):
        c = np.exp(lam_bar[dbl] * t)
        sv = t * c
        pp[dbl] = c - sv * m[dbl]
        bb[dbl] = c + sv * m[dbl]
        s[dbl] = sv

    osc = d2 < 0
    if np.any(osc):
        w = np.sqrt(-d2[osc])
        e = np.exp(lam_bar[osc] * t)
        c = e * np.cos(w * t)
        # sinc handles w t -> 0 without a branch
        sv = e * t * np.sinc(w * t / np.pi)
        pp[osc] = c - sv * m[osc]
        bb[osc] = c + sv * m[osc]
        s[osc] = sv
    return pp, bb, s


def propagate(xi1, k2, mu1, mu2, t, psi, b):
    """Apply ``exp(tL)`` mode-wise to complex coefficient arrays."""
    pp, bb, s = linear_coefficients(xi1, k2, mu1, mu2, t)
    xi1 = np.asarray(xi1, dtype=float)
    psi_new = pp * psi - 1j * xi1 * s * b
    b_new = -1j * xi1 * np.asarray(k2) * s * psi + bb * b
    return psi_new, b_new


def decay_sums(xi1, k2, weights, psi0, b0, t, k, mu1, mu2):
    """Quadrature sums of ``|xi1|^{2k}|b(t)|^2`` and ``|xi1|^{2k}|xi|^2|psi(t)|^2``.

    ``psi0`` and ``b0`` are real-valued initial profiles sampled at the nodes.
    """
    pp, bb, s = linear_coefficients(xi1, k2, mu1, mu2, t)
    xi1 = np.asarray(xi1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    wk = np.asarray(weights) * np.abs(xi1) ** (2 * k)
    b_sq = (bb * b0) ** 2 + (xi1 * k2 * s * psi0) ** 2
    psi_sq = (pp * psi0) ** 2 + (xi1 * s * b0) ** 2
    # np.sum on a contiguous 1-D array reduces pairwise
    return float(np.sum(wk * b_sq)), float(np.sum(wk * k2 * psi_sq))
