# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: per-mode linear propagator and decay quadrature sums.

Semantics are identical to ``_pykernels``; see there for the closed form.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, sqrt, cos, sin, fabs

cnp.import_array()

cdef int _PAIRWISE_BLOCK = 128


cdef inline double _ratio(double x) noexcept nogil:
    # (1 - exp(-x)) / x, continuous at 0
    if x > 0.0:
        return -expm1(-x) / x
    return 1.0


cdef inline void _coeff(double xi1, double k2, double mu1, double mu2, double t,
                        double* pp, double* bb, double* s) noexcept nogil:
    cdef double q = xi1 * xi1 * k2
    cdef double lam_bar = -0.5 * (mu1 + mu2) * k2
    cdef double m = 0.5 * (mu1 - mu2) * k2
    cdef double d2 = m * m - q
    cdef double d, lam_f, lam_s, es, ef, dpm, dmm, c, sv, w, e, wt
    if d2 > 0.25 * m * m:
        d = sqrt(d2)
        lam_f = lam_bar - d
        lam_s = (mu1 * mu2 * k2 * k2 + q) / lam_f
        es = exp(lam_s * t)
        ef = es * exp(-2.0 * d * t)
        if m > 0.0:
            dpm = d + m
            dmm = -q / dpm
        else:
            dmm = d - m
            dpm = -q / dmm
        pp[0] = (es * dmm + ef * dpm) / (2.0 * d)
        bb[0] = (es * dpm + ef * dmm) / (2.0 * d)
        s[0] = es * t * _ratio(2.0 * d * t)
    elif d2 > 0.0:
        d = sqrt(d2)
        es = exp((lam_bar + d) * t)
        c = 0.5 * es * (1.0 + exp(-2.0 * d * t))
        sv = es * t * _ratio(2.0 * d * t)
        pp[0] = c - sv * m
        bb[0] = c + sv * m
        s[0] = sv
    elif d2 == 0.0:
        c = exp(lam_bar * t)
        sv = t * c
        pp[0] = c - sv * m
        bb[0] = c + sv * m
        s[0] = sv
    else:
        w = sqrt(-d2)
        e = exp(lam_bar * t)
        wt = w * t
        c = e * cos(wt)
        if wt == 0.0:
            sv = e * t
        else:
            sv = e * sin(wt) / w
        pp[0] = c - sv * m
        bb[0] = c + sv * m
        s[0] = sv


cdef double _pairwise(const double* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, half
    cdef double acc
    if n <= _PAIRWISE_BLOCK:
        acc = 0.0
        for i in range(n):
            acc += a[i]
        return acc
    half = n // 2
    return _pairwise(a, half) + _pairwise(a + half, n - half)


def linear_coefficients(xi1, k2, double mu1, double mu2, double t):
    cdef const double[::1] x = np.ascontiguousarray(xi1, dtype=np.float64).ravel()
    cdef const double[::1] kk = np.ascontiguousarray(k2, dtype=np.float64).ravel()
    cdef Py_ssize_t n = x.shape[0], i
    pp_arr = np.empty(n)
    bb_arr = np.empty(n)
    s_arr = np.empty(n)
    cdef double[::1] pp = pp_arr
    cdef double[::1] bb = bb_arr
    cdef double[::1] s = s_arr
    with nogil:
        for i in range(n):
            _coeff(x[i], kk[i], mu1, mu2, t, &pp[i], &bb[i], &s[i])
    shape = np.shape(k2)
    return pp_arr.reshape(shape), bb_arr.reshape(shape), s_arr.reshape(shape)


def propagate(xi1, k2, double mu1, double mu2, double t, psi, b):
    shape = np.shape(psi)
    cdef const double[::1] x = np.ascontiguousarray(xi1, dtype=np.float64).ravel()
    cdef const double[::1] kk = np.ascontiguousarray(k2, dtype=np.float64).ravel()
    cdef const double complex[::1] p_in = np.ascontiguousarray(psi, dtype=np.complex128).ravel()
    cdef const double complex[::1] b_in = np.ascontiguousarray(b, dtype=np.complex128).ravel()
    cdef Py_ssize_t n = x.shape[0], i
    p_arr = np.empty(n, dtype=np.complex128)
    b_arr = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] p_out = p_arr
    cdef double complex[::1] b_out = b_arr
    cdef double pp, bb, s
    cdef double complex p0, b0, off_pb, off_bp
    with nogil:
        for i in range(n):
            _coeff(x[i], kk[i], mu1, mu2, t, &pp, &bb, &s)
            p0 = p_in[i]
            b0 = b_in[i]
            off_pb = -1j * x[i] * s
            off_bp = off_pb * kk[i]
            p_out[i] = pp * p0 + off_pb * b0
            b_out[i] = off_bp * p0 + bb * b0
    return p_arr.reshape(shape), b_arr.reshape(shape)


def decay_sums(xi1, k2, weights, psi0, b0, double t, int k, double mu1, double mu2):
    cdef const double[::1] x = np.ascontiguousarray(xi1, dtype=np.float64).ravel()
    cdef const double[::1] kk = np.ascontiguousarray(k2, dtype=np.float64).ravel()
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64).ravel()
    cdef const double[::1] p0 = np.ascontiguousarray(psi0, dtype=np.float64).ravel()
    cdef const double[::1] bz = np.ascontiguousarray(b0, dtype=np.float64).ravel()
    cdef Py_ssize_t n = x.shape[0], i, j
    tb_arr = np.empty(n)
    tp_arr = np.empty(n)
    cdef double[::1] tb = tb_arr
    cdef double[::1] tp = tp_arr
    cdef double pp, bb, s, wk, ax, a1, a2
    cdef double sb = 0.0, sp = 0.0
    if n == 0:
        return sb, sp
    with nogil:
        for i in range(n):
            _coeff(x[i], kk[i], mu1, mu2, t, &pp, &bb, &s)
            ax = fabs(x[i])
            wk = w[i]
            for j in range(k):
                wk = wk * ax * ax
            a1 = bb * bz[i]
            a2 = x[i] * kk[i] * s * p0[i]
            tb[i] = wk * (a1 * a1 + a2 * a2)
            a1 = pp * p0[i]
            a2 = x[i] * s * bz[i]
            tp[i] = wk * kk[i] * (a1 * a1 + a2 * a2)
        sb = _pairwise(&tb[0], n)
        sp = _pairwise(&tp[0], n)
    return sb, sp
