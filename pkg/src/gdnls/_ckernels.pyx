# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pointwise kernels (fused loops).

Signatures and semantics match ``gdnls._pykernels`` exactly.
"""

import numpy as np

from libc.math cimport pow, sqrt, cos, sin, floor


# exponent classes for _fpow: integer, half-integer, general
cdef enum:
    POW_INT = 0
    POW_HALF = 1
    POW_GENERAL = 2


cdef inline int _pow_mode(double e, int* k):
    """Classify a nonnegative exponent; ``k`` receives its integer part."""
    if 0.0 <= e <= 32.0 and e == floor(e):
        k[0] = <int>e
        return POW_INT
    if 0.0 <= e <= 32.0 and 2.0 * e == floor(2.0 * e):
        k[0] = <int>floor(e)
        return POW_HALF
    k[0] = 0
    return POW_GENERAL


cdef inline double _ipow(double a, int k) nogil:
    cdef double r = 1.0
    while k:
        if k & 1:
            r *= a
        a *= a
        k >>= 1
    return r


cdef inline double _fpow(double a, double e, int mode, int k) nogil:
    if mode == POW_INT:
        return _ipow(a, k)
    if mode == POW_HALF:
        return _ipow(a, k) * sqrt(a)
    return pow(a, e)


def modulus_power(const double complex[::1] u, double power):
    cdef Py_ssize_t i, n = u.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double re, im, half = 0.5 * power
    cdef int k, mode = _pow_mode(half, &k)
    for i in range(n):
        re = u[i].real
        im = u[i].imag
        o[i] = _fpow(re * re + im * im, half, mode, k)
    return out


def gdnls_term(const double complex[::1] u, const double complex[::1] ux, double sigma):
    cdef Py_ssize_t i, n = u.shape[0]
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef double re, im, w
    cdef int k, mode = _pow_mode(sigma, &k)
    for i in range(n):
        re = u[i].real
        im = u[i].imag
        w = _fpow(re * re + im * im, sigma, mode, k)
        o[i] = -w * ux[i]
    return out


def nonlinear_terms(const double complex[::1] phi, const double complex[::1] psi, double sigma):
    cdef Py_ssize_t i, n = phi.shape[0]
    p_out = np.empty(n, dtype=np.complex128)
    q_out = np.empty(n, dtype=np.complex128)
    i_out = np.zeros(n, dtype=np.float64)
    cdef double complex[::1] p = p_out
    cdef double complex[::1] q = q_out
    cdef double[::1] g = i_out
    cdef double a2, w, zr, zi
    cdef double complex f, s, z
    cdef bint has_integral = sigma != 1.0
    cdef int k1, k2
    cdef int m1 = _pow_mode(sigma - 1.0, &k1)
    cdef int m2 = _pow_mode(sigma - 2.0, &k2)
    for i in range(n):
        f = phi[i]
        s = psi[i]
        a2 = f.real * f.real + f.imag * f.imag
        w = sigma * _fpow(a2, sigma - 1.0, m1, k1)
        p[i] = 1j * w * f * f * s.conjugate()
        q[i] = -1j * w * s * s * f.conjugate()
        if has_integral:
            z = s * f.conjugate()
            zr = z.real
            zi = z.imag
            g[i] = _fpow(a2, sigma - 2.0, m2, k2) * (2.0 * zr * zi)
    return p_out, q_out, i_out


def assemble_pq(const double complex[::1] p_local, const double complex[::1] q_local,
                const double complex[::1] phi, const double complex[::1] psi,
                const double[::1] prim, double coef):
    cdef Py_ssize_t i, n = phi.shape[0]
    p_out = np.empty(n, dtype=np.complex128)
    q_out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] p = p_out
    cdef double complex[::1] q = q_out
    cdef double c
    for i in range(n):
        c = coef * prim[i]
        p[i] = p_local[i] - c * phi[i]
        q[i] = q_local[i] - c * psi[i]
    return p_out, q_out


def phase_multiply(const double complex[::1] u, const double[::1] theta, double sign):
    cdef Py_ssize_t i, n = u.shape[0]
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef double a
    for i in range(n):
        a = sign * theta[i]
        o[i] = u[i] * (cos(a) + 1j * sin(a))
    return out
