"""NumPy reference implementation of the pointwise kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
The compiled module fuses the loops; this one is the portable fallback and
the oracle the compiled kernels are tested against.
"""

import numpy as np


def modulus_power(u, power):
    """Return ``|u|**power`` as a real array."""
    a2 = u.real * u.real + u.imag * u.imag
    return a2 ** (0.5 * power)


def gdnls_term(u, ux, sigma):
    """Nonlinear part of the gDNLS time derivative, ``-|u|^(2 sigma) u_x``."""
    return -(modulus_power(u, 2.0 * sigma) * ux)


def nonlinear_terms(phi, psi, sigma):
    """Local pieces of the gauged nonlinearity.

    Returns ``(p_local, q_local, integrand)`` with

    - ``p_local = i sigma |phi|^(2(sigma-1)) phi^2 conj(psi)``
    - ``q_local = -i sigma |phi|^(2(sigma-1)) psi^2 conj(phi)``
    - ``integrand = |phi|^(2(sigma-2)) Im(psi^2 conj(phi)^2)``

    For ``sigma == 1`` the integrand is returned as zeros: its coefficient
    ``sigma (sigma - 1)`` vanishes and the power would be negative.
    """
    a2 = phi.real * phi.real + phi.imag * phi.imag
    w = sigma * a2 ** (sigma - 1.0)
    p_local = 1j * w * phi * phi * np.conj(psi)
    q_local = -1j * w * psi * psi * np.conj(phi)
    if sigma == 1.0:
        integrand = np.zeros(phi.shape)
    else:
        z = psi * np.conj(phi)
        integrand = a2 ** (sigma - 2.0) * (z * z).imag
    return p_local, q_local, integrand


def assemble_pq(p_local, q_local, phi, psi, prim, coef):
    """``P = p_local - coef*phi*prim``, ``Q = q_local - coef*psi*prim``."""
    return p_local - coef * phi * prim, q_local - coef * psi * prim


def phase_multiply(u, theta, sign):
    """Return ``exp(i*sign*theta) * u`` for a real phase array ``theta``."""
    return u * np.exp((1j * sign) * theta)
