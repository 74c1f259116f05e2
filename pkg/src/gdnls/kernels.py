"""Backend selection for the pointwise kernels.

The compiled extension ``gdnls._ckernels`` is used when it was built and
imports cleanly; otherwise the NumPy implementation is used.  Setting
``GDNLS_KERNELS=python`` forces the fallback (handy for benchmarks and for
checking that both paths agree).
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("GDNLS_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels


def _c(a):
    return np.ascontiguousarray(a, dtype=np.complex128)


def _r(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def modulus_power(u, power):
    return _impl.modulus_power(_c(u), float(power))


def gdnls_term(u, ux, sigma):
    return _impl.gdnls_term(_c(u), _c(ux), float(sigma))


def nonlinear_terms(phi, psi, sigma):
    return _impl.nonlinear_terms(_c(phi), _c(psi), float(sigma))


def assemble_pq(p_local, q_local, phi, psi, prim, coef):
    return _impl.assemble_pq(_c(p_local), _c(q_local), _c(phi), _c(psi), _r(prim), float(coef))


def phase_multiply(u, theta, sign):
    return _impl.phase_multiply(_c(u), _r(theta), float(sign))


def use_backend(name):
    """Switch backend at runtime (``"cython"`` or ``"python"``); returns the previous name."""
    global _impl, BACKEND
    previous = BACKEND
    if name == "python":
        _impl, BACKEND = _pykernels, "python"
    elif name == "cython":
        from . import _ckernels

        _impl, BACKEND = _ckernels, "cython"
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    return previous
