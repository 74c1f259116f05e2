"""The gDNLS equation, its invariants and the c = 0 variational quantities.

Equation::

    i u_t + u_xx + i |u|^(2 sigma) u_x = 0      =>   u_t = i u_xx - |u|^(2 sigma) u_x

Invariants (mass, energy, momentum) and the functionals ``S``, ``K`` are
evaluated with spectral derivatives and the periodic trapezoid rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .spectral import Field, Grid, dealias_values, deriv_values, integrate, make_grid


@dataclass(frozen=True)
class ModelParams:
    """Equation parameters.

    ``c`` only enters the functionals; every solver path assumes ``c == 0``.
    ``boundary_tolerance`` is the largest admissible fraction of the mass in
    the outer 5% strips of the box before a run is marked tainted.
    """

    sigma: float
    omega: float = 1.0
    c: float = 0.0
    boundary_tolerance: float = 1e-6

    def __post_init__(self):
        if not self.sigma >= 1:
            raise ValueError(f"sigma must be >= 1, got {self.sigma}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not abs(self.c) < 2.0 * np.sqrt(self.omega):
            raise ValueError(f"need -2 sqrt(omega) < c < 2 sqrt(omega), got c={self.c}, omega={self.omega}")
        if self.boundary_tolerance < 0:
            raise ValueError("boundary_tolerance must be nonnegative")
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "c", float(self.c))


def _require_c0(p: ModelParams):
    if p.c != 0.0:
        raise ValueError("only the c = 0 ground state and threshold are available")


def gdnls_nonlinear_values(u: np.ndarray, grid: Grid, sigma: float, keep_fraction: float = 0.5) -> np.ndarray:
    """``-|u|^(2 sigma) u_x`` on raw arrays, dealiased."""
    ux = deriv_values(u, grid)
    return dealias_values(kernels.gdnls_term(u, ux, sigma), grid, keep_fraction)


def rhs_gdnls(u: Field, p: ModelParams, keep_fraction: float = 0.5, nonlinear: bool = True) -> Field:
    """Time derivative ``u_t = i u_xx - |u|^(2 sigma) u_x``."""
    g = u.grid
    out = np.fft.ifft(-1j * g.k_squared * np.fft.fft(u.values))
    if nonlinear:
        out = out + gdnls_nonlinear_values(u.values, g, p.sigma, keep_fraction)
    return Field(g, out)


# --- invariants -----------------------------------------------------------


def mass(u: Field) -> float:
    """``M(u) = ||u||_2^2``."""
    return float(integrate(np.abs(u.values) ** 2, u.grid))


def _nonlinear_energy_term(u: np.ndarray, ux: np.ndarray, grid: Grid, sigma: float) -> float:
    # Re int i |u|^(2 sigma) conj(u) u_x
    return float(np.real(integrate(1j * kernels.modulus_power(u, 2 * sigma) * np.conj(u) * ux, grid)))


def energy(u: Field, p: ModelParams) -> float:
    """``E(u) = 1/2 ||u_x||^2 - 1/(2 sigma + 2) Re int i |u|^(2 sigma) conj(u) u_x``."""
    ux = deriv_values(u.values, u.grid)
    kinetic = 0.5 * float(integrate(np.abs(ux) ** 2, u.grid))
    return kinetic - _nonlinear_energy_term(u.values, ux, u.grid, p.sigma) / (2 * p.sigma + 2)


def momentum(u: Field) -> float:
    """``P(u) = Re int i u_x conj(u)``."""
    ux = deriv_values(u.values, u.grid)
    return float(np.real(integrate(1j * ux * np.conj(u.values), u.grid)))


def action_S(u: Field, p: ModelParams) -> float:
    """``S = E + omega/2 M + c/2 P``."""
    return energy(u, p) + 0.5 * p.omega * mass(u) + 0.5 * p.c * momentum(u)


def nehari_K(u: Field, p: ModelParams) -> float:
    """``K = ||u_x||^2 + omega ||u||^2 + c P(u) - Re int i |u|^(2 sigma) conj(u) u_x``."""
    ux = deriv_values(u.values, u.grid)
    quad = float(integrate(np.abs(ux) ** 2, u.grid)) + p.omega * mass(u)
    return quad + p.c * momentum(u) - _nonlinear_energy_term(u.values, ux, u.grid, p.sigma)


# --- ground state ---------------------------------------------------------


def ground_state_modulus(x: np.ndarray, p: ModelParams) -> np.ndarray:
    """``Phi(x) = [2 sqrt(omega) (sigma+1) sech(2 sqrt(omega) sigma x)]^(1/(2 sigma))``."""
    b = 2.0 * np.sqrt(p.omega) * p.sigma
    return (2.0 * np.sqrt(p.omega) * (p.sigma + 1) / np.cosh(b * x)) ** (1.0 / (2 * p.sigma))


def ground_state_phase(x: np.ndarray, p: ModelParams) -> np.ndarray:
    """Phase ``-1/(2 sigma + 2) int_0^x Phi^(2 sigma)`` of the c = 0 solitary wave.

    The integral is elementary: ``(sigma+1)/sigma * gd(2 sqrt(omega) sigma x)``
    with ``gd`` the Gudermannian.
    """
    b = 2.0 * np.sqrt(p.omega) * p.sigma
    gd = 2.0 * np.arctan(np.tanh(0.5 * b * x))
    return -gd / (2.0 * p.sigma)


def ground_state_profile(grid: Grid, p: ModelParams, with_phase: bool = True) -> Field:
    """The c = 0 ground state sampled on ``grid``.

    The modulus is the sech power above.  By default the gauge phase is
    included (anchored so that the profile is real at ``x = 0``); only then
    does the profile sit on the Nehari set ``K = 0``.  ``with_phase=False``
    returns the bare real modulus.
    """
    _require_c0(p)
    x = grid.nodes
    phi = ground_state_modulus(x, p).astype(complex)
    if with_phase:
        phi = phi * np.exp(1j * ground_state_phase(x, p))
    return Field(grid, phi)


def mu_omega0(p: ModelParams, n_points: int = 8192) -> float:
    """Ground-state level ``mu(omega, 0) = sigma/(2 sigma+2) int |phi'|^2 + omega |phi|^2``.

    Uses the analytic derivative of the profile (``|phi'|^2 = Phi'^2 +
    Phi^2 chi'^2`` with ``chi' = -Phi^(2 sigma)/(2 sigma + 2)``) and the
    trapezoid rule on a box wide enough for the tails to be below 1e-16.
    """
    _require_c0(p)
    half_width = 40.0 / np.sqrt(p.omega)
    grid = make_grid(n_points, 2 * half_width)
    x = grid.nodes
    b = 2.0 * np.sqrt(p.omega) * p.sigma
    phi = ground_state_modulus(x, p)
    dphi = -(b / (2 * p.sigma)) * np.tanh(b * x) * phi
    dchi = -(phi ** (2 * p.sigma)) / (2 * p.sigma + 2)
    integrand = dphi**2 + (phi * dchi) ** 2 + p.omega * phi**2
    return float(p.sigma / (2 * p.sigma + 2) * integrate(integrand, grid))


class GlobalCheck(NamedTuple):
    holds: bool
    margin: float
    lhs: float
    bound: float


def global_predicate(u_plus: Field, p: ModelParams) -> GlobalCheck:
    """Test ``||u+_x||^2 + omega ||u+||^2 < 2 mu(omega, 0)``; margin is bound minus lhs."""
    _require_c0(p)
    ux = deriv_values(u_plus.values, u_plus.grid)
    lhs = float(integrate(np.abs(ux) ** 2, u_plus.grid)) + p.omega * mass(u_plus)
    bound = 2.0 * mu_omega0(p)
    return GlobalCheck(lhs < bound, bound - lhs, lhs, bound)
