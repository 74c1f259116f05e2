"""Gauge transforms and the derivative-free gauged system.

For a field ``u`` let ``theta(x) = 1/2 int_{-inf}^x |u|^(2 sigma)``.  Then

    G1(u) = exp(i theta) u,        G2(u) = exp(i theta) u_x,

and ``(phi, psi) = (G1 u, G2 u)`` satisfies ``psi = phi_x - i/2 |phi|^(2 sigma) phi``.
When ``u`` solves gDNLS the pair solves ``L eta = F(eta)`` with
``L = i d_t + d_xx`` and ``F = (P, Q)`` computed by :func:`nonlinearity_F`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import ModelParams
from .spectral import (
    Field,
    Grid,
    dealias_values,
    deriv_values,
    h1_values,
    l2_values,
    primitive_values,
)


@dataclass(frozen=True, eq=False)
class StatePair:
    """Two fields on a common grid, e.g. ``eta = (phi, psi)``."""

    phi: Field
    psi: Field

    def __post_init__(self):
        if self.phi.grid != self.psi.grid:
            raise ValueError("both components must share one grid")

    @property
    def grid(self) -> Grid:
        return self.phi.grid

    @classmethod
    def zeros(cls, grid: Grid) -> "StatePair":
        return cls(grid.zeros(), grid.zeros())

    @classmethod
    def from_array(cls, grid: Grid, arr: np.ndarray) -> "StatePair":
        return cls(Field(grid, arr[0]), Field(grid, arr[1]))

    def stack(self) -> np.ndarray:
        return np.stack([self.phi.values, self.psi.values])

    def __add__(self, other: "StatePair") -> "StatePair":
        return StatePair(self.phi + other.phi, self.psi + other.psi)

    def __sub__(self, other: "StatePair") -> "StatePair":
        return StatePair(self.phi - other.phi, self.psi - other.psi)

    def __mul__(self, scalar) -> "StatePair":
        return StatePair(self.phi * scalar, self.psi * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "StatePair":
        return StatePair(-self.phi, -self.psi)

    def h1(self) -> float:
        """Product-space norm ``||phi||_H1 + ||psi||_H1``."""
        g = self.grid
        return h1_values(self.phi.values, g) + h1_values(self.psi.values, g)

    def l2(self) -> float:
        g = self.grid
        return l2_values(self.phi.values, g) + l2_values(self.psi.values, g)

    def is_finite(self) -> bool:
        return self.phi.is_finite() and self.psi.is_finite()


# --- gauge transforms -----------------------------------------------------


def gauge_phase_values(u: np.ndarray, grid: Grid, sigma: float, method: str = "spectral") -> np.ndarray:
    """``theta = 1/2 int_{-L/2}^x |u|^(2 sigma)`` (real)."""
    return 0.5 * primitive_values(kernels.modulus_power(u, 2 * sigma), grid, method=method)


def gauge_g1(u: Field, p: ModelParams, method: str = "spectral") -> Field:
    theta = gauge_phase_values(u.values, u.grid, p.sigma, method)
    return Field(u.grid, kernels.phase_multiply(u.values, theta, 1.0))


def gauge_g2(u: Field, p: ModelParams, method: str = "spectral") -> Field:
    theta = gauge_phase_values(u.values, u.grid, p.sigma, method)
    return Field(u.grid, kernels.phase_multiply(deriv_values(u.values, u.grid), theta, 1.0))


def gauge_pair(u: Field, p: ModelParams, method: str = "spectral") -> StatePair:
    """``(G1 u, G2 u)`` sharing one phase evaluation."""
    theta = gauge_phase_values(u.values, u.grid, p.sigma, method)
    g = u.grid
    return StatePair(
        Field(g, kernels.phase_multiply(u.values, theta, 1.0)),
        Field(g, kernels.phase_multiply(deriv_values(u.values, g), theta, 1.0)),
    )


def gauge_inverse(v: Field, p: ModelParams, method: str = "spectral") -> Field:
    """Undo :func:`gauge_g1`.

    ``|G1 u| = |u|``, so the phase can be rebuilt from ``|v|`` alone.
    """
    theta = gauge_phase_values(v.values, v.grid, p.sigma, method)
    return Field(v.grid, kernels.phase_multiply(v.values, theta, -1.0))


def gauge_defect(u: Field, p: ModelParams, method: str = "spectral") -> Field:
    """``G1(u) - u`` evaluated as ``u * expm1(i theta)`` (no cancellation for small data)."""
    theta = gauge_phase_values(u.values, u.grid, p.sigma, method)
    return Field(u.grid, u.values * np.expm1(1j * theta))


# --- gauged nonlinearity --------------------------------------------------


def check_gauged_sigma(sigma: float):
    if 1.0 < sigma < 2.0:
        raise ValueError(
            f"the gauged system needs sigma == 1 or sigma >= 2 (|phi|^(2(sigma-2)) is singular), got {sigma}"
        )


def gauged_nonlinear_values(
    phi: np.ndarray, psi: np.ndarray, grid: Grid, sigma: float, keep_fraction: float = 0.5
) -> tuple[np.ndarray, np.ndarray]:
    """``(P, Q)`` on raw arrays; see :func:`nonlinearity_F`."""
    p_local, q_local, integrand = kernels.nonlinear_terms(phi, psi, sigma)
    coef = sigma * (sigma - 1.0)
    if coef == 0.0:
        P, Q = p_local, q_local
    else:
        prim = primitive_values(integrand, grid, rtol=None)
        P, Q = kernels.assemble_pq(p_local, q_local, phi, psi, prim, coef)
    return dealias_values(P, grid, keep_fraction), dealias_values(Q, grid, keep_fraction)


def nonlinearity_F(eta: StatePair, p: ModelParams, keep_fraction: float = 0.5) -> StatePair:
    """Right-hand side ``F(eta) = (P, Q)`` of the gauged system.

    P = i s |phi|^(2(s-1)) phi^2 conj(psi) - s(s-1) phi int_{-inf}^x |phi|^(2(s-2)) Im(psi^2 conj(phi)^2)
    Q = -i s |phi|^(2(s-1)) psi^2 conj(phi) - s(s-1) psi int_{-inf}^x |phi|^(2(s-2)) Im(psi^2 conj(phi)^2)

    ``keep_fraction=1`` disables dealiasing (needed for pointwise estimates).
    """
    check_gauged_sigma(p.sigma)
    g = eta.grid
    P, Q = gauged_nonlinear_values(eta.phi.values, eta.psi.values, g, p.sigma, keep_fraction)
    return StatePair(Field(g, P), Field(g, Q))


def relation_defect_values(
    phi_t: np.ndarray, psi_t: np.ndarray, h: np.ndarray | None, grid: Grid, sigma: float
) -> np.ndarray:
    """``psi~ - [phi~_x - i/2 (|phi~+h|^(2s)(phi~+h) - |h|^(2s) h)]`` pointwise.

    The bracket is formed by :func:`power_difference`, so a tiny ``phi~`` on
    top of a large ``h`` does not cancel catastrophically.
    """
    if h is None:
        nl = kernels.modulus_power(phi_t, 2 * sigma) * phi_t
    else:
        nl = power_difference(phi_t, h, sigma)
    return psi_t - (deriv_values(phi_t, grid) - 0.5j * nl)


def modulus_power_difference(d: np.ndarray, h: np.ndarray, sigma: float) -> np.ndarray:
    """``|h+d|^(2s) - |h|^(2s)`` computed from ``|h+d|^2 - |h|^2`` (no cancellation)."""
    a = np.abs(h) ** 2
    delta = 2.0 * np.real(np.conj(h) * d) + np.abs(d) ** 2  # |h+d|^2 - |h|^2
    pos = a > 0
    safe_a = np.where(pos, a, 1.0)
    rel = np.maximum(delta / safe_a, -1.0)
    with np.errstate(divide="ignore"):
        small = safe_a**sigma * np.expm1(sigma * np.log1p(rel))
    return np.where(pos, small, np.abs(d) ** (2 * sigma))


def power_difference(d: np.ndarray, h: np.ndarray, sigma: float) -> np.ndarray:
    """``|h+d|^(2s)(h+d) - |h|^(2s) h`` without cancellation when ``|d| << |h|``."""
    return modulus_power_difference(d, h, sigma) * (h + d) + np.abs(h) ** (2 * sigma) * d


def relation_residual(eta: StatePair, h: Field | None, p: ModelParams) -> float:
    """L2 norm of the compatibility defect between ``psi~`` and ``phi~``.

    With ``h=None`` (or zero) this is ``||psi - phi_x + i/2 |phi|^(2 s) phi||``.
    """
    hv = None if h is None else h.values
    r = relation_defect_values(eta.phi.values, eta.psi.values, hv, eta.grid, p.sigma)
    return l2_values(r, eta.grid)


def compatible_partner(phi: Field, p: ModelParams, h: Field | None = None) -> Field:
    """The ``psi~`` that makes :func:`relation_residual` vanish for given ``phi~``."""
    zero = np.zeros_like(phi.values)
    hv = None if h is None else h.values
    return Field(phi.grid, -relation_defect_values(phi.values, zero, hv, phi.grid, p.sigma))


# --- difference estimate --------------------------------------------------


def lipschitz_majorant(eta1: StatePair, eta2: StatePair, sigma: float) -> np.ndarray:
    """Pointwise right-hand side of the difference estimate with unit constant.

    |d|(|e1|^(2s) + |e2|^(2s) + int |e1|^(2s)) + |e2| int |d|(|e1|^(2s-1) + |e2|^(2s-1)),
    where ``|(a, b)| = |a| + |b|`` and ``d = e1 - e2``.
    """
    g = eta1.grid
    a1 = np.abs(eta1.phi.values) + np.abs(eta1.psi.values)
    a2 = np.abs(eta2.phi.values) + np.abs(eta2.psi.values)
    ad = np.abs(eta1.phi.values - eta2.phi.values) + np.abs(eta1.psi.values - eta2.psi.values)
    s2 = 2 * sigma
    int1 = primitive_values(a1**s2, g, method="trapezoid", rtol=None)
    int2 = primitive_values(ad * (a1 ** (s2 - 1) + a2 ** (s2 - 1)), g, method="trapezoid", rtol=None)
    return ad * (a1**s2 + a2**s2 + int1) + a2 * int2


def lipschitz_ratio(eta1: StatePair, eta2: StatePair, p: ModelParams, significance: float = 1e-8) -> float:
    """Max over nodes of ``|F(eta1) - F(eta2)| / majorant``.

    Nodes where the majorant is below ``significance * max(majorant)`` are
    skipped: there ``F(eta1) - F(eta2)`` is dominated by rounding in the
    nonlocal term (its absolute error is set by the largest values of ``F``)
    and the ratio carries no information.
    """
    if p.sigma <= 2:
        raise ValueError("the difference estimate is stated for sigma > 2")
    d = eta1 - eta2
    if not (np.any(d.phi.values) or np.any(d.psi.values)):
        raise ValueError("eta1 == eta2: ratio is 0/0")
    F1 = nonlinearity_F(eta1, p, keep_fraction=1.0)
    F2 = nonlinearity_F(eta2, p, keep_fraction=1.0)
    lhs = np.abs(F1.phi.values - F2.phi.values) + np.abs(F1.psi.values - F2.psi.values)
    rhs = lipschitz_majorant(eta1, eta2, p.sigma)
    mask = rhs > significance * np.max(rhs)
    return float(np.max(lhs[mask] / rhs[mask]))


# --- calibration of the difference estimate -------------------------------

# Largest ratio of lipschitz_ratio over calibrate_lipschitz() with its
# defaults (200 pairs, seed 20240607, sigma = 3, n = 512, L = 40) was 1.359;
# frozen with a 3% margin.  A recalibration should land within 10% of the
# reference maximum.
LIPSCHITZ_C_CAL = 1.40
LIPSCHITZ_CAL_REFERENCE = 1.3588218171938078


def _random_component(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    x = grid.nodes
    out = np.zeros(grid.n_points, complex)
    for _ in range(rng.integers(1, 4)):
        amp = rng.standard_normal() + 1j * rng.standard_normal()
        c = rng.uniform(-5.0, 5.0)
        w = rng.uniform(0.7, 2.5)
        k = rng.uniform(-1.5, 1.5)
        out += amp * np.exp(-(((x - c) / w) ** 2) + 1j * k * x)
    return out


def random_smooth_pair(grid: Grid, rng: np.random.Generator, norm: float) -> StatePair:
    """Sum of a few modulated Gaussians per component, scaled to pair H1 norm ``norm``."""
    eta = StatePair(Field(grid, _random_component(grid, rng)), Field(grid, _random_component(grid, rng)))
    return eta * (norm / eta.h1())


def random_pairs(grid: Grid, n_pairs: int, seed: int, max_norm: float = 1.0) -> list:
    """Seeded ``(eta1, eta2)`` with both norms in ``(0, max_norm]``.

    Even-indexed pairs are independent draws; odd-indexed ones are a draw
    and a perturbation of relative size ``10^U(-4, -1)``, which probes the
    estimate where the difference is small.
    """
    rng = np.random.default_rng(seed)
    out = []
    for j in range(n_pairs):
        a = random_smooth_pair(grid, rng, rng.uniform(0.05, 1.0) * max_norm)
        if j % 2 == 0:
            b = random_smooth_pair(grid, rng, rng.uniform(0.05, 1.0) * max_norm)
        else:
            d = random_smooth_pair(grid, rng, 1.0)
            b = a + d * (a.h1() * 10.0 ** rng.uniform(-4.0, -1.0))
            if b.h1() > max_norm:
                b = b * (max_norm / b.h1())
        out.append((a, b))
    return out


def calibrate_lipschitz(
    n_pairs: int = 200, seed: int = 20240607, sigma: float = 3.0, n_points: int = 512, domain_length: float = 40.0
) -> np.ndarray:
    """Ratios of :func:`lipschitz_ratio` over :func:`random_pairs`."""
    g = Grid(n_points, domain_length)
    p = ModelParams(sigma)
    return np.asarray([lipschitz_ratio(a, b, p) for a, b in random_pairs(g, n_pairs, seed)])
