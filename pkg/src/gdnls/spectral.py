"""Periodic Fourier discretization of the line.

The real line is replaced by the periodic interval ``[-L/2, L/2)`` sampled at
``n`` equispaced nodes.  All fields are expected to decay well inside the box;
the left-boundary check in :func:`cumulative_primitive` and the boundary-mass
monitor in the time stepper report when that assumption fails.

Conventions
-----------
Forward transform is :func:`numpy.fft.fft` (unnormalized).  With this
convention the discrete L2 norm is ``sqrt(dx/n * sum |f_hat|^2)``.  The free
Schrodinger propagator ``exp(i t d_xx)`` multiplies mode ``k`` by
``exp(-i k^2 t)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_trapezoid


class BoundaryWarning(UserWarning):
    """A field is not negligible at the left edge of the periodic box."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic mesh on ``[-L/2, L/2)`` with FFT-ordered wavenumbers."""

    n_points: int
    domain_length: float

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n < 8 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 8, got {n!r}")
        if not self.domain_length > 0 or not np.isfinite(self.domain_length):
            raise ValueError(f"domain_length must be positive, got {self.domain_length!r}")
        object.__setattr__(self, "n_points", int(n))
        object.__setattr__(self, "domain_length", float(self.domain_length))

    @property
    def dx(self) -> float:
        return self.domain_length / self.n_points

    @cached_property
    def nodes(self) -> np.ndarray:
        x = -0.5 * self.domain_length + self.dx * np.arange(self.n_points)
        x.flags.writeable = False
        return x

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        k = 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)
        k.flags.writeable = False
        return k

    @cached_property
    def k_squared(self) -> np.ndarray:
        k2 = self.wavenumbers**2
        k2.flags.writeable = False
        return k2

    @cached_property
    def ik(self) -> np.ndarray:
        # first-derivative symbol, Nyquist mode zeroed
        ik = 1j * self.wavenumbers
        ik[self.n_points // 2] = 0.0
        ik.flags.writeable = False
        return ik

    @property
    def k_max(self) -> float:
        return np.pi / self.dx

    def propagator(self, t: float) -> np.ndarray:
        """Fourier symbol ``exp(-i k^2 t)`` of the free flow over time ``t``."""
        return np.exp(-1j * t * self.k_squared)

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.n_points, dtype=complex))

    def field(self, values) -> "Field":
        return Field(self, values)


def make_grid(n_points: int, domain_length: float) -> Grid:
    """Build a :class:`Grid`; rejects non-power-of-two sizes and nonpositive lengths."""
    return Grid(n_points, domain_length)


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples of a function on a :class:`Grid`.

    ``values`` is stored as a read-only complex128 array, so a Field can be
    shared freely.  Arithmetic returns new Fields.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.complex128, copy=True)
        if v.shape != (self.grid.n_points,):
            raise ValueError(f"expected {self.grid.n_points} values, got shape {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def _other(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return Field(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Field(self.grid, self.values / scalar)

    def __neg__(self):
        return Field(self.grid, -self.values)

    def conj(self) -> "Field":
        return Field(self.grid, self.values.conj())

    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def reflect(self) -> "Field":
        """``f(x) -> f(-x)`` on the periodic grid (node ``j`` maps to ``-j mod n``)."""
        return Field(self.grid, np.roll(self.values[::-1], 1))

    def __repr__(self):
        return f"Field(n={self.grid.n_points}, L={self.grid.domain_length:g}, max|f|={np.max(np.abs(self.values)):.3e})"


@dataclass(frozen=True)
class NormTriple:
    l2: float
    h1: float
    linf: float


# --- array-level helpers (used on the hot paths) ---------------------------


def deriv_values(values: np.ndarray, grid: Grid) -> np.ndarray:
    return np.fft.ifft(grid.ik * np.fft.fft(values))


def second_deriv_values(values: np.ndarray, grid: Grid) -> np.ndarray:
    return np.fft.ifft(-grid.k_squared * np.fft.fft(values))


def primitive_values(
    f: np.ndarray, grid: Grid, method: str = "spectral", rtol: float | None = 1e-8
) -> np.ndarray:
    """Cumulative integral from the left edge; see :func:`cumulative_primitive`."""
    if rtol is not None:
        peak = np.max(np.abs(f)) if f.size else 0.0
        if abs(f[0]) > rtol * peak:
            warnings.warn(
                f"integrand at left boundary is {abs(f[0]):.2e} (peak {peak:.2e}); "
                "domain truncation too tight",
                BoundaryWarning,
                stacklevel=3,
            )
    if method == "spectral":
        n = grid.n_points
        fh = np.fft.fft(f)
        mean = fh[0] / n
        g = np.zeros_like(fh)
        nz = grid.ik != 0
        g[nz] = fh[nz] / grid.ik[nz]
        p = np.fft.ifft(g)
        out = mean * (grid.nodes - grid.nodes[0]) + (p - p[0])
        if np.isrealobj(f):
            out = out.real
        return out
    if method == "trapezoid":
        return cumulative_trapezoid(f, dx=grid.dx, initial=0.0)
    raise ValueError(f"unknown primitive method {method!r}")


def norm_values(values: np.ndarray, grid: Grid) -> NormTriple:
    fh = np.fft.fft(values)
    w = grid.dx / grid.n_points
    p = np.abs(fh) ** 2
    l2 = float(np.sqrt(w * np.sum(p)))
    h1 = float(np.sqrt(w * np.sum((1.0 + grid.k_squared) * p)))
    linf = float(np.max(np.abs(values))) if values.size else 0.0
    return NormTriple(l2, h1, linf)


def h1_values(values: np.ndarray, grid: Grid) -> float:
    fh = np.fft.fft(values)
    return float(np.sqrt(grid.dx / grid.n_points * np.sum((1.0 + grid.k_squared) * np.abs(fh) ** 2)))


def l2_values(values: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(grid.dx * np.sum(np.abs(values) ** 2)))


def integrate(values: np.ndarray, grid: Grid):
    """Trapezoidal rule on the periodic grid (a plain sum times ``dx``)."""
    return np.sum(values) * grid.dx


# --- Field-level operations -----------------------------------------------


def spectral_derivative(f: Field) -> Field:
    """Fourier-collocation derivative ``i k f_hat`` (Nyquist mode dropped)."""
    return Field(f.grid, deriv_values(f.values, f.grid))


def free_propagate(f: Field, t: float) -> Field:
    """Apply the free Schrodinger flow ``exp(i t d_xx)``; ``t`` may be negative."""
    if t == 0:
        return f
    return Field(f.grid, np.fft.ifft(f.grid.propagator(t) * np.fft.fft(f.values)))


def cumulative_primitive(f: Field, method: str = "spectral", rtol: float | None = 1e-8) -> Field:
    """Antiderivative anchored at the left edge, ``F(x_j) = int_{-L/2}^{x_j} f``.

    ``method="spectral"`` splits ``f`` into its mean (integrated exactly as a
    linear ramp) and a zero-mean periodic part (integrated mode by mode), so
    it is spectrally accurate for fields that decay inside the box.
    ``method="trapezoid"`` is the second-order cumulative trapezoid rule.

    A :class:`BoundaryWarning` is emitted when ``|f(-L/2)|`` exceeds
    ``rtol * max|f|``; pass ``rtol=None`` to skip the check.
    """
    return Field(f.grid, primitive_values(f.values, f.grid, method=method, rtol=rtol))


def dealias_values(values: np.ndarray, grid: Grid, keep_fraction: float) -> np.ndarray:
    if keep_fraction >= 1.0:
        return values
    fh = np.fft.fft(values)
    fh[np.abs(grid.wavenumbers) > keep_fraction * grid.k_max] = 0.0
    return np.fft.ifft(fh)


def dealias(f: Field, keep_fraction: float = 0.5) -> Field:
    """Zero every mode with ``|k| > keep_fraction * k_max``; idempotent."""
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction must lie in (0, 1], got {keep_fraction}")
    return Field(f.grid, dealias_values(f.values, f.grid, keep_fraction))


def norms(f: Field) -> NormTriple:
    """L2 (Parseval), H1 (multiplier ``sqrt(1+k^2)``) and sup norms."""
    return norm_values(f.values, f.grid)
