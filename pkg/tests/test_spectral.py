import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import erf

from gdnls.spectral import (
    BoundaryWarning,
    Field,
    Grid,
    cumulative_primitive,
    dealias,
    free_propagate,
    make_grid,
    norms,
    spectral_derivative,
)


def gaussian_free_solution(x, t):
    # exact solution of i u_t + u_xx = 0 with u(0) = exp(-x^2)
    a = 1.0 + 4j * t
    return a**-0.5 * np.exp(-(x**2) / a)


def test_grid_rejects_bad_sizes():
    with pytest.raises(ValueError):
        Grid(100, 10.0)
    with pytest.raises(ValueError):
        Grid(4, 10.0)
    with pytest.raises(ValueError):
        make_grid(64, -1.0)


def test_grid_layout():
    g = Grid(64, 2 * np.pi)
    assert g.nodes[0] == pytest.approx(-np.pi)
    assert g.dx == pytest.approx(2 * np.pi / 64)
    assert g.k_max == pytest.approx(32.0)
    assert g.ik[32] == 0  # Nyquist dropped
    assert np.all(np.diff(g.nodes) > 0)


def test_field_is_read_only_and_checks_shape(grid):
    f = grid.field(np.ones(grid.n_points))
    with pytest.raises(ValueError):
        f.values[0] = 2.0
    with pytest.raises(ValueError):
        Field(grid, np.ones(3))
    with pytest.raises(ValueError):
        f + Grid(128, 40.0).zeros()


def test_reflect_is_x_to_minus_x(grid):
    x = grid.nodes
    f = grid.field(np.exp(-((x - 1.0) ** 2)))
    assert np.allclose(f.reflect().values, np.exp(-((-x - 1.0) ** 2)), atol=1e-14)
    assert np.array_equal(f.reflect().reflect().values, f.values)


def test_plane_wave_derivative_exact():
    g = Grid(128, 20.0)
    for m in (1, 7, 31):
        k = 2 * np.pi * m / g.domain_length
        f = g.field(np.exp(1j * k * g.nodes))
        d = spectral_derivative(f).values
        assert np.max(np.abs(d - 1j * k * f.values)) < 1e-12 * max(1.0, k)


def test_gaussian_derivative_accuracy():
    g = Grid(512, 40.0)
    x = g.nodes
    d = spectral_derivative(g.field(np.exp(-(x**2)))).values
    exact = -2 * x * np.exp(-(x**2))
    assert np.linalg.norm(d - exact) / np.linalg.norm(exact) < 1e-12


def test_free_propagation_matches_exact_gaussian():
    g = Grid(512, 80.0)
    u0 = g.field(np.exp(-g.nodes**2))
    for t in (0.3, 1.0, -0.7):
        u = free_propagate(u0, t).values
        assert np.max(np.abs(u - gaussian_free_solution(g.nodes, t))) < 1e-12


def test_free_propagation_plane_wave_phase():
    g = Grid(64, 2 * np.pi)
    f = g.field(np.exp(3j * g.nodes))
    out = free_propagate(f, 0.4).values
    assert np.max(np.abs(out - np.exp(-9j * 0.4) * f.values)) < 1e-14


def test_primitive_against_erf():
    g = Grid(512, 40.0)
    x = g.nodes
    f = g.field(np.exp(-(x**2)))
    exact = 0.5 * np.sqrt(np.pi) * (erf(x) + 1.0)
    spec = cumulative_primitive(f).values
    trap = cumulative_primitive(f, method="trapezoid").values
    assert np.max(np.abs(spec - exact)) < 1e-13
    assert np.max(np.abs(trap - exact)) < 1e-3  # O(dx^2) at interior nodes
    assert abs(trap[-1] - exact[-1]) < 1e-12  # full-period sum is spectral


def test_primitive_trapezoid_second_order_on_unresolved_kink():
    # |x| e^{-x^2}: kink at 0 makes the trapezoid rule visibly second order
    errs = []
    for n in (256, 512, 1024):
        g = Grid(n, 20.0)
        x = g.nodes
        F = cumulative_primitive(g.field(np.abs(x) * np.exp(-(x**2))), method="trapezoid").values
        exact = np.where(x < 0, 0.5 * np.exp(-(x**2)), 1.0 - 0.5 * np.exp(-(x**2)))
        errs.append(np.max(np.abs(F - exact)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


def test_primitive_unknown_method(grid):
    with pytest.raises(ValueError):
        cumulative_primitive(grid.zeros(), method="simpson")


def test_boundary_warning():
    g = Grid(128, 4.0)
    with pytest.warns(BoundaryWarning):
        cumulative_primitive(g.field(np.exp(-(g.nodes**2))))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        cumulative_primitive(g.field(np.exp(-(g.nodes**2))), rtol=None)


def test_gaussian_norms_closed_form():
    g = Grid(1024, 40.0)
    n = norms(g.field(np.exp(-g.nodes**2)))
    m2 = np.sqrt(np.pi / 2)  # ||e^{-x^2}||^2 = ||(e^{-x^2})'||^2
    assert n.l2 == pytest.approx(np.sqrt(m2), rel=1e-13)
    assert n.h1 == pytest.approx(np.sqrt(2 * m2), rel=1e-13)
    assert n.linf == pytest.approx(1.0, abs=1e-12)


def test_dealias_rejects_bad_fraction(grid):
    with pytest.raises(ValueError):
        dealias(grid.zeros(), 0.0)
    with pytest.raises(ValueError):
        dealias(grid.zeros(), 1.5)


# --- properties -----------------------------------------------------------

coeffs = st.lists(
    st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=3, max_size=3
)


def _smooth(g, c):
    x = g.nodes
    return c[0] * np.exp(-(x**2)) + c[1] * np.exp(-((x - 2) ** 2) / 2) + c[2] * x * np.exp(-(x**2) / 3)


@given(coeffs, st.floats(-3, 3), st.floats(-3, 3))
def test_free_flow_is_unitary_group(c, s, t):
    g = Grid(128, 40.0)
    f = g.field(_smooth(g, c))
    a = free_propagate(free_propagate(f, s), t).values
    b = free_propagate(f, s + t).values
    scale = 1.0 + np.max(np.abs(f.values))
    assert np.max(np.abs(a - b)) < 1e-12 * scale
    assert norms(free_propagate(f, t)).l2 == pytest.approx(norms(f).l2, rel=1e-12, abs=1e-300)


@given(coeffs, st.floats(0.05, 1.0))
def test_dealias_idempotent_and_norm_reducing(c, keep):
    g = Grid(128, 40.0)
    f = g.field(_smooth(g, c))
    once = dealias(f, keep)
    twice = dealias(once, keep)
    assert np.max(np.abs(once.values - twice.values)) < 1e-14 * (1 + np.max(np.abs(f.values)))
    assert norms(once).l2 <= norms(f).l2 * (1 + 1e-12) + 1e-300


@given(coeffs, coeffs)
def test_derivative_is_linear(a, b):
    g = Grid(128, 40.0)
    fa, fb = g.field(_smooth(g, a)), g.field(_smooth(g, b))
    lhs = spectral_derivative(fa + fb).values
    rhs = spectral_derivative(fa).values + spectral_derivative(fb).values
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * (1 + np.max(np.abs(lhs)))


@given(coeffs)
def test_primitive_inverts_derivative(c):
    g = Grid(256, 40.0)
    f = g.field(_smooth(g, c))
    back = cumulative_primitive(spectral_derivative(f), rtol=None).values
    assert np.max(np.abs(back - (f.values - f.values[0]))) < 1e-11 * (1 + np.max(np.abs(f.values)))
