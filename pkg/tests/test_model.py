import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from gdnls.model import (
    ModelParams,
    action_S,
    energy,
    global_predicate,
    ground_state_modulus,
    ground_state_profile,
    mass,
    momentum,
    mu_omega0,
    nehari_K,
    rhs_gdnls,
)
from gdnls.spectral import Grid


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(0.5)
    with pytest.raises(ValueError):
        ModelParams(2.0, omega=0.0)
    with pytest.raises(ValueError):
        ModelParams(2.0, omega=1.0, c=2.5)
    p = ModelParams(3)
    assert isinstance(p.sigma, float) and p.omega == 1.0


def test_rhs_matches_closed_form():
    g = Grid(512, 40.0)
    x = g.nodes
    s = 2.0
    u = 0.7 * np.exp(-(x**2))
    ux = -2 * x * u
    uxx = (4 * x**2 - 2) * u
    expected = 1j * uxx - np.abs(u) ** (2 * s) * ux
    got = rhs_gdnls(g.field(u), ModelParams(s), keep_fraction=1.0).values
    assert np.max(np.abs(got - expected)) < 1e-11
    lin = rhs_gdnls(g.field(u), ModelParams(s), nonlinear=False).values
    assert np.max(np.abs(lin - 1j * uxx)) < 1e-11


def test_invariants_of_modulated_gaussian():
    g = Grid(1024, 40.0)
    x = g.nodes
    A, v = 0.8, 1.3
    u = g.field(A * np.exp(-(x**2)) * np.exp(1j * v * x))
    M = A**2 * np.sqrt(np.pi / 2)
    assert mass(u) == pytest.approx(M, rel=1e-13)
    assert momentum(u) == pytest.approx(-v * M, rel=1e-12)


def test_energy_of_real_data_is_kinetic():
    g = Grid(1024, 40.0)
    A = 0.6
    u = g.field(A * np.exp(-(g.nodes**2)))
    # the nonlinear term Re int i |u|^{2s} u u_x vanishes for real u
    for s in (1.0, 2.0, 3.0):
        assert energy(u, ModelParams(s)) == pytest.approx(0.5 * A**2 * np.sqrt(np.pi / 2), rel=1e-12)


def _mu_quad(sigma, omega):
    b = 2 * np.sqrt(omega) * sigma

    def integrand(x):
        phi = (2 * np.sqrt(omega) * (sigma + 1) / np.cosh(b * x)) ** (1 / (2 * sigma))
        dphi = -(b / (2 * sigma)) * np.tanh(b * x) * phi
        dchi = -(phi ** (2 * sigma)) / (2 * sigma + 2)
        return dphi**2 + (phi * dchi) ** 2 + omega * phi**2

    half = 60.0 / np.sqrt(omega)  # tails decay like exp(-sqrt(omega) |x|)
    val, _ = quad(integrand, -half, half, points=[0.0], epsabs=1e-14, epsrel=1e-13, limit=400)
    return sigma / (2 * sigma + 2) * val


@pytest.mark.parametrize("sigma", [1.0, 2.0, 3.0])
@pytest.mark.parametrize("omega", [0.5, 1.0, 2.0])
def test_ground_state_identities(sigma, omega):
    p = ModelParams(sigma, omega)
    g = Grid(4096, 120.0 / np.sqrt(omega))
    phi = ground_state_profile(g, p)
    ux = np.fft.ifft(g.ik * np.fft.fft(phi.values))
    scale = np.sum(np.abs(ux) ** 2) * g.dx + omega * mass(phi)
    mu = mu_omega0(p)
    assert mu == pytest.approx(_mu_quad(sigma, omega), rel=1e-10)
    assert abs(nehari_K(phi, p)) < 1e-8 * scale
    assert action_S(phi, p) == pytest.approx(mu, rel=1e-8)


def test_ground_state_mass_sigma1():
    p = ModelParams(1.0, 1.0)
    g = Grid(4096, 120.0)
    assert mass(ground_state_profile(g, p)) == pytest.approx(2 * np.pi, abs=1e-10)


def test_ground_state_phase_is_needed():
    # without the gauge phase the profile is not a critical point
    p = ModelParams(2.0, 1.0)
    g = Grid(4096, 120.0)
    bare = ground_state_profile(g, p, with_phase=False)
    assert abs(nehari_K(bare, p)) > 1e-3


def test_ground_state_modulus_peak():
    p = ModelParams(3.0, 2.0)
    peak = ground_state_modulus(np.array([0.0]), p)[0]
    assert peak == pytest.approx((2 * np.sqrt(2.0) * 4) ** (1 / 6), rel=1e-14)


def test_global_predicate_scaling():
    g = Grid(1024, 80.0)
    p = ModelParams(3.0)
    u = g.field(0.1 * np.exp(-(g.nodes**2)))
    small = global_predicate(u, p)
    big = global_predicate(u * 100.0, p)
    assert small.holds and not big.holds
    assert big.lhs == pytest.approx(1e4 * small.lhs, rel=1e-12)
    assert small.bound == pytest.approx(2 * mu_omega0(p), rel=1e-14)
    with pytest.raises(ValueError):
        global_predicate(u, ModelParams(3.0, c=0.5))


@given(st.floats(0, 2 * np.pi), st.floats(0.1, 1.0), st.sampled_from([1.0, 2.0, 3.0]))
def test_invariants_are_phase_invariant(alpha, amp, sigma):
    g = Grid(256, 40.0)
    p = ModelParams(sigma)
    u = g.field(amp * np.exp(-(g.nodes**2) + 0.4j * g.nodes))
    v = u * np.exp(1j * alpha)
    assert mass(v) == pytest.approx(mass(u), rel=1e-13)
    assert momentum(v) == pytest.approx(momentum(u), rel=1e-12, abs=1e-15)
    assert energy(v, p) == pytest.approx(energy(u, p), rel=1e-12, abs=1e-15)


@given(st.integers(-40, 40), st.sampled_from([1.0, 3.0]))
def test_invariants_are_translation_invariant(shift, sigma):
    g = Grid(256, 40.0)
    p = ModelParams(sigma)
    u = g.field(0.8 * np.exp(-(g.nodes**2) + 0.7j * g.nodes))
    v = g.field(np.roll(u.values, shift))
    assert energy(v, p) == pytest.approx(energy(u, p), rel=1e-12)
    assert momentum(v) == pytest.approx(momentum(u), rel=1e-12)
