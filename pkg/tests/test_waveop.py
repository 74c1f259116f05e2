import numpy as np
import pytest

from gdnls.gauge import gauge_inverse, gauged_nonlinear_values, relation_residual
from gdnls.model import ModelParams
from gdnls.spectral import Field, Grid, deriv_values, free_propagate
from gdnls.timestepper import StepperConfig
from gdnls.waveop import (
    AsymptoticState,
    ProfileBundle,
    WaveOpError,
    choose_final_time,
    free_profile,
    free_profile_v,
    gauged_profiles,
    geometric_times,
    picard_oracle,
    run_wave_operator,
    solve_final_value,
    source_terms,
    truncation_uniqueness,
    u_minus_R_values,
)


def _u_plus(g, amp=0.5, width=2.0, v=0.0):
    return g.field(amp * np.exp(-((g.nodes / width) ** 2)) * np.exp(1j * v * g.nodes))


@pytest.fixture(scope="module")
def small_state():
    g = Grid(256, 128.0)
    return AsymptoticState(_u_plus(g, width=4.0), 3.0, 4.0, 12.0)


def test_state_validation():
    g = Grid(64, 20.0)
    u = _u_plus(g)
    with pytest.raises(ValueError):
        AsymptoticState(u, 2.0, 4.0, 8.0)
    with pytest.raises(ValueError):
        AsymptoticState(u, 3.0, 0.5, 8.0)
    with pytest.raises(ValueError):
        AsymptoticState(u, 3.0, 4.0, 4.0)
    with pytest.raises(ValueError):
        AsymptoticState(u, 3.0, 4.0, 8.0, source_form="approximate")
    with pytest.raises(ValueError):
        AsymptoticState(g.field(np.full(64, np.inf)), 3.0, 4.0, 8.0)


def test_free_profile_and_defect():
    g = Grid(256, 60.0)
    st = AsymptoticState(_u_plus(g, v=0.4), 3.0, 2.0, 8.0)
    R = free_profile(st, 3.0)
    assert np.max(np.abs(R.values - free_propagate(st.u_plus, 3.0).values)) < 1e-14
    Rx = deriv_values(R.values, g)
    assert np.allclose(free_profile_v(st, 3.0).values, 1j * np.abs(R.values) ** 6 * Rx, rtol=0, atol=1e-15)


def test_zero_state_gives_zero_profiles():
    g = Grid(128, 40.0)
    st = AsymptoticState(g.zeros(), 3.0, 2.0, 8.0)
    for fn in (free_profile, free_profile_v):
        assert np.all(fn(st, 3.0).values == 0)
    assert gauged_profiles(st, 3.0).h1() == 0.0 and source_terms(st, 3.0).h1() == 0.0
    traj = solve_final_value(st, ProfileBundle(st), StepperConfig(dt=0.1, t_start=0, t_end=1))
    assert traj.final.h1() == 0.0


def test_profile_identities():
    g = Grid(2048, 320.0)
    st = AsymptoticState(_u_plus(g, v=0.3), 3.0, 1.0, 16.0)
    assert np.max(np.abs(free_profile(st, 0.0).values - st.u_plus.values)) < 1e-15
    p = st.params
    for t in (1.0, 4.0, 16.0):
        W = gauged_profiles(st, t)
        R = free_profile(st, t).values
        assert np.max(np.abs(np.abs(W.phi.values) - np.abs(R))) < 1e-15
        assert relation_residual(W, None, p) < 1e-10
        # m is the gauge phase applied to v, less the quartic free-flow correction
        m = source_terms(st, t).phi.values
        v = free_profile_v(st, t).values
        quartic = 0.25 * np.abs(R) ** 12 * W.phi.values
        assert np.max(np.abs(np.abs(m + quartic) - np.abs(v))) < 1e-15


def _time_derivative(fn, t, eps=1e-3):
    return (-fn(t + 2 * eps) + 8 * fn(t + eps) - 8 * fn(t - eps) + fn(t - 2 * eps)) / (12 * eps)


@pytest.mark.parametrize("sigma", [2.5, 3.0])
def test_sources_are_defect_of_gauged_profiles(sigma):
    """``i W_t + W_xx - F(W) = (m, n)``, with ``W_t`` by a fourth-order difference in time."""
    g = Grid(512, 80.0)
    st = AsymptoticState(_u_plus(g, v=0.3), sigma, 1.0, 16.0)
    t = 2.0
    W = gauged_profiles(st, t).stack()
    Wt = _time_derivative(lambda s: gauged_profiles(st, s).stack(), t)
    P, Q = gauged_nonlinear_values(W[0], W[1], g, sigma, 1.0)
    lhs = 1j * Wt + np.stack([deriv_values(deriv_values(c, g), g) for c in W]) - np.stack([P, Q])
    src = source_terms(st, t).stack()
    # difference-quotient rounding scales with |W|, not with the small source
    assert np.max(np.abs(lhs - src)) < 1e-10 * np.max(np.abs(W))

    # the literal source form misses the quartic and sign corrections
    lit = AsymptoticState(st.u_plus, sigma, 1.0, 16.0, source_form="literal")
    assert np.max(np.abs(lhs - source_terms(lit, t).stack())) > 1e-2 * np.max(np.abs(src))


def test_source_h1_decays_and_final_time_choice():
    g = Grid(1024, 512.0)
    u = _u_plus(g, amp=0.05, width=4.0)
    b = ProfileBundle(AsymptoticState(u, 3.0, 4.0, 64.0))
    vals = [b.source_h1(t) for t in (8.0, 16.0, 32.0)]
    assert vals[0] > vals[1] > vals[2] > 0
    TN = choose_final_time(u, 3.0, 4.0, tail_tol=vals[1])
    assert TN in (64.0, 128.0) and TN >= 16 * 4.0
    with pytest.raises(WaveOpError) as info:
        choose_final_time(u, 3.0, 4.0, tail_tol=1e-300, max_doublings=5)
    assert info.value.kind == "smallness"


def test_bundle_cache_and_zero_source():
    g = Grid(256, 80.0)
    st = AsymptoticState(_u_plus(g), 3.0, 2.0, 8.0)
    b = ProfileBundle(st, cache_size=2)
    for t in (2.0, 3.0, 2.0, 4.0, 2.0):
        b.sample(t)
    assert b.times == [2.0, 3.0, 4.0, 2.0]
    z = ProfileBundle(st, zero_source=True)
    assert z.H_hat(3.0).h1() == 0.0 and z.source_h1(3.0) == 0.0


def test_geometric_times():
    ts = geometric_times(4.0, 128.0, 6)
    assert ts[0] == 4.0 and ts[-1] == pytest.approx(128.0)
    assert np.allclose(ts[1:] / ts[:-1], 2.0)


def test_zero_source_gives_trivial_correction(small_state):
    b = ProfileBundle(small_state, zero_source=True)
    traj = solve_final_value(small_state, b, StepperConfig(dt=0.1, t_start=0, t_end=1))
    assert traj.final.h1() == 0.0


def test_final_value_matches_picard_iteration(small_state):
    b = ProfileBundle(small_state)
    traj = solve_final_value(small_state, b, StepperConfig(dt=0.04, t_start=0, t_end=1))
    pic = picard_oracle(small_state, b, 30, ds=0.04)
    assert pic.contracted and pic.iterations < 30
    assert all(r < 0.5 for r in pic.ratios)
    assert (traj.final - pic.eta_T0).h1() < 1e-6 * traj.final.h1()  # two time discretizations
    with pytest.raises(ValueError):
        picard_oracle(small_state, b, 0)


def test_smallness_failure_is_reported(small_state):
    b = ProfileBundle(small_state)
    with pytest.raises(WaveOpError) as info:
        solve_final_value(small_state, b, StepperConfig(dt=0.1, t_start=0, t_end=1), h1_limit=1e-12)
    assert info.value.kind == "smallness" and info.value.trajectory is not None


def test_u_minus_R_matches_direct_reconstruction(small_state):
    g = small_state.grid
    p = small_state.params
    smp = ProfileBundle(small_state).sample(5.0)
    assert np.all(u_minus_R_values(np.zeros(g.n_points, complex), smp, g, 3.0) == 0)
    phi = 1e-3 * np.exp(-((g.nodes - 1) ** 2)) * (1 + 0.5j)
    direct = gauge_inverse(Field(g, phi + smp.h), p).values - smp.R
    assert np.max(np.abs(u_minus_R_values(phi, smp, g, 3.0) - direct)) < 1e-14


def test_run_wave_operator_small_instance():
    g = Grid(512, 256.0)
    rep = run_wave_operator(_u_plus(g, amp=0.1, width=4.0), 3.0, 4.0, 64.0, dt=0.1, n_records=17)
    s = rep.summary()
    assert s["extension_ok"] and rep.u0 is not None and s["last_good_time"] == 0.0
    assert s["max_relation_relative"] < 1e-6
    assert s["rate_fit"]["slope"] < -1.0
    assert s["global_flag"]
    assert rep.times[0] == pytest.approx(4.0) and rep.times[-1] == pytest.approx(64.0)
    # sup |psi~ + k| at T0 equals sup |u_x| of the reconstructed u(T0)
    ux = deriv_values(rep.u_T0.values, g)
    assert rep.ux_sup[0] == pytest.approx(np.max(np.abs(ux)), rel=1e-10)
    assert np.all(np.isfinite(rep.ux_sup)) and rep.ux_sup[-1] < rep.ux_sup[0]
    assert np.all(np.diff(rep.times) > 0)


def test_truncation_uniqueness_small(small_state):
    d = truncation_uniqueness(small_state, StepperConfig(dt=0.05, t_start=0, t_end=1))
    assert d < 0.2 * ProfileBundle(small_state).source_h1(small_state.T0)
