import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gdnls.fitting import fit_power_law


@given(st.floats(-4, 2), st.floats(-5, 5), st.floats(0.5, 3))
def test_exact_power_law_recovered(slope, logc, lo):
    t = np.geomspace(lo, lo * 50, 20)
    fit = fit_power_law(t, np.exp(logc) * t**slope)
    assert fit.slope == pytest.approx(slope, abs=1e-9)
    assert fit.intercept == pytest.approx(logc, abs=1e-8)
    assert fit.residual < 1e-9 and not fit.degenerate


def test_window_selects_samples():
    t = np.arange(1.0, 101.0)
    y = np.where(t <= 10, t**-1.0, t**-3.0)
    fit = fit_power_law(t, y, (1.0, 10.0))
    assert fit.n_points == 10 and fit.slope == pytest.approx(-1.0)
    assert fit.window == (1.0, 10.0)
    assert fit_power_law(t, y, (20, 100)).slope == pytest.approx(-3.0)


def test_nonpositive_and_nan_samples_dropped():
    t = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    y = np.array([1.0, 0.0, np.nan, 1 / 64, 1 / 256])
    fit = fit_power_law(t, y)
    assert fit.n_points == 3 and fit.slope == pytest.approx(-2.0)


def test_degenerate_fit():
    fit = fit_power_law([1.0, 2.0], [0.0, 0.0])
    assert fit.degenerate and np.isnan(fit.slope)
    d = fit.to_dict()
    assert d["degenerate"] and d["window"] == [1.0, 2.0]


def test_predict_round_trip():
    t = np.geomspace(1, 100, 9)
    fit = fit_power_law(t, 3.0 * t**-1.5)
    assert np.allclose(fit.predict(t), 3.0 * t**-1.5, rtol=1e-12)
