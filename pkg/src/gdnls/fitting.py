"""Power-law fits on log-log data."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np


@dataclass(frozen=True)
class FitResult:
    """``log y = slope * log t + intercept`` by ordinary least squares.

    ``residual`` is the RMS misfit in ``log y``.  ``degenerate`` marks fits
    that could not be formed (fewer than two positive samples in the window);
    their slope is NaN.
    """

    slope: float
    intercept: float
    residual: float
    window: tuple
    n_points: int
    degenerate: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d

    def predict(self, t):
        return np.exp(self.intercept) * np.asarray(t, float) ** self.slope


def fit_power_law(t, y, window=None) -> FitResult:
    """Fit ``y ~ C t^slope`` over ``window = (t_lo, t_hi)`` (inclusive).

    Samples with ``y <= 0`` or non-finite values are dropped.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    lo, hi = (float(np.min(t)), float(np.max(t))) if window is None else map(float, window)
    tol = 1e-9 * max(abs(lo), abs(hi), 1.0)
    keep = (t >= lo - tol) & (t <= hi + tol) & np.isfinite(y) & (y > 0) & (t > 0)
    n = int(np.count_nonzero(keep))
    if n < 2:
        return FitResult(float("nan"), float("nan"), float("nan"), (lo, hi), n, degenerate=True)
    lt, ly = np.log(t[keep]), np.log(y[keep])
    slope, intercept = np.polyfit(lt, ly, 1)
    res = float(np.sqrt(np.mean((ly - (slope * lt + intercept)) ** 2)))
    return FitResult(float(slope), float(intercept), res, (lo, hi), n)
