"""Small-data scattering of the gauged system.

The gauged pair ``eta(t)`` is evolved from small data and pulled back by the
free flow, ``w(t) = exp(-i t d_xx) eta(t)``.  If ``w`` settles down along
dyadic times the limit is the asymptotic state ``(phi+, psi+)`` (or
``(phi-, psi-)`` for negative times).  All gaps are formed from the stepper's
stored deviations, so they stay accurate far below ``|eta|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .gauge import StatePair, gauge_pair, gauge_phase_values
from .model import ModelParams
from .spectral import Field, Grid, deriv_values, h1_values
from .timestepper import StepperConfig, Trajectory, evolve_gauged, evolve_gdnls


@dataclass(frozen=True, eq=False)
class ScatterReport:
    """Outcome of one :func:`forward_scatter` run.

    ``verdict`` is ``"converged"`` (gaps decrease and the last one is below
    ``gap_tol``), ``"unresolved"`` (decreasing but not yet below tolerance),
    ``"not-monotone"`` (an isolated increase) or ``"no-convergence"`` (gaps
    failed to decrease across three consecutive dyadic levels).
    """

    direction: int
    check_times: np.ndarray
    pullback_snapshots: list
    cauchy_gaps: np.ndarray
    extracted: Optional[StatePair]
    stability_gap: float
    verdict: str
    exploratory: bool
    tainted: bool
    trajectory: Trajectory
    warnings: list = field(default_factory=list)

    @property
    def extracted_plus(self):
        return self.extracted if self.direction > 0 else None

    @property
    def extracted_minus(self):
        return self.extracted if self.direction < 0 else None

    @property
    def gaps_decreasing(self) -> bool:
        g = self.cauchy_gaps
        return bool(np.all((g[1:] < g[:-1]) | (g[1:] == 0)))

    def summary(self) -> dict:
        return {
            "direction": self.direction,
            "check_times": [float(t) for t in self.check_times],
            "cauchy_gaps": [float(g) for g in self.cauchy_gaps],
            "stability_gap": self.stability_gap,
            "verdict": self.verdict,
            "exploratory": self.exploratory,
            "tainted": self.tainted,
            "warnings": list(self.warnings),
        }


def dyadic_times(first: float, horizon: float) -> np.ndarray:
    """``first * 2^j`` up to ``horizon`` (horizon appended if it is not dyadic)."""
    if not 0 < first <= horizon:
        raise ValueError("need 0 < first <= horizon")
    out = [first]
    while out[-1] * 2 <= horizon * (1 + 1e-12):
        out.append(out[-1] * 2)
    if abs(out[-1] - horizon) > 1e-9 * horizon:
        out.append(horizon)
    return np.asarray(out)


def _verdict(gaps: np.ndarray, gap_tol: float) -> str:
    # a gap that is exactly zero has nothing left to decrease
    inc = (gaps[1:] >= gaps[:-1]) & (gaps[1:] > 0)
    if any(inc[j] and inc[j + 1] for j in range(len(inc) - 1)):
        return "no-convergence"
    if np.any(inc):
        return "not-monotone"
    if gaps.size and gaps[-1] < gap_tol:
        return "converged"
    return "unresolved"


def forward_scatter(
    eta0: StatePair,
    p: ModelParams,
    horizon: float,
    direction: int = 1,
    dt: float = 0.05,
    first_check: float = 8.0,
    smallness: float = 0.2,
    gap_tol: float = 1e-4,
    dealias_fraction: float = 0.5,
    nonlinear: bool = True,
    startup_time: float = 0.0,
    startup_dt: Optional[float] = None,
) -> ScatterReport:
    """Evolve the gauged system to ``direction * horizon`` and track ``w(t)`` at dyadic times.

    ``cauchy_gaps[j] = ||w(t_{j+1}) - w(t_j)||`` in the pair H1 norm.  The
    extracted state is ``w`` at the last check time, recorded only when the
    last gap is below ``gap_tol``.  ``sigma`` in ``[2, 3)`` is allowed but
    flagged as exploratory.  ``startup_time``/``startup_dt`` refine the step
    while the data are still localized (see :class:`StepperConfig`).
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    if p.sigma < 2:
        raise ValueError(f"scattering harness needs sigma >= 2, got {p.sigma}")
    size = eta0.h1()
    if size > smallness:
        raise ValueError(f"||eta0||_H1xH1 = {size:.3g} exceeds the smallness threshold {smallness}")
    checks = dyadic_times(first_check, horizon)
    cfg = StepperConfig(
        dt=dt,
        t_start=0.0,
        t_end=direction * horizon,
        dealias_fraction=dealias_fraction,
        startup_time=startup_time,
        startup_dt=startup_dt,
    )
    traj = evolve_gauged(eta0, cfg, p, nonlinear=nonlinear, record_times=direction * checks)
    idx = [traj.index_of(direction * t) for t in checks]
    pullbacks = [traj.pullback(i) for i in idx]
    gaps = np.asarray([traj.pullback_gap(idx[j + 1], idx[j]).h1() for j in range(len(idx) - 1)])
    verdict = _verdict(gaps, gap_tol)
    last = float(gaps[-1]) if gaps.size else float("nan")
    extracted = pullbacks[-1] if gaps.size and last < gap_tol else None
    warnings_ = []
    tainted = traj.tainted(p.boundary_tolerance)
    if tainted:
        warnings_.append(f"boundary mass fraction {traj.boundary_fraction:.2e} exceeds {p.boundary_tolerance:.0e}")
    return ScatterReport(
        direction=direction,
        check_times=direction * checks,
        pullback_snapshots=pullbacks,
        cauchy_gaps=gaps,
        extracted=extracted,
        stability_gap=last,
        verdict=verdict,
        exploratory=p.sigma < 3,
        tainted=tainted,
        trajectory=traj,
        warnings=warnings_,
    )


# --- checks against the physical flow -------------------------------------


def _pull(values: np.ndarray, grid: Grid, t: float) -> np.ndarray:
    return np.fft.ifft(grid.propagator(-t) * np.fft.fft(values))


def _gauge_offsets(u: np.ndarray, grid: Grid, sigma: float):
    """``G1 u - u`` and ``G2 u - u_x`` as ``expm1`` products."""
    e = np.expm1(1j * gauge_phase_values(u, grid, sigma))
    return u * e, deriv_values(u, grid) * e


def gauge_path_gap(traj_u: Trajectory, i_u: int, traj_eta: Trajectory, i_eta: int, sigma: float) -> tuple:
    """``(||pull G1 u - w_phi||_H1, ||pull G2 u - w_psi||_H1)`` at one time.

    ``pull`` undoes the free flow.  Both trajectories must start at ``t = 0``
    from ``u0`` and ``(G1 u0, G2 u0)``; the difference is assembled from
    deviations and ``expm1`` gauge offsets, so it carries no cancellation.
    """
    if traj_u.t_reference != 0.0 or traj_eta.t_reference != 0.0:
        raise ValueError("both trajectories must start at t = 0")
    g = traj_u.grid
    t = float(traj_u.times[i_u])
    u0 = np.fft.ifft(traj_u.initial_hat)
    off0 = _gauge_offsets(u0, g, sigma)
    off_t = _gauge_offsets(traj_u.snapshots[i_u].values, g, sigma)
    du = traj_u.deviations[i_u]
    de = traj_eta.deviations[i_eta]
    d_phi = np.fft.ifft(du - de[0]) + _pull(off_t[0], g, t) - off0[0]
    d_psi = np.fft.ifft(g.ik * du - de[1]) + _pull(off_t[1], g, t) - off0[1]
    return h1_values(d_phi, g), h1_values(d_psi, g)


def direct_distance(traj_u: Trajectory, i_u: int, traj_eta: Trajectory, i_eta: int, sigma: float) -> float:
    """``||G1(u(t)) - exp(i t d_xx) phi_ext||_H1`` with ``phi_ext = w_phi`` at ``traj_eta.times[i_eta]``."""
    return gauge_path_gap(traj_u, i_u, traj_eta, i_eta, sigma)[0]


@dataclass(frozen=True, eq=False)
class PhysicalScatterReport:
    plus: ScatterReport
    minus: ScatterReport
    horizon: float
    direct_times: np.ndarray
    direct_values: np.ndarray
    gauge_path_defect: float
    horizon_drift_plus: float
    horizon_drift_minus: float
    time_reversal_defect: float
    physical_trajectory: Trajectory

    def summary(self) -> dict:
        return {
            "horizon": self.horizon,
            "plus": self.plus.summary(),
            "minus": self.minus.summary(),
            "direct_times": [float(t) for t in self.direct_times],
            "direct_values": [float(v) for v in self.direct_values],
            "gauge_path_defect": self.gauge_path_defect,
            "horizon_drift_plus": self.horizon_drift_plus,
            "horizon_drift_minus": self.horizon_drift_minus,
            "time_reversal_defect": self.time_reversal_defect,
        }


def time_reversal_defect(plus: StatePair, minus: StatePair) -> float:
    """Distance from the reversal symmetry ``phi- = conj(phi+(-x))``, ``psi- = -conj(psi+(-x))``.

    The symmetry ``u(t, x) -> conj(u(-t, -x))`` maps real even data to itself,
    so for such data the defect measures extraction error only.
    """
    g = plus.grid
    a = minus.phi.values - plus.phi.reflect().conj().values
    b = minus.psi.values + plus.psi.reflect().conj().values
    return h1_values(a, g) + h1_values(b, g)


def scatter_from_physical(
    u0: Field,
    p: ModelParams,
    horizon: float,
    dt: float = 0.05,
    first_check: float = 8.0,
    smallness: float = 0.2,
    gap_tol: float = 1e-4,
    dealias_fraction: float = 0.5,
    startup_time: float = 0.0,
    startup_dt: Optional[float] = None,
) -> PhysicalScatterReport:
    """Scatter ``(G1 u0, G2 u0)`` in both directions up to ``2 * horizon``.

    The extra doubling supplies the horizon-stability drift
    ``||w(2H) - w(H)||``; the extracted states are taken at ``2H``.  The
    physical flow of ``u0`` is integrated independently to compare
    ``G1(u(t))`` with the free evolution of ``phi+`` at the dyadic times and
    to check that both extraction paths agree.
    """
    eta0 = gauge_pair(u0, p)
    T = 2.0 * horizon
    steps = dict(dt=dt, dealias_fraction=dealias_fraction, startup_time=startup_time, startup_dt=startup_dt)
    kw = dict(first_check=first_check, smallness=smallness, gap_tol=gap_tol, **steps)
    plus = forward_scatter(eta0, p, T, +1, **kw)
    minus = forward_scatter(eta0, p, T, -1, **kw)

    checks = dyadic_times(first_check, T)
    cfg = StepperConfig(t_start=0.0, t_end=T, **steps)
    traj_u = evolve_gdnls(u0, cfg, p, record_times=checks)
    i_end = plus.trajectory.index_of(T)
    direct = np.asarray([direct_distance(traj_u, traj_u.index_of(t), plus.trajectory, i_end, p.sigma) for t in checks])
    gp = gauge_path_gap(traj_u, traj_u.index_of(T), plus.trajectory, i_end, p.sigma)

    def drift(rep: ScatterReport) -> float:
        tr = rep.trajectory
        return tr.pullback_gap(tr.index_of(rep.direction * T), tr.index_of(rep.direction * horizon)).h1()

    rev = time_reversal_defect(plus.pullback_snapshots[-1], minus.pullback_snapshots[-1])
    return PhysicalScatterReport(
        plus=plus,
        minus=minus,
        horizon=horizon,
        direct_times=checks,
        direct_values=direct,
        gauge_path_defect=float(sum(gp)),
        horizon_drift_plus=drift(plus),
        horizon_drift_minus=drift(minus),
        time_reversal_defect=rev,
        physical_trajectory=traj_u,
    )
