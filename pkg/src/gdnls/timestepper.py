"""Integrating-factor RK4 for the gDNLS flow and for the gauged system.

Both problems have the form ``y_t = i y_xx + N(y, t)``.  With the free
propagator ``E(t) = exp(i t d_xx)`` (symbol ``exp(-i k^2 t)``) the
interaction variable ``z(t) = E(-(t - t0)) y(t)`` obeys
``z_t = E(-(t - t0)) N(E(t - t0) z)``, which classical RK4 integrates; the
linear flow is therefore exact.

The stepper does not store ``z`` itself but the Fourier-space deviation
``delta(t) = z_hat(t) - z_hat(t0)``.  For small data the nonlinear
increments are many orders below ``|y|``; keeping them in a separate array
means differences such as ``E(-t) y(t) - E(-s) y(s)`` are obtained without
cancellation (see :meth:`Trajectory.pullback_gap`).

Step-size guidance: explicit RK4 on the transformed nonlinearity is stable for
``dt * max|u|^(2 sigma) * k_max`` of order one or less.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .gauge import StatePair, check_gauged_sigma, gauged_nonlinear_values, relation_defect_values
from .model import ModelParams, energy, mass, momentum
from .spectral import Field, Grid, h1_values, l2_values

EXACT = math.inf  # order reported when the solver is exact (e.g. the free flow)


class BlowUpError(RuntimeError):
    """Raised when the sup norm leaves the allowed range or turns non-finite.

    ``time`` is the stage time at which the guard fired, ``last_good_time``
    the last completed step and ``trajectory`` the records gathered so far.
    """

    def __init__(self, message, time, last_good_time, trajectory=None):
        super().__init__(message)
        self.time = time
        self.last_good_time = last_good_time
        self.trajectory = trajectory


@dataclass(frozen=True)
class StepperConfig:
    """Fixed-step integration settings.

    ``dt`` is a magnitude; the direction follows ``sign(t_end - t_start)``.
    The run aborts once ``max|y| > max_linf_growth * max(max|y0|, linf_floor)``.
    ``linf_floor`` keeps the guard meaningful when the initial datum is zero
    (forced final-value problems).  ``startup_dt`` (if set) replaces ``dt``
    while ``|t - t_start| < startup_time``: localized data evolve fastest
    before they have dispersed.
    """

    dt: float
    t_start: float
    t_end: float
    record_every: int = 1
    dealias_fraction: float = 0.5
    max_linf_growth: float = 1e3
    linf_floor: float = 1e-3
    track_l4: bool = False
    startup_time: float = 0.0
    startup_dt: Optional[float] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_start == self.t_end:
            raise ValueError("t_start and t_end must differ")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError("record_every must be a positive integer")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise ValueError("dealias_fraction must lie in (0, 1]")
        if not self.max_linf_growth > 0:
            raise ValueError("max_linf_growth must be positive")
        if self.startup_time < 0 or (self.startup_dt is not None and not self.startup_dt > 0):
            raise ValueError("startup_time must be >= 0 and startup_dt positive")

    @property
    def direction(self) -> int:
        return 1 if self.t_end > self.t_start else -1


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded states of one run.

    ``snapshots`` holds Fields (gDNLS) or StatePairs (gauged system).
    ``deviations[i]`` is the Fourier-space deviation of the interaction
    variable at ``times[i]``; see the module docstring.
    """

    kind: str
    grid: Grid
    times: np.ndarray
    snapshots: list
    invariant_series: dict
    deviations: list
    initial_hat: np.ndarray
    t_reference: float
    sigma: float
    l4_w1inf: Optional[float] = None
    warnings: list = field(default_factory=list)

    def __len__(self):
        return len(self.times)

    @property
    def final(self):
        return self.snapshots[-1]

    @property
    def boundary_fraction(self) -> float:
        return float(np.max(self.invariant_series["boundary_mass"]))

    def tainted(self, tolerance: float) -> bool:
        return self.boundary_fraction > tolerance

    def _wrap(self, arr):
        if self.kind == "gdnls":
            return Field(self.grid, arr)
        return StatePair.from_array(self.grid, arr)

    def pullback(self, i: int):
        """``E(-t_i) y(t_i)``, the state with the free flow undone."""
        back = self.grid.propagator(-self.t_reference)
        return self._wrap(np.fft.ifft(back * (self.initial_hat + self.deviations[i]), axis=-1))

    def pullback_gap(self, i: int, j: int):
        """``E(-t_i) y(t_i) - E(-t_j) y(t_j)`` from the stored deviations (no cancellation)."""
        back = self.grid.propagator(-self.t_reference)
        return self._wrap(np.fft.ifft(back * (self.deviations[i] - self.deviations[j]), axis=-1))

    def nonlinear_part(self, i: int):
        """``y(t_i) - E(t_i - t0) y(t0)``: the state minus its free evolution."""
        fwd = self.grid.propagator(self.times[i] - self.t_reference)
        return self._wrap(np.fft.ifft(fwd * self.deviations[i], axis=-1))

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        hits = np.nonzero(np.abs(self.times - t) <= tol * max(1.0, abs(t)))[0]
        if hits.size == 0:
            raise KeyError(f"time {t} was not recorded")
        return int(hits[0])


# --- right-hand sides (Fourier in, Fourier out) ---------------------------


def _dealias_mask(grid: Grid, keep_fraction: float) -> np.ndarray:
    return (np.abs(grid.wavenumbers) <= keep_fraction * grid.k_max).astype(float)


class _GdnlsRhs:
    ncomp = 1

    def __init__(self, grid: Grid, sigma: float, keep_fraction: float):
        self.grid, self.sigma = grid, sigma
        self.mask = _dealias_mask(grid, keep_fraction)

    def physical(self, y_hat):
        return np.fft.ifft(y_hat)

    def __call__(self, y_hat, t):
        u = np.fft.ifft(y_hat)
        ux = np.fft.ifft(self.grid.ik * y_hat)
        return self.mask * np.fft.fft(kernels.gdnls_term(u, ux, self.sigma)), u, ux


def _gauged_F(phi, psi, grid, sigma):
    # undealiased F(phi, psi); the caller masks in Fourier space
    return gauged_nonlinear_values(phi, psi, grid, sigma, 1.0)


class _GaugedRhs:
    """``N = -i (F(eta + W) - F(W) + H)``; ``W`` and ``H`` optional callbacks."""

    ncomp = 2

    def __init__(self, grid, sigma, keep_fraction, forcing=None, background=None):
        self.grid, self.sigma = grid, sigma
        self.mask = _dealias_mask(grid, keep_fraction)
        self.forcing, self.background = forcing, background
        self._cache = {}

    def _source(self, t):
        # -F(W(t)) + H(t), cached: RK4 asks for each stage time twice
        if t in self._cache:
            return self._cache[t]
        W = None
        S0 = np.zeros(self.grid.n_points, complex)
        S1 = np.zeros(self.grid.n_points, complex)
        if self.background is not None:
            W = self.background(t)
            W = (W.phi.values, W.psi.values)
            FW = _gauged_F(W[0], W[1], self.grid, self.sigma)
            S0, S1 = S0 - FW[0], S1 - FW[1]
        if self.forcing is not None:
            H = self.forcing(t)
            S0, S1 = S0 + H.phi.values, S1 + H.psi.values
        if len(self._cache) > 8:
            self._cache.clear()
        self._cache[t] = (W, S0, S1)
        return self._cache[t]

    def __call__(self, y_hat, t):
        eta = np.fft.ifft(y_hat, axis=-1)
        phi, psi = eta[0], eta[1]
        if self.background is None and self.forcing is None:
            P, Q = _gauged_F(phi, psi, self.grid, self.sigma)
        else:
            W, S0, S1 = self._source(t)
            if W is None:
                P, Q = _gauged_F(phi, psi, self.grid, self.sigma)
            else:
                P, Q = _gauged_F(phi + W[0], psi + W[1], self.grid, self.sigma)
            P, Q = P + S0, Q + S1
        N = -1j * np.stack([P, Q])
        return self.mask * np.fft.fft(N, axis=-1), eta, None


class _LinearRhs:
    def __init__(self, ncomp):
        self.ncomp = ncomp

    def __call__(self, y_hat, t):
        y = np.fft.ifft(y_hat, axis=-1)
        return np.zeros_like(y_hat), y, None


# --- schedule -------------------------------------------------------------


def _pieces(t0: float, t1: float, dt: float):
    """Steps of size ``dt`` from ``t0`` to ``t1`` with a shorter last step if needed."""
    d = 1 if t1 > t0 else -1
    seg = abs(t1 - t0)
    n_full = int(math.floor(seg / dt * (1 + 1e-12)))
    rem = seg - n_full * dt
    if rem <= 1e-12 * dt and n_full > 0:
        rem = 0.0
    out = [(t0 + d * j * dt, d * dt) for j in range(n_full)]
    if rem > 0:
        out.append((t0 + d * n_full * dt, d * rem))
    return out


def _segments(cfg: StepperConfig, record_times: Optional[Sequence[float]]):
    """List of ``(t, h, record_after)`` steps.

    Steps have size ``dt`` (``startup_dt`` during the startup window) except
    possibly the last one before a stop.  Without ``record_times`` a record is
    taken every ``record_every`` steps and at the end.
    """
    d = cfg.direction
    stops = [] if record_times is None else sorted({float(t) for t in record_times}, reverse=d < 0)
    lo, hi = sorted((cfg.t_start, cfg.t_end))
    for t in stops:
        if not lo - 1e-12 <= t <= hi + 1e-12:
            raise ValueError(f"record time {t} outside [{lo}, {hi}]")
    stops = [t for t in stops if t != cfg.t_start]
    if not stops or stops[-1] != cfg.t_end:
        stops.append(cfg.t_end)
    switch = None
    if cfg.startup_dt is not None and 0 < cfg.startup_time < abs(cfg.t_end - cfg.t_start):
        switch = cfg.t_start + d * cfg.startup_time
    out = []
    t0 = cfg.t_start
    for stop in stops:
        if switch is not None and d * (switch - t0) > 0 and d * (stop - switch) > 0:
            pieces = _pieces(t0, switch, cfg.startup_dt) + _pieces(switch, stop, cfg.dt)
        elif switch is not None and d * (stop - t0) > 0 and d * (switch - stop) >= 0:
            pieces = _pieces(t0, stop, cfg.startup_dt)
        else:
            pieces = _pieces(t0, stop, cfg.dt)
        for j, (t, h) in enumerate(pieces):
            out.append((t, h, j == len(pieces) - 1))
        t0 = stop
    if record_times is None:
        out = [(t, h, j == len(out) - 1 or (j + 1) % cfg.record_every == 0) for j, (t, h, _) in enumerate(out)]
    return out


# --- diagnostics ----------------------------------------------------------


def boundary_fraction_values(y: np.ndarray, grid: Grid, strip: float = 0.05) -> float:
    """Share of ``sum |y|^2`` carried by the outer ``strip`` of the box on each side."""
    x = grid.nodes
    a2 = np.abs(np.atleast_2d(y)) ** 2
    total = np.sum(a2)
    if total == 0:
        return 0.0
    edge = np.abs(x) >= (0.5 - strip) * grid.domain_length
    return float(np.sum(a2[:, edge]) / total)


def _gdnls_invariants(u: np.ndarray, grid: Grid, p: ModelParams) -> dict:
    f = Field(grid, u)
    return {
        "mass": mass(f),
        "energy": energy(f, p),
        "momentum": momentum(f),
        "l2": l2_values(u, grid),
        "h1": h1_values(u, grid),
        "linf": float(np.max(np.abs(u))),
        "boundary_mass": boundary_fraction_values(u, grid),
    }


def _gauged_invariants(eta: np.ndarray, grid: Grid, sigma: float, h) -> dict:
    out = {
        "l2": l2_values(eta[0], grid) + l2_values(eta[1], grid),
        "h1": h1_values(eta[0], grid) + h1_values(eta[1], grid),
        "linf": float(np.max(np.abs(eta))),
        "boundary_mass": boundary_fraction_values(eta, grid),
    }
    r = relation_defect_values(eta[0], eta[1], h, grid, sigma)
    out["relation_residual"] = l2_values(r, grid)
    return out


# --- the integrator -------------------------------------------------------


def _integrate(*args):
    # overflow on the way to a blow-up is caught by the guard; keep numpy quiet about it
    with np.errstate(over="ignore", invalid="ignore"):
        return _integrate_steps(*args)


def _integrate_steps(y0: np.ndarray, grid: Grid, rhs, cfg: StepperConfig, record, record_times, kind, sigma):
    t0 = cfg.t_start
    y0_hat = np.fft.fft(y0, axis=-1)
    delta = np.zeros_like(y0_hat)
    ref = max(float(np.max(np.abs(y0))), cfg.linf_floor)
    limit = cfg.max_linf_growth * ref

    times, snaps, devs, series = [t0], [], [delta.copy()], {}

    def store(t, y):
        snaps.append(y.copy())
        for key, val in record(y, t).items():
            series.setdefault(key, []).append(val)

    def snapshot_traj():
        return _finish(kind, grid, times[: len(snaps)], snaps, series, devs[: len(snaps)], y0_hat, t0, sigma, None)

    store(t0, y0)
    l4 = 0.0
    last_good = t0
    k2 = grid.k_squared
    fwd = np.ones(grid.n_points, complex)  # E(t - t0) at the current step start
    schedule = _segments(cfg, record_times)
    for t, h, rec in schedule:
        tm, te = t + 0.5 * h, t + h
        fwd_m = np.exp(-1j * (tm - t0) * k2)
        fwd_e = np.exp(-1j * (te - t0) * k2)
        base = y0_hat + delta

        n1, y, yx = rhs(fwd * base, t)
        linf = float(np.max(np.abs(y)))
        if not np.isfinite(linf) or linf > limit:
            raise BlowUpError(
                f"sup norm {linf:.3e} exceeds guard {limit:.3e} at t={t:.6g}", t, last_good, snapshot_traj()
            )
        if cfg.track_l4:
            if yx is None:
                yx = np.fft.ifft(grid.ik * (fwd * base), axis=-1)
            l4 += abs(h) * (linf + float(np.max(np.abs(yx)))) ** 4
        last_good = t

        k1 = np.conj(fwd) * n1
        k2_ = np.conj(fwd_m) * rhs(fwd_m * (base + 0.5 * h * k1), tm)[0]
        k3 = np.conj(fwd_m) * rhs(fwd_m * (base + 0.5 * h * k2_), tm)[0]
        k4 = np.conj(fwd_e) * rhs(fwd_e * (base + h * k3), te)[0]
        delta = delta + (h / 6.0) * (k1 + 2.0 * k2_ + 2.0 * k3 + k4)
        fwd = fwd_e
        if rec:
            y = np.fft.ifft(fwd * (y0_hat + delta), axis=-1)
            if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > limit:
                raise BlowUpError(f"sup norm guard fired at t={te:.6g}", te, last_good, snapshot_traj())
            times.append(te)
            devs.append(delta.copy())
            store(te, y)
    return _finish(kind, grid, times, snaps, series, devs, y0_hat, t0, sigma, l4 if cfg.track_l4 else None)


def _finish(kind, grid, times, snaps, series, devs, y0_hat, t0, sigma, l4):
    if kind == "gdnls":
        snapshots = [Field(grid, s) for s in snaps]
    else:
        snapshots = [StatePair.from_array(grid, s) for s in snaps]
    n = len(snapshots)
    return Trajectory(
        kind=kind,
        grid=grid,
        times=np.asarray(times[:n], float),
        snapshots=snapshots,
        invariant_series={k: np.asarray(v[:n]) for k, v in series.items()},
        deviations=devs[:n],
        initial_hat=y0_hat,
        t_reference=t0,
        sigma=sigma,
        l4_w1inf=l4,
    )


def evolve_gdnls(
    u0: Field,
    cfg: StepperConfig,
    p: ModelParams,
    nonlinear: bool = True,
    record_times: Optional[Sequence[float]] = None,
) -> Trajectory:
    """Integrate ``u_t = i u_xx - |u|^(2 sigma) u_x`` from ``cfg.t_start`` to ``cfg.t_end``.

    Records mass, energy, momentum, L2/H1/sup norms and the boundary mass
    fraction.  ``nonlinear=False`` switches the nonlinearity off (the result
    is then the exact free flow).  With ``record_times`` the run stops exactly
    at those times instead of every ``record_every`` steps.

    Raises
    ------
    BlowUpError
        If the sup-norm guard fires or the state stops being finite.
    """
    if not u0.is_finite():
        raise ValueError("initial datum is not finite")
    g = u0.grid
    rhs = _GdnlsRhs(g, p.sigma, cfg.dealias_fraction) if nonlinear else _LinearRhs(1)
    return _integrate(
        u0.values.copy(), g, rhs, cfg, lambda y, t: _gdnls_invariants(y, g, p), record_times, "gdnls", p.sigma
    )


def evolve_gauged(
    eta0: StatePair,
    cfg: StepperConfig,
    p: ModelParams,
    forcing: Optional[Callable[[float], StatePair]] = None,
    background: Optional[Callable[[float], StatePair]] = None,
    nonlinear: bool = True,
    record_times: Optional[Sequence[float]] = None,
) -> Trajectory:
    """Integrate ``i eta_t + eta_xx = F(eta + W) - F(W) + H`` (both components).

    Without callbacks this is the plain gauged system ``L eta = F(eta)``.
    ``background(t)`` supplies ``W`` and ``forcing(t)`` supplies ``H``; both
    are called at the RK4 stage times.  The recorded ``relation_residual``
    uses ``h = W.phi`` when a background is given.
    """
    check_gauged_sigma(p.sigma)
    if not eta0.is_finite():
        raise ValueError("initial datum is not finite")
    g = eta0.grid
    if nonlinear:
        rhs = _GaugedRhs(g, p.sigma, cfg.dealias_fraction, forcing, background)
    else:
        rhs = _LinearRhs(2)

    def record(y, t):
        h = background(t).phi.values if background is not None else None
        return _gauged_invariants(y, g, p.sigma, h)

    return _integrate(eta0.stack(), g, rhs, cfg, record, record_times, "gauged", p.sigma)


# --- convergence and two-trajectory diagnostics ---------------------------


@dataclass(frozen=True)
class ConvergenceProblem:
    kind: str
    n_points: int
    domain_length: float
    sigma: float
    amplitude: float
    t_final: float
    nonlinear: bool = True


CONVERGENCE_PROBLEMS = {
    "linear": ConvergenceProblem("gdnls", 256, 40.0, 1.0, 0.5, 1.0, nonlinear=False),
    "gdnls-sigma1": ConvergenceProblem("gdnls", 256, 40.0, 1.0, 0.5, 1.0),
    "gauged-sigma3": ConvergenceProblem("gauged", 256, 40.0, 3.0, 0.5, 1.0),
}


def _problem_run(prob: ConvergenceProblem, dt: float) -> Trajectory:
    from .gauge import gauge_pair

    g = Grid(prob.n_points, prob.domain_length)
    p = ModelParams(prob.sigma)
    u0 = Field(g, prob.amplitude * np.exp(-g.nodes**2))
    cfg = StepperConfig(dt=dt, t_start=0.0, t_end=prob.t_final, record_every=10**9)
    if prob.kind == "gdnls":
        return evolve_gdnls(u0, cfg, p, nonlinear=prob.nonlinear)
    return evolve_gauged(gauge_pair(u0, p), cfg, p, nonlinear=prob.nonlinear)


def self_convergence_order(problem_id, dt0: float, floor: float = 1e-13) -> float:
    """Observed order ``log2(|y_dt - y_dt/2| / |y_dt/2 - y_dt/4|)`` at the final time.

    ``problem_id`` names an entry of :data:`CONVERGENCE_PROBLEMS` (or is a
    :class:`ConvergenceProblem`).  Differences are taken between the stored
    deviations, so they are free of cancellation against the free flow.
    Returns :data:`EXACT` when the coarse difference is below
    ``floor * |y|`` (the integrator is exact, e.g. for the free flow).
    """
    prob = CONVERGENCE_PROBLEMS[problem_id] if isinstance(problem_id, str) else problem_id
    runs = [_problem_run(prob, dt0 / 2**j) for j in range(3)]
    devs = [r.deviations[-1] for r in runs]
    e1 = float(np.linalg.norm(devs[0] - devs[1]))
    e2 = float(np.linalg.norm(devs[1] - devs[2]))
    scale = float(np.linalg.norm(runs[-1].initial_hat))
    if e1 <= floor * scale or e2 == 0.0:
        return EXACT
    return math.log2(e1 / e2)


def pair_difference_monitor(traj_u: Trajectory, traj_w: Trajectory) -> np.ndarray:
    """``M(t) = ||u(t) - w(t)||_2^2`` at every recorded time.

    For gauged trajectories the squared L2 norms of both components are added.
    """
    if traj_u.grid != traj_w.grid:
        raise ValueError("trajectories live on different grids")
    if traj_u.kind != traj_w.kind:
        raise ValueError("trajectories are of different kinds")
    if len(traj_u.times) != len(traj_w.times) or not np.allclose(traj_u.times, traj_w.times, rtol=0, atol=1e-9):
        raise ValueError("trajectories were recorded at different times")
    g = traj_u.grid
    out = []
    for a, b in zip(traj_u.snapshots, traj_w.snapshots):
        if traj_u.kind == "gdnls":
            d = [a.values - b.values]
        else:
            d = [a.phi.values - b.phi.values, a.psi.values - b.psi.values]
        out.append(sum(l2_values(x, g) ** 2 for x in d))
    return np.asarray(out)


def invariant_drifts(traj: Trajectory) -> dict:
    """Largest relative drift of mass, energy and momentum over a gDNLS run.

    Each drift is ``max_t |Q(t) - Q(0)| / scale``.  The mass is scaled by
    ``M(0)``; the energy by ``max(|E(0)|, ||u0_x||^2 / 2)`` and the momentum by
    ``max(|P(0)|, ||u0||_2 ||u0_x||_2)``, because ``E`` and ``P`` can vanish for
    nontrivial data (real data have ``P = 0``).  A zero scale (zero data)
    leaves the drift absolute.
    """
    if traj.kind != "gdnls":
        raise ValueError("invariant drifts are defined for gDNLS trajectories")
    u0 = traj.snapshots[0].values
    g = traj.grid
    l2 = l2_values(u0, g)
    lx = l2_values(np.fft.ifft(g.ik * np.fft.fft(u0)), g)
    s = traj.invariant_series
    scales = {
        "mass": abs(s["mass"][0]),
        "energy": max(abs(s["energy"][0]), 0.5 * lx**2),
        "momentum": max(abs(s["momentum"][0]), l2 * lx),
    }
    out = {}
    for key, scale in scales.items():
        dev = float(np.max(np.abs(s[key] - s[key][0])))
        out[key] = float(dev / scale) if scale > 0 else dev
    return out
