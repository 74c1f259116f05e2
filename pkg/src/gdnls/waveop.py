"""Wave-operator construction: from an asymptotic free state back to ``t = 0``.

Given ``u+`` the free profile ``R(t) = exp(i t d_xx) u+`` is gauged into
``W = (h, k) = (G1 R, G2 R)``.  Because ``R`` is not a gDNLS solution, ``W``
solves the gauged system only up to a source,

    L h = P(h, k) + m,        L k = Q(h, k) + n,

and the correction ``eta~ = eta - W`` satisfies
``L eta~ = F(eta~ + W) - F(W) + H`` with ``H = -(m, n)``.  The solution that
vanishes at infinity is found by integrating backward from ``eta~(TN) = 0``
(:func:`solve_final_value`) and, on small instances, cross-checked against
direct Picard iteration of the Duhamel map (:func:`picard_oracle`).  The
physical solution is ``u = G1^{-1}(phi~ + h)``; it is compared with ``R`` to
measure the scattering rate and continued backward to ``t = 0``.

Source terms
------------
With ``theta = 1/2 int |R|^(2 sigma)`` and ``v = i |R|^(2 sigma) R_x``::

    m = exp(i theta) v - 1/4 |h|^(4 sigma) h
    n = m_x - i/2 (sigma+1) |h|^(2 sigma) m + i/2 sigma |h|^(2(sigma-1)) h^2 conj(m)

The quartic term in ``m`` appears because ``theta_t`` must be computed along
the free flow, not along gDNLS.  ``source_form="literal"`` drops it, uses
``|R|^2`` in the phase and flips the sign of the last term of ``n``; it is
kept only for comparison runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson

from . import kernels
from .fitting import FitResult, fit_power_law
from .gauge import StatePair, gauged_nonlinear_values, modulus_power_difference
from .model import GlobalCheck, ModelParams, global_predicate
from .spectral import Field, Grid, deriv_values, h1_values, primitive_values
from .timestepper import BlowUpError, StepperConfig, Trajectory, boundary_fraction_values, evolve_gauged, evolve_gdnls

SOURCE_FORMS = ("exact", "literal")


class WaveOpError(RuntimeError):
    """Construction failed; ``kind`` is ``"smallness"``, ``"relation"`` or ``"blowup"``."""

    def __init__(self, message, kind, trajectory=None):
        super().__init__(message)
        self.kind = kind
        self.trajectory = trajectory


@dataclass(frozen=True, eq=False)
class AsymptoticState:
    """Final state ``u+`` with the time window ``[T0, TN]`` (``TN`` stands in for infinity)."""

    u_plus: Field
    sigma: float
    T0: float
    TN: float
    omega: float = 1.0
    source_form: str = "exact"

    def __post_init__(self):
        if not self.sigma > 2:
            raise ValueError(f"the wave-operator construction needs sigma > 2, got {self.sigma}")
        if not self.T0 >= 1:
            raise ValueError(f"T0 must be >= 1, got {self.T0}")
        if not self.TN > self.T0:
            raise ValueError(f"TN must exceed T0, got TN={self.TN}, T0={self.T0}")
        if self.source_form not in SOURCE_FORMS:
            raise ValueError(f"source_form must be one of {SOURCE_FORMS}")
        if not self.u_plus.is_finite():
            raise ValueError("u_plus is not finite")

    @property
    def grid(self) -> Grid:
        return self.u_plus.grid

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.sigma, self.omega)


@dataclass(frozen=True, eq=False)
class ProfileSample:
    t: float
    R: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    h: np.ndarray
    k: np.ndarray
    m: np.ndarray
    n: np.ndarray


def _profile_sample(state: AsymptoticState, t: float) -> ProfileSample:
    g, s = state.grid, state.sigma
    R_hat = g.propagator(t) * np.fft.fft(state.u_plus.values)
    R = np.fft.ifft(R_hat)
    Rx = np.fft.ifft(g.ik * R_hat)
    a2s = kernels.modulus_power(R, 2 * s)
    v = 1j * a2s * Rx
    theta = 0.5 * primitive_values(a2s, g)
    h = kernels.phase_multiply(R, theta, 1.0)
    k = kernels.phase_multiply(Rx, theta, 1.0)
    if state.source_form == "exact":
        m = kernels.phase_multiply(v, theta, 1.0) - 0.25 * a2s * a2s * h
        sign = 1.0
    else:
        theta2 = 0.5 * primitive_values(np.abs(R) ** 2, g)
        m = kernels.phase_multiply(v, theta2, 1.0)
        sign = -1.0
    n = (
        deriv_values(m, g)
        - 0.5j * (s + 1) * a2s * m
        + sign * 0.5j * s * kernels.modulus_power(h, 2 * (s - 1)) * h * h * np.conj(m)
    )
    return ProfileSample(t, R, v, theta, h, k, m, n)


def free_profile(state: AsymptoticState, t: float) -> Field:
    """``R(t) = exp(i t d_xx) u+``."""
    return Field(state.grid, _profile_sample(state, t).R)


def free_profile_v(state: AsymptoticState, t: float) -> Field:
    """``v(t) = i |R|^(2 sigma) R_x``, the defect of ``R`` as a gDNLS solution."""
    return Field(state.grid, _profile_sample(state, t).v)


def gauged_profiles(state: AsymptoticState, t: float) -> StatePair:
    """``(h, k) = (G1 R, G2 R)``."""
    s = _profile_sample(state, t)
    return StatePair(Field(state.grid, s.h), Field(state.grid, s.k))


def source_terms(state: AsymptoticState, t: float) -> StatePair:
    """``(m, n)``, the sources in ``L h = P(h, k) + m`` and ``L k = Q(h, k) + n``."""
    s = _profile_sample(state, t)
    return StatePair(Field(state.grid, s.m), Field(state.grid, s.n))


class ProfileBundle:
    """Time-indexed access to ``W = (h, k)`` and ``H = -(m, n)`` with a small cache.

    ``zero_source=True`` replaces ``H`` by zero (a test hook: the forced
    problem then has the trivial solution).  ``times`` lists every time at
    which a profile was built, in order of first request.
    """

    def __init__(self, state: AsymptoticState, zero_source: bool = False, cache_size: int = 8):
        self.state = state
        self.zero_source = zero_source
        self.cache_size = cache_size
        self.times: list = []
        self._cache: dict = {}

    def sample(self, t: float) -> ProfileSample:
        t = float(t)
        if t not in self._cache:
            if len(self._cache) >= self.cache_size:
                self._cache.pop(next(iter(self._cache)))
            self._cache[t] = _profile_sample(self.state, t)
            self.times.append(t)
        return self._cache[t]

    def W_hat(self, t: float) -> StatePair:
        s = self.sample(t)
        g = self.state.grid
        return StatePair(Field(g, s.h), Field(g, s.k))

    def H_hat(self, t: float) -> StatePair:
        g = self.state.grid
        if self.zero_source:
            return StatePair.zeros(g)
        s = self.sample(t)
        return StatePair(Field(g, -s.m), Field(g, -s.n))

    def source_h1(self, t: float) -> float:
        if self.zero_source:
            return 0.0
        s = self.sample(t)
        g = self.state.grid
        return h1_values(s.m, g) + h1_values(s.n, g)


def choose_final_time(
    u_plus: Field, sigma: float, T0: float, tail_tol: float = 1e-6, min_factor: int = 16, max_doublings: int = 12
) -> float:
    """Smallest ``T0 * 2^j`` (``2^j >= min_factor``) with ``||(m, n)(T)||_H1 < tail_tol``.

    ``min_factor=16`` leaves a fit window ``[T0, TN/2]`` spanning a factor 8.
    """
    state = AsymptoticState(u_plus, sigma, T0, T0 * min_factor)
    j = int(math.ceil(math.log2(min_factor)))
    while j <= max_doublings:
        T = T0 * 2**j
        s = _profile_sample(state, T)
        if h1_values(s.m, state.grid) + h1_values(s.n, state.grid) < tail_tol:
            return T
        j += 1
    raise WaveOpError(f"source tail above {tail_tol} up to T={T0 * 2**max_doublings}", "smallness")


def geometric_times(T0: float, TN: float, n: int) -> np.ndarray:
    """``n`` log-spaced times from ``T0`` to ``TN`` inclusive."""
    return np.geomspace(T0, TN, n)


# --- the fixed point ------------------------------------------------------


def solve_final_value(
    state: AsymptoticState,
    bundle: ProfileBundle,
    cfg: StepperConfig,
    record_times: Optional[Sequence[float]] = None,
    h1_limit: float = 1.0,
) -> Trajectory:
    """Integrate the forced gauged system backward from ``eta~(TN) = 0`` to ``T0``.

    ``cfg`` supplies step size, dealiasing and guard settings; its time
    interval is replaced by ``[TN -> T0]``.

    Raises
    ------
    WaveOpError
        ``kind="smallness"`` if ``||eta~(T0)||_H1`` exceeds ``h1_limit``,
        ``kind="blowup"`` if the sup-norm guard fires.
    """
    cfg = replace(cfg, t_start=state.TN, t_end=state.T0)
    p = state.params
    try:
        traj = evolve_gauged(
            StatePair.zeros(state.grid), cfg, p, forcing=bundle.H_hat, background=bundle.W_hat, record_times=record_times
        )
    except BlowUpError as exc:
        raise WaveOpError(str(exc), "blowup", exc.trajectory) from exc
    size = traj.final.h1()
    if size > h1_limit:
        raise WaveOpError(f"||eta~(T0)||_H1 = {size:.3e} leaves the small-solution regime", "smallness", traj)
    return traj


def _cumulative_simpson_complex(y, dx):
    # scipy's cumulative_simpson drops imaginary parts
    re = cumulative_simpson(y.real, dx=dx, axis=0, initial=0.0)
    im = cumulative_simpson(y.imag, dx=dx, axis=0, initial=0.0)
    return re + 1j * im


@dataclass(frozen=True, eq=False)
class PicardResult:
    eta_T0: StatePair
    gaps: list
    ratios: list
    contracted: bool
    iterations: int
    times: np.ndarray


def picard_oracle(
    state: AsymptoticState,
    bundle: ProfileBundle,
    iterations: int,
    ds: float = 0.01,
    keep_fraction: float = 0.5,
    floor: float = 1e-13,
) -> PicardResult:
    """Iterate ``eta~_{j+1}(t) = i int_t^TN exp(i(t-s) d_xx) G_j(s) ds`` from ``eta~_0 = 0``.

    ``G_j = F(eta~_j + W) - F(W) + H``.  The integral is evaluated in the
    interaction picture with composite Simpson quadrature on a uniform time
    mesh of spacing about ``ds``.  Iteration stops early once the gap reaches
    ``floor`` times the iterate size (rounding level).  ``contracted`` is
    false if a gap above that floor increased.  Meant for coarse instances:
    memory grows as (number of time nodes) x n_points.
    """
    if iterations < 1:
        raise ValueError("iterations must be positive")
    g, s = state.grid, state.sigma
    n_int = int(math.ceil((state.TN - state.T0) / ds))
    n_int += n_int % 2
    ts = np.linspace(state.T0, state.TN, n_int + 1)
    mask = (np.abs(g.wavenumbers) <= keep_fraction * g.k_max).astype(float)
    W = np.empty((ts.size, 2, g.n_points), complex)
    S = np.empty_like(W)  # -F(W) + H
    for j, t in enumerate(ts):
        smp = _profile_sample(state, t)
        W[j] = smp.h, smp.k
        FW = gauged_nonlinear_values(smp.h, smp.k, g, s, 1.0)
        H = (0.0, 0.0) if bundle.zero_source else (-smp.m, -smp.n)
        S[j] = H[0] - FW[0], H[1] - FW[1]
    phase_in = np.exp(1j * np.outer(ts, g.k_squared))[:, None, :]  # exp(+i k^2 s)

    eta = np.zeros_like(W)
    gaps, ratios = [], []
    contracted = True
    done = 0
    for it in range(iterations):
        G = np.empty_like(W)
        for j in range(ts.size):
            P, Q = gauged_nonlinear_values(eta[j, 0] + W[j, 0], eta[j, 1] + W[j, 1], g, s, 1.0)
            G[j] = P + S[j, 0], Q + S[j, 1]
        Y = phase_in * (mask * np.fft.fft(G, axis=-1))
        C = _cumulative_simpson_complex(Y[::-1], ts[1] - ts[0])[::-1]
        new = np.fft.ifft(np.conj(phase_in) * (1j * C), axis=-1)
        diff = new - eta
        gap = max(h1_values(d[0], g) + h1_values(d[1], g) for d in diff)
        size = max(h1_values(d[0], g) + h1_values(d[1], g) for d in new)
        eta = new
        done = it + 1
        if gaps:
            ratios.append(gap / gaps[-1] if gaps[-1] > 0 else 0.0)
            if gap > gaps[-1] and gap > floor * max(size, 1e-300):
                contracted = False
        gaps.append(gap)
        if gap <= floor * size or gap == 0.0:
            break
    eta_T0 = StatePair(Field(g, eta[0, 0]), Field(g, eta[0, 1]))
    return PicardResult(eta_T0, gaps, ratios, contracted, done, ts)


# --- reconstruction -------------------------------------------------------


def u_minus_R_values(eta_phi: np.ndarray, sample: ProfileSample, grid: Grid, sigma: float) -> np.ndarray:
    """``u - R`` for ``u = G1^{-1}(phi~ + h)``, free of cancellation.

    With ``Delta = theta_u - theta_R = 1/2 int (|phi~+h|^(2s) - |h|^(2s))``:
    ``u - R = exp(-i theta_u) phi~ + R expm1(-i Delta)``.
    """
    delta = 0.5 * primitive_values(modulus_power_difference(eta_phi, sample.h, sigma), grid, rtol=None)
    theta_u = sample.theta + delta
    return kernels.phase_multiply(eta_phi, theta_u, -1.0) + sample.R * np.expm1(-1j * delta)


@dataclass(frozen=True, eq=False)
class WaveOpReport:
    """Evidence gathered by :func:`reconstruct_and_extend` (series sorted by time).

    ``ux_sup`` is ``sup_x |u_x|`` at each recorded time, reported as evidence
    that ``u_x`` stays bounded on the computed window; it certifies nothing
    beyond that window.
    """

    eta_tilde_trajectory: Trajectory
    times: np.ndarray
    relation_residual_series: np.ndarray
    relation_relative_series: np.ndarray
    u_minus_R_h1: np.ndarray
    ux_sup: np.ndarray
    eta_tilde_h1: np.ndarray
    source_h1: np.ndarray
    rate_fit: FitResult
    source_fit: FitResult
    tilde_eta_ratio: float
    fit_window: tuple
    u_T0: Field
    u0: Optional[Field]
    extension_ok: bool
    last_good_time: float
    global_check: GlobalCheck
    truncation_estimate: float
    tainted: bool
    warnings: list = field(default_factory=list)

    @property
    def global_flag(self) -> bool:
        return self.global_check.holds

    def summary(self) -> dict:
        return {
            "rate_fit": self.rate_fit.to_dict(),
            "source_fit": self.source_fit.to_dict(),
            "tilde_eta_ratio": self.tilde_eta_ratio,
            "fit_window": list(self.fit_window),
            "max_relation_residual": float(np.max(self.relation_residual_series)),
            "max_relation_relative": float(np.max(self.relation_relative_series)),
            "eta_tilde_h1_T0": float(self.eta_tilde_h1[0]),
            "max_ux_sup": float(np.max(self.ux_sup)),
            "extension_ok": self.extension_ok,
            "last_good_time": self.last_good_time,
            "global_flag": bool(self.global_check.holds),
            "global_margin": self.global_check.margin,
            "truncation_estimate": self.truncation_estimate,
            "tainted": self.tainted,
            "warnings": list(self.warnings),
        }


def reconstruct_and_extend(
    state: AsymptoticState,
    eta_tilde: Trajectory,
    cfg: StepperConfig,
    p: Optional[ModelParams] = None,
    bundle: Optional[ProfileBundle] = None,
    fit_window: Optional[tuple] = None,
    relation_tol: float = 1e-4,
    extend: bool = True,
) -> WaveOpReport:
    """Rebuild ``u`` on the recorded times, fit decay rates and continue ``u`` to ``t = 0``.

    The fit window defaults to ``[T0, TN/2]``; the upper half is left out
    because it feels the artificial final time.  A failed backward extension
    is reported (``extension_ok=False`` with the last good time), not raised.

    Raises
    ------
    WaveOpError
        ``kind="relation"`` if the relation defect at ``T0`` exceeds
        ``relation_tol * (1 + ||eta~(T0)||_H1)``.
    """
    p = p or state.params
    if p.sigma != state.sigma:
        raise ValueError("model sigma differs from the asymptotic state")
    bundle = bundle or ProfileBundle(state)
    g, s = state.grid, state.sigma
    order = np.argsort(eta_tilde.times)
    times = eta_tilde.times[order]
    rel = eta_tilde.invariant_series["relation_residual"][order]
    eta_h1 = eta_tilde.invariant_series["h1"][order]
    rel_relative = rel / (1.0 + eta_h1)
    warnings_: list = []

    # |u_x| = |psi~ + k| pointwise, so sup|u_x| needs no reconstruction
    umr, src, uxs = [], [], []
    for i in order:
        t = float(eta_tilde.times[i])
        smp = bundle.sample(t)
        snap = eta_tilde.snapshots[i]
        d = u_minus_R_values(snap.phi.values, smp, g, s)
        umr.append(h1_values(d, g))
        src.append(bundle.source_h1(t))
        uxs.append(float(np.max(np.abs(snap.psi.values + smp.k))))
    umr, src, uxs = np.asarray(umr), np.asarray(src), np.asarray(uxs)

    i0 = int(np.argmin(np.abs(times - state.T0)))
    if abs(times[i0] - state.T0) > 1e-9 * state.T0:
        raise ValueError("eta~ trajectory does not reach T0")
    if rel_relative[i0] > relation_tol:
        raise WaveOpError(f"relation defect {rel[i0]:.3e} at T0 exceeds tolerance", "relation", eta_tilde)

    window = fit_window or (state.T0, 0.5 * state.TN)
    rate = fit_power_law(times, umr, window)
    source = fit_power_law(times, src, window)
    if rate.n_points < 8 or window[1] < 8 * window[0]:
        warnings_.append(f"fit window {window} has {rate.n_points} samples (want >= 8 over a factor 8)")
    if rate.degenerate:
        warnings_.append("rate fit degenerate (u - R vanishes)")

    in_win = (times >= window[0] * (1 - 1e-12)) & (times <= window[1] * (1 + 1e-12))
    scaled = eta_h1[in_win] * times[in_win] ** (s - 1)
    tilde_ratio = float(np.max(scaled) / np.min(scaled)) if scaled.size and np.min(scaled) > 0 else float("nan")

    # tail beyond TN: int_TN^inf C t^(-sigma) dt with C from the source fit
    if source.degenerate:
        trunc = 0.0
    else:
        trunc = float(math.exp(source.intercept) * state.TN ** (1 + source.slope) / max(-(1 + source.slope), 1e-12))

    smp0 = bundle.sample(state.T0)
    phi0 = eta_tilde.snapshots[order[i0]].phi.values
    u_T0 = Field(g, smp0.R + u_minus_R_values(phi0, smp0, g, s))

    tainted = False
    r_end = bundle.sample(times[-1]).R
    bfrac = max(boundary_fraction_values(r_end, g), float(np.max(eta_tilde.invariant_series["boundary_mass"])))
    if bfrac > p.boundary_tolerance:
        tainted = True
        warnings_.append(f"boundary mass fraction {bfrac:.2e} exceeds {p.boundary_tolerance:.0e}")

    u0, ok, last_good = None, True, state.T0
    if extend:
        back = replace(cfg, t_start=state.T0, t_end=0.0)
        try:
            traj = evolve_gdnls(u_T0, back, p)
            u0, last_good = traj.final, 0.0
        except BlowUpError as exc:
            ok, last_good = False, exc.last_good_time
            warnings_.append(f"backward extension stopped: {exc}")

    gc = global_predicate(state.u_plus, ModelParams(s, state.omega))
    return WaveOpReport(
        eta_tilde_trajectory=eta_tilde,
        times=times,
        relation_residual_series=rel,
        relation_relative_series=rel_relative,
        u_minus_R_h1=umr,
        ux_sup=uxs,
        eta_tilde_h1=eta_h1,
        source_h1=src,
        rate_fit=rate,
        source_fit=source,
        tilde_eta_ratio=tilde_ratio,
        fit_window=tuple(window),
        u_T0=u_T0,
        u0=u0,
        extension_ok=ok,
        last_good_time=last_good,
        global_check=gc,
        truncation_estimate=trunc,
        tainted=tainted,
        warnings=warnings_,
    )


def run_wave_operator(
    u_plus: Field,
    sigma: float,
    T0: float,
    TN: Optional[float] = None,
    dt: float = 0.05,
    omega: float = 1.0,
    n_records: int = 33,
    tail_tol: float = 1e-6,
    source_form: str = "exact",
    dealias_fraction: float = 0.5,
    extend: bool = True,
    boundary_tolerance: float = 1e-6,
    fit_window: Optional[tuple] = None,
    max_linf_growth: float = 1e3,
) -> WaveOpReport:
    """The whole pipeline with log-spaced records; ``TN=None`` picks it by :func:`choose_final_time`."""
    if TN is None:
        TN = choose_final_time(u_plus, sigma, T0, tail_tol)
    state = AsymptoticState(u_plus, sigma, T0, TN, omega, source_form)
    bundle = ProfileBundle(state)
    cfg = StepperConfig(
        dt=dt, t_start=TN, t_end=T0, dealias_fraction=dealias_fraction, max_linf_growth=max_linf_growth
    )
    traj = solve_final_value(state, bundle, cfg, record_times=geometric_times(T0, TN, n_records))
    p = ModelParams(sigma, omega, boundary_tolerance=boundary_tolerance)
    return reconstruct_and_extend(state, traj, cfg, p, bundle, fit_window=fit_window, extend=extend)


def truncation_uniqueness(state: AsymptoticState, cfg: StepperConfig, factor: float = 1.25) -> float:
    """``||eta~_TN(T0) - eta~_TN'(T0)||_H1`` for ``TN' = factor * TN``.

    Two constructions that differ only in where infinity is cut should agree
    at ``T0``; the returned distance is evidence, not a proof, of uniqueness.
    """
    a = solve_final_value(state, ProfileBundle(state), cfg)
    other = replace(state, TN=state.TN * factor)
    b = solve_final_value(other, ProfileBundle(other), cfg)
    return (a.final - b.final).h1()
