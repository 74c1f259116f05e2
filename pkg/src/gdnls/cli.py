"""Command-line front end: ``gdnls <command> --config run.yaml [--out DIR] [--seed N]``.

Relative output directories are resolved against ``$GDNLS_OUTPUT_ROOT``
(default: the working directory).  Exit codes: 0 success, 2 validation,
3 blow-up, 4 taint (boundary-mass violation), 5 no convergence.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, kernels
from .config import (
    COMMANDS,
    ConfigError,
    RunConfig,
    config_from_dict,
    initial_field,
    load_raw,
    point_config,
    sweep_points,
)
from .gauge import gauge_pair
from .io import GAUGED_COLUMNS, GDNLS_COLUMNS, series_rows, write_csv, write_report, write_snapshot
from .model import ModelParams, action_S, energy, global_predicate, mass, momentum, mu_omega0, nehari_K
from .scatter import scatter_from_physical
from .spectral import Field
from .timestepper import (
    EXACT,
    BlowUpError,
    evolve_gauged,
    evolve_gdnls,
    invariant_drifts,
    self_convergence_order,
)
from .waveop import WaveOpError, run_wave_operator

log = logging.getLogger("gdnls")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BLOWUP = 3
EXIT_TAINT = 4
EXIT_NO_CONVERGENCE = 5

OUTPUT_ROOT_ENV = "GDNLS_OUTPUT_ROOT"

DRIFT_TOL = 1e-6
RELATION_TOL = 1e-5


@dataclass
class RunResult:
    exit_code: int
    status: str
    out_dir: Path
    report: dict
    metrics: dict = field(default_factory=dict)


class _Outcome:
    """Mutable pieces of a report filled by the command runners."""

    def __init__(self):
        self.results: dict = {}
        self.verdicts: dict = {}
        self.warnings: list = []
        self.metrics: dict = {}
        self.status = "ok"
        self.exit_code = EXIT_OK

    def verdict(self, name, ok):
        self.verdicts[name] = "pass" if ok else "fail"

    def fail(self, status, code):
        # keep the first (most specific) failure
        if self.exit_code == EXIT_OK:
            self.status, self.exit_code = status, code


def resolve_output_dir(cfg: RunConfig, override=None) -> Path:
    d = Path(override if override is not None else cfg.outputs.directory)
    if d.is_absolute():
        return d
    return Path(os.environ.get(OUTPUT_ROOT_ENV, ".")) / d


# --- command runners ------------------------------------------------------


def _write_series(cfg, out: Path, name, columns, times, series):
    if "csv" in cfg.outputs.formats:
        write_csv(out / name, columns, series_rows(times, series, columns))


def _snap(cfg, out: Path, name, f: Field, t, sigma):
    if "snapshot" in cfg.outputs.formats:
        write_snapshot(out / "snapshots" / name, f, t, sigma)


def _run_simulate(cfg: RunConfig, out: Path, oc: _Outcome):
    p = cfg.params()
    u0 = initial_field(cfg)
    scfg = cfg.stepper_config()
    gauged = cfg.simulate.system == "gauged"
    try:
        if gauged:
            traj = evolve_gauged(gauge_pair(u0, p), scfg, p)
        else:
            traj = evolve_gdnls(u0, scfg, p)
    except BlowUpError as exc:
        oc.fail("blowup", EXIT_BLOWUP)
        oc.warnings.append(str(exc))
        oc.results["blowup_time"] = exc.time
        oc.results["last_good_time"] = exc.last_good_time
        traj = exc.trajectory
        if traj is None or len(traj) == 0:
            return
    cols = GAUGED_COLUMNS if gauged else GDNLS_COLUMNS
    _write_series(cfg, out, "series.csv", cols, traj.times, traj.invariant_series)
    for i, (t, s) in enumerate(zip(traj.times, traj.snapshots)):
        if gauged:
            _snap(cfg, out, f"phi_{i:05d}.snap", s.phi, t, p.sigma)
            _snap(cfg, out, f"psi_{i:05d}.snap", s.psi, t, p.sigma)
        else:
            _snap(cfg, out, f"u_{i:05d}.snap", s, t, p.sigma)

    ser = traj.invariant_series
    bfrac = traj.boundary_fraction
    oc.results.update(
        {
            "system": cfg.simulate.system,
            "t_final": float(traj.times[-1]),
            "n_records": len(traj),
            "max_boundary_fraction": bfrac,
            "final_h1": float(ser["h1"][-1]),
            "final_linf": float(ser["linf"][-1]),
        }
    )
    oc.metrics.update({"final_h1": float(ser["h1"][-1]), "max_boundary_fraction": bfrac})
    if gauged:
        rel = ser["relation_residual"] / (1.0 + ser["h1"])
        oc.results["max_relation_relative"] = float(np.max(rel))
        oc.metrics["max_relation_relative"] = float(np.max(rel))
        oc.verdict("relation_residual", np.max(rel) < RELATION_TOL)
    else:
        drifts = invariant_drifts(traj)
        oc.results["relative_drift"] = drifts
        for k, v in drifts.items():
            oc.metrics[f"{k}_drift"] = v
            oc.verdict(f"{k}_conservation", v < DRIFT_TOL)
    oc.verdict("boundary_mass", bfrac <= p.boundary_tolerance)
    if bfrac > p.boundary_tolerance:
        oc.warnings.append(f"boundary mass fraction {bfrac:.2e} exceeds {p.boundary_tolerance:.0e}")
        oc.fail("tainted", EXIT_TAINT)


def _run_waveop(cfg: RunConfig, out: Path, oc: _Outcome):
    p = cfg.params()
    w, st = cfg.waveop, cfg.stepper
    u_plus = initial_field(cfg)
    try:
        rep = run_wave_operator(
            u_plus,
            p.sigma,
            w.T0,
            TN=w.TN,
            dt=st.dt,
            omega=p.omega,
            n_records=w.n_records,
            tail_tol=w.tail_tol,
            source_form=w.source_form,
            dealias_fraction=st.dealias_fraction,
            extend=w.extend,
            boundary_tolerance=p.boundary_tolerance,
            fit_window=tuple(w.fit_window) if w.fit_window else None,
            max_linf_growth=st.max_linf_growth,
        )
    except WaveOpError as exc:
        oc.warnings.append(str(exc))
        oc.results["failure_kind"] = exc.kind
        if exc.kind == "blowup":
            oc.fail("blowup", EXIT_BLOWUP)
        else:
            oc.fail("no-convergence", EXIT_NO_CONVERGENCE)
        return
    except BlowUpError as exc:
        oc.warnings.append(str(exc))
        oc.fail("blowup", EXIT_BLOWUP)
        return

    traj = rep.eta_tilde_trajectory
    order = np.argsort(traj.times)
    if "csv" in cfg.outputs.formats:
        cols = GAUGED_COLUMNS + ("u_minus_R_h1", "source_h1")
        ser = {k: np.asarray(v)[order] for k, v in traj.invariant_series.items()}
        ser["u_minus_R_h1"] = rep.u_minus_R_h1
        ser["source_h1"] = rep.source_h1
        write_csv(out / "series.csv", cols, series_rows(rep.times, ser, cols))
    _snap(cfg, out, "u_T0.snap", rep.u_T0, w.T0, p.sigma)
    if rep.u0 is not None:
        _snap(cfg, out, "u0.snap", rep.u0, 0.0, p.sigma)

    summ = rep.summary()
    oc.warnings.extend(summ.pop("warnings"))
    oc.results.update(summ)
    oc.results["T0"], oc.results["TN"] = w.T0, float(rep.times[-1])
    bound = 1.0 - p.sigma + 0.5
    oc.results["rate_bound"] = bound
    oc.verdict("rate_slope", rep.rate_fit.slope <= bound)
    oc.verdict("tilde_eta_bounded", rep.tilde_eta_ratio < 20.0)
    oc.verdict("relation_residual", float(np.max(rep.relation_relative_series)) < 1e-4)
    oc.verdict("global_predicate", rep.global_flag)
    if w.extend:
        oc.verdict("backward_extension", rep.extension_ok)
    oc.metrics.update(
        {
            "rate_slope": rep.rate_fit.slope,
            "rate_residual": rep.rate_fit.residual,
            "rate_n_points": rep.rate_fit.n_points,
            "rate_bound": bound,
            "source_slope": rep.source_fit.slope,
            "tilde_eta_ratio": rep.tilde_eta_ratio,
            "global_flag": rep.global_flag,
            "extension_ok": rep.extension_ok,
        }
    )
    if rep.tainted:
        oc.fail("tainted", EXIT_TAINT)


def _run_scatter(cfg: RunConfig, out: Path, oc: _Outcome):
    p = cfg.params()
    s, st = cfg.scatter, cfg.stepper
    u0 = initial_field(cfg)
    try:
        rep = scatter_from_physical(
            u0,
            p,
            s.horizon,
            dt=st.dt,
            first_check=s.first_check,
            smallness=s.smallness,
            gap_tol=s.gap_tol,
            dealias_fraction=st.dealias_fraction,
            startup_time=st.startup_time,
            startup_dt=st.startup_dt,
        )
    except BlowUpError as exc:
        oc.warnings.append(str(exc))
        oc.fail("blowup", EXIT_BLOWUP)
        return

    if "csv" in cfg.outputs.formats:
        rows = []
        for r in (rep.plus, rep.minus):
            for t, g in zip(r.check_times[1:], r.cauchy_gaps):
                rows.append([r.direction, t, g])
        write_csv(out / "cauchy_gaps.csv", ("direction", "t", "cauchy_gap"), rows)
        write_csv(out / "direct_check.csv", ("t", "direct_distance"), zip(rep.direct_times, rep.direct_values))
        tr = rep.physical_trajectory
        _write_series(cfg, out, "series.csv", GDNLS_COLUMNS, tr.times, tr.invariant_series)
    for r, tag in ((rep.plus, "plus"), (rep.minus, "minus")):
        if r.extracted is not None:
            t = float(r.check_times[-1])
            _snap(cfg, out, f"phi_{tag}.snap", r.extracted.phi, t, p.sigma)
            _snap(cfg, out, f"psi_{tag}.snap", r.extracted.psi, t, p.sigma)

    summ = rep.summary()
    for key in ("plus", "minus"):
        oc.warnings.extend(summ[key]["warnings"])
    oc.results.update(summ)
    dv, dt_ = rep.direct_values, rep.direct_times
    i_hi = int(np.argmin(np.abs(dt_ - s.horizon)))
    i_lo = min(1, len(dv) - 1)
    oc.verdict("gaps_decreasing_plus", rep.plus.gaps_decreasing)
    oc.verdict("gaps_decreasing_minus", rep.minus.gaps_decreasing)
    oc.verdict("horizon_drift", max(rep.horizon_drift_plus, rep.horizon_drift_minus) < s.gap_tol)
    oc.verdict("direct_check_decreasing", dv[i_hi] < dv[i_lo])
    oc.verdict("gauge_path_consistency", rep.gauge_path_defect < 1e-4)
    oc.metrics.update(
        {
            "verdict_plus": rep.plus.verdict,
            "verdict_minus": rep.minus.verdict,
            "stability_gap_plus": rep.plus.stability_gap,
            "stability_gap_minus": rep.minus.stability_gap,
            "gauge_path_defect": rep.gauge_path_defect,
            "time_reversal_defect": rep.time_reversal_defect,
        }
    )
    if "no-convergence" in (rep.plus.verdict, rep.minus.verdict):
        oc.fail("no-convergence", EXIT_NO_CONVERGENCE)
    if rep.plus.tainted or rep.minus.tainted:
        oc.fail("tainted", EXIT_TAINT)


def _run_functionals(cfg: RunConfig, out: Path, oc: _Outcome):
    p = cfg.params()
    u = initial_field(cfg)
    vals = {
        "mass": mass(u),
        "energy": energy(u, p),
        "momentum": momentum(u),
        "action": action_S(u, p),
        "nehari": nehari_K(u, p),
    }
    if p.c == 0.0:
        vals["mu"] = mu_omega0(p)
        gc = global_predicate(u, p)
        vals.update({"global_lhs": gc.lhs, "global_bound": gc.bound, "global_margin": gc.margin})
        oc.results["global_predicate"] = bool(gc.holds)
        oc.metrics["global_predicate"] = bool(gc.holds)
    oc.results.update(vals)
    oc.metrics.update(vals)
    if cfg.initial_condition.family == "ground_state" and p.c == 0.0:
        ux = np.fft.ifft(u.grid.ik * np.fft.fft(u.values))
        scale = float(np.sum(np.abs(ux) ** 2) * u.grid.dx) + p.omega * vals["mass"]
        oc.verdict("nehari_zero", abs(vals["nehari"]) < 1e-6 * scale)
        oc.verdict("action_equals_mu", abs(vals["action"] - vals["mu"]) < 1e-6 * vals["mu"])
    if "csv" in cfg.outputs.formats:
        cols = tuple(sorted(vals))
        write_csv(out / "functionals.csv", cols, [vals])


def _run_convergence(cfg: RunConfig, out: Path, oc: _Outcome):
    rows, orders = [], {}
    for name in cfg.convergence.problems:
        order = self_convergence_order(name, cfg.convergence.dt0)
        exact = order == EXACT
        orders[name] = "exact" if exact else order
        ok = exact or 3.5 <= order <= 4.5
        oc.verdict(f"order_{name}", ok)
        oc.metrics[f"order_{name}"] = orders[name]
        rows.append([name, "exact" if exact else order])
        if not ok:
            oc.fail("no-convergence", EXIT_NO_CONVERGENCE)
    oc.results["orders"] = orders
    oc.results["dt0"] = cfg.convergence.dt0
    if "csv" in cfg.outputs.formats:
        write_csv(out / "convergence.csv", ("problem", "order"), rows)


RUNNERS = {
    "simulate": _run_simulate,
    "waveop": _run_waveop,
    "scatter": _run_scatter,
    "functionals": _run_functionals,
    "convergence": _run_convergence,
}


def _report(cfg: RunConfig, oc: _Outcome) -> dict:
    return {
        "command": cfg.command,
        "config": cfg.echo(),
        "version": __version__,
        "backend": kernels.BACKEND,
        "status": oc.status,
        "exit_code": oc.exit_code,
        "results": oc.results,
        "verdicts": oc.verdicts,
        "warnings": oc.warnings,
    }


def run(cfg: RunConfig, out=None) -> RunResult:
    """Execute one validated config, writing artifacts under the output directory."""
    out_dir = resolve_output_dir(cfg, out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.command == "sweep":
        return run_sweep(cfg, out_dir)
    oc = _Outcome()
    try:
        RUNNERS[cfg.command](cfg, out_dir, oc)
    except ConfigError:
        raise
    except ValueError as exc:
        # data-dependent precondition failures (e.g. smallness of the scattering datum)
        oc.warnings.append(str(exc))
        oc.fail("validation", EXIT_VALIDATION)
    report = _report(cfg, oc)
    if "json" in cfg.outputs.formats:
        write_report(out_dir / "report.json", report)
    return RunResult(oc.exit_code, oc.status, out_dir, report, oc.metrics)


# --- sweeps ---------------------------------------------------------------


def _sweep_row(args):
    raw, base_dir, row_dir = args
    try:
        sub = config_from_dict(raw, base_dir)
        res = run(sub, row_dir)
        msg = "; ".join(res.report.get("warnings", [])) if res.exit_code != EXIT_OK else ""
        return {"status": res.status, "exit_code": res.exit_code, "metrics": res.metrics, "message": msg}
    except ConfigError as exc:
        return {"status": "validation", "exit_code": EXIT_VALIDATION, "metrics": {}, "message": str(exc)}
    except Exception as exc:  # noqa: BLE001 - one failing row must not stop the sweep
        return {"status": "error", "exit_code": 1, "metrics": {}, "message": f"{type(exc).__name__}: {exc}"}


def run_sweep(cfg: RunConfig, out_dir: Path) -> RunResult:
    """Run every point of the Cartesian range; failures are recorded per row.

    Rows run in separate subdirectories ``row_NNN``.  With ``workers > 1`` they
    run in worker processes; the table is assembled in row order either way.
    """
    points = sweep_points(cfg)
    jobs = [(point_config(cfg, pt), cfg.base_dir, out_dir / f"row_{i:03d}") for i, pt in enumerate(points)]
    if cfg.sweep.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.sweep.workers) as pool:
            outcomes = list(pool.map(_sweep_row, jobs))
    else:
        outcomes = [_sweep_row(j) for j in jobs]

    keys = sorted(cfg.sweep.parameters)
    metric_keys = sorted({k for o in outcomes for k in o["metrics"]})
    cols = ("row", *keys, "status", "exit_code", *metric_keys, "message")
    rows = []
    for i, (pt, o) in enumerate(zip(points, outcomes)):
        row = {"row": i, "status": o["status"], "exit_code": o["exit_code"], "message": o["message"]}
        row.update(pt)
        row.update(o["metrics"])
        rows.append(row)
    if "csv" in cfg.outputs.formats:
        write_csv(out_dir / "sweep.csv", cols, rows)
    failed = [r["row"] for r in rows if r["exit_code"] != EXIT_OK]
    report = {
        "command": "sweep",
        "config": cfg.echo(),
        "version": __version__,
        "backend": kernels.BACKEND,
        "status": "ok",
        "exit_code": EXIT_OK,
        "results": {"rows": rows, "n_rows": len(rows), "failed_rows": failed},
        "verdicts": {},
        "warnings": [f"row {i} failed" for i in failed],
    }
    if "json" in cfg.outputs.formats:
        write_report(out_dir / "report.json", report)
    return RunResult(EXIT_OK, "ok", out_dir, report, {"n_rows": len(rows), "n_failed": len(failed)})


# --- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gdnls", description="gDNLS pseudospectral laboratory")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="YAML run configuration")
    ap.add_argument("--out", default=None, help="output directory (overrides outputs.directory)")
    ap.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def load_for_command(path, command: str, seed: Optional[int] = None) -> RunConfig:
    raw = load_raw(path)
    if "command" in raw and raw["command"] != command:
        raise ConfigError("command", f"config is for {raw['command']!r} but {command!r} was requested")
    raw["command"] = command
    if seed is not None:
        raw["seed"] = seed
    return config_from_dict(raw, base_dir=str(Path(path).parent))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = load_for_command(args.config, args.command, args.seed)
    except ConfigError as exc:
        print(f"gdnls: invalid config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    log.info("running %s into %s", cfg.command, resolve_output_dir(cfg, args.out))
    try:
        res = run(cfg, args.out)
    except ConfigError as exc:
        print(f"gdnls: invalid config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    for w in res.report.get("warnings", []):
        print(f"gdnls: warning: {w}", file=sys.stderr)
    fails = [k for k, v in res.report.get("verdicts", {}).items() if v == "fail"]
    print(f"{cfg.command}: {res.status} (exit {res.exit_code}) -> {res.out_dir}" + (f"; failed checks: {', '.join(fails)}" if fails else ""))
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
