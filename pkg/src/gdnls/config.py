"""Run configuration: YAML schema, validation and initial conditions.

A config is a YAML mapping.  Every section is optional except ``command``
and ``model.sigma``; omitted keys take the defaults of the dataclasses
below.  Unknown keys are errors that name the offending key path::

    command: simulate            # simulate|waveop|scatter|functionals|sweep|convergence
    seed: 0
    model: {sigma: 3.0, omega: 1.0, c: 0.0, boundary_tolerance: 1.0e-6}
    grid: {n_points: 1024, domain_length: 251.327}
    stepper: {dt: 0.01, t_start: 0.0, t_end: 10.0, record_every: 10,
              dealias_fraction: 0.5, max_linf_growth: 1000.0,
              startup_time: 0.0, startup_dt: null}
    initial_condition: {family: gaussian, amplitude: 0.5, width: 1.0,
                        phase_velocity: 0.0, center: 0.0, noise: 0.0}
    simulate: {system: gdnls}
    waveop: {T0: 8.0, TN: null, tail_tol: 1.0e-6, n_records: 33,
             source_form: exact, extend: true, fit_window: null}
    scatter: {horizon: 64.0, first_check: 8.0, smallness: 0.2, gap_tol: 1.0e-4}
    convergence: {problems: [linear, gdnls-sigma1, gauged-sigma3], dt0: 0.025}
    sweep: {command: waveop, parameters: {model.sigma: [2.5, 3.0, 4.0]}, workers: 1}
    outputs: {directory: runs/default, formats: [csv, json, snapshot]}
"""

from __future__ import annotations

import copy
import dataclasses
import itertools
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .model import ModelParams, ground_state_profile
from .spectral import Field, Grid
from .timestepper import CONVERGENCE_PROBLEMS, StepperConfig

COMMANDS = ("simulate", "waveop", "scatter", "functionals", "sweep", "convergence")
FAMILIES = ("gaussian", "ground_state", "file")
FORMATS = ("csv", "json", "snapshot")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` is the dotted key path at fault."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class ModelSection:
    sigma: float
    omega: float = 1.0
    c: float = 0.0
    boundary_tolerance: float = 1e-6


@dataclass(frozen=True)
class GridSection:
    n_points: int = 1024
    domain_length: float = 80 * np.pi


@dataclass(frozen=True)
class StepperSection:
    dt: float = 0.01
    t_start: float = 0.0
    t_end: float = 10.0
    record_every: int = 10
    dealias_fraction: float = 0.5
    max_linf_growth: float = 1e3
    startup_time: float = 0.0
    startup_dt: Optional[float] = None


@dataclass(frozen=True)
class InitialSection:
    family: str = "gaussian"
    amplitude: float = 0.5
    width: float = 1.0
    phase_velocity: float = 0.0
    center: float = 0.0
    noise: float = 0.0
    omega: Optional[float] = None
    path: Optional[str] = None


@dataclass(frozen=True)
class SimulateSection:
    system: str = "gdnls"


@dataclass(frozen=True)
class WaveopSection:
    T0: float = 8.0
    TN: Optional[float] = None
    tail_tol: float = 1e-6
    n_records: int = 33
    source_form: str = "exact"
    extend: bool = True
    fit_window: Optional[list] = None


@dataclass(frozen=True)
class ScatterSection:
    horizon: float = 64.0
    first_check: float = 8.0
    smallness: float = 0.2
    gap_tol: float = 1e-4


@dataclass(frozen=True)
class ConvergenceSection:
    problems: list = field(default_factory=lambda: list(CONVERGENCE_PROBLEMS))
    dt0: float = 0.025


@dataclass(frozen=True)
class SweepSection:
    command: str = "simulate"
    parameters: dict = field(default_factory=dict)
    workers: int = 1


@dataclass(frozen=True)
class OutputSection:
    directory: str = "runs/default"
    formats: list = field(default_factory=lambda: list(FORMATS))


SECTIONS = {
    "model": ModelSection,
    "grid": GridSection,
    "stepper": StepperSection,
    "initial_condition": InitialSection,
    "simulate": SimulateSection,
    "waveop": WaveopSection,
    "scatter": ScatterSection,
    "convergence": ConvergenceSection,
    "sweep": SweepSection,
    "outputs": OutputSection,
}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration.  ``raw`` keeps the normalized mapping for echoing."""

    command: str
    seed: int
    model: ModelSection
    grid: GridSection
    stepper: StepperSection
    initial_condition: InitialSection
    simulate: SimulateSection
    waveop: WaveopSection
    scatter: ScatterSection
    convergence: ConvergenceSection
    sweep: SweepSection
    outputs: OutputSection
    raw: dict
    base_dir: str = "."

    def params(self) -> ModelParams:
        m = self.model
        return ModelParams(m.sigma, m.omega, m.c, m.boundary_tolerance)

    def make_grid(self) -> Grid:
        return Grid(self.grid.n_points, self.grid.domain_length)

    def stepper_config(self) -> StepperConfig:
        s = self.stepper
        return StepperConfig(
            dt=s.dt,
            t_start=s.t_start,
            t_end=s.t_end,
            record_every=s.record_every,
            dealias_fraction=s.dealias_fraction,
            max_linf_growth=s.max_linf_growth,
            startup_time=s.startup_time,
            startup_dt=s.startup_dt,
        )

    def echo(self) -> dict:
        """The config with defaults filled, as a plain mapping (reparsable)."""
        return copy.deepcopy(self.raw)


# --- parsing --------------------------------------------------------------


def _coerce(value, hint, path):
    origin = typing.get_origin(hint)
    if origin is typing.Union:  # Optional[X]
        if value is None:
            return None
        inner = [a for a in typing.get_args(hint) if a is not type(None)][0]
        return _coerce(value, inner, path)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return int(value)
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if hint is list or origin is list:
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {value!r}")
        return list(value)
    if hint is dict or origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(path, f"expected a mapping, got {value!r}")
        return dict(value)
    return value


def _section(cls, raw, path):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(path, f"expected a mapping, got {type(raw).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in names:
            raise ConfigError(f"{path}.{key}", f"unknown key (allowed: {', '.join(sorted(names))})")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in raw:
            kwargs[f.name] = _coerce(raw[f.name], hints[f.name], f"{path}.{f.name}")
        elif f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            raise ConfigError(f"{path}.{f.name}", "required key is missing")
    return cls(**kwargs)


def _check(cond, path, message):
    if not cond:
        raise ConfigError(path, message)


def _validate(cfg: RunConfig):
    cmd = cfg.command
    try:
        p = cfg.params()
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from None
    try:
        cfg.make_grid()
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from None
    try:
        cfg.stepper_config()
    except ValueError as exc:
        raise ConfigError("stepper", str(exc)) from None

    ic = cfg.initial_condition
    _check(ic.family in FAMILIES, "initial_condition.family", f"must be one of {FAMILIES}, got {ic.family!r}")
    if ic.family == "gaussian":
        _check(ic.width > 0, "initial_condition.width", "must be positive")
        _check(ic.noise >= 0, "initial_condition.noise", "must be nonnegative")
    elif ic.family == "ground_state":
        w = ic.omega if ic.omega is not None else p.omega
        _check(w > 0, "initial_condition.omega", "must be positive")
    else:
        _check(ic.path is not None, "initial_condition.path", "required for family 'file'")
        _check(_resolve(ic.path, cfg.base_dir).is_file(), "initial_condition.path", f"file not found: {ic.path}")

    _check(cfg.simulate.system in ("gdnls", "gauged"), "simulate.system", "must be 'gdnls' or 'gauged'")
    if cmd == "simulate" and cfg.simulate.system == "gauged":
        _check(not 1 < p.sigma < 2, "model.sigma", "the gauged system needs sigma == 1 or sigma >= 2")
    if cmd == "waveop":
        w = cfg.waveop
        _check(p.sigma > 2, "model.sigma", f"the wave operator needs sigma > 2, got {p.sigma}")
        _check(w.T0 >= 1, "waveop.T0", "must be >= 1")
        _check(w.TN is None or w.TN > w.T0, "waveop.TN", "must exceed T0")
        _check(w.tail_tol > 0, "waveop.tail_tol", "must be positive")
        _check(w.n_records >= 2, "waveop.n_records", "must be >= 2")
        _check(w.source_form in ("exact", "literal"), "waveop.source_form", "must be 'exact' or 'literal'")
        if w.fit_window is not None:
            ok = len(w.fit_window) == 2 and all(isinstance(v, (int, float)) for v in w.fit_window)
            _check(ok and 0 < w.fit_window[0] < w.fit_window[1], "waveop.fit_window", "must be [t_lo, t_hi]")
    if cmd == "scatter":
        s = cfg.scatter
        _check(p.sigma >= 2, "model.sigma", f"the scattering harness needs sigma >= 2, got {p.sigma}")
        _check(s.horizon > 0, "scatter.horizon", "must be positive")
        _check(0 < s.first_check <= 2 * s.horizon, "scatter.first_check", "must lie in (0, 2 * horizon]")
        _check(s.smallness > 0 and s.gap_tol > 0, "scatter", "smallness and gap_tol must be positive")
    if cmd == "convergence":
        for i, name in enumerate(cfg.convergence.problems):
            _check(name in CONVERGENCE_PROBLEMS, f"convergence.problems[{i}]", f"unknown problem {name!r}")
        _check(cfg.convergence.dt0 > 0, "convergence.dt0", "must be positive")
    fmts = cfg.outputs.formats
    for i, f in enumerate(fmts):
        _check(f in FORMATS, f"outputs.formats[{i}]", f"must be one of {FORMATS}, got {f!r}")
    if cmd == "sweep":
        sw = cfg.sweep
        _check(sw.command in COMMANDS and sw.command != "sweep", "sweep.command", "must name a non-sweep command")
        _check(sw.workers >= 1, "sweep.workers", "must be >= 1")
        for key, vals in sw.parameters.items():
            _check(isinstance(vals, list), f"sweep.parameters.{key}", "must be a list of values")
            _check(_known_path(key), f"sweep.parameters.{key}", "does not name a config key")


def _known_path(dotted: str) -> bool:
    parts = dotted.split(".")
    if parts == ["seed"]:
        return True
    if len(parts) != 2 or parts[0] not in SECTIONS or parts[0] == "sweep":
        return False
    return parts[1] in {f.name for f in dataclasses.fields(SECTIONS[parts[0]])}


def _resolve(path: str, base_dir: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else Path(base_dir) / p


def config_from_dict(raw: dict, base_dir: str = ".") -> RunConfig:
    """Validate a mapping (e.g. loaded YAML) into a :class:`RunConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("", "config must be a mapping")
    allowed = {"command", "seed", *SECTIONS}
    for key in raw:
        if key not in allowed:
            raise ConfigError(str(key), f"unknown key (allowed: {', '.join(sorted(allowed))})")
    if "command" not in raw:
        raise ConfigError("command", "required key is missing")
    cmd = raw["command"]
    if cmd not in COMMANDS:
        raise ConfigError("command", f"must be one of {COMMANDS}, got {cmd!r}")
    seed = _coerce(raw.get("seed", 0), int, "seed")
    sections = {name: _section(cls, raw.get(name), name) for name, cls in SECTIONS.items()}
    normalized = {"command": cmd, "seed": seed}
    for name, sec in sections.items():
        normalized[name] = dataclasses.asdict(sec)
    cfg = RunConfig(command=cmd, seed=seed, raw=normalized, base_dir=str(base_dir), **sections)
    _validate(cfg)
    return cfg


def load_raw(path) -> dict:
    """The YAML mapping of a config file, unvalidated."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"YAML syntax error in {path}: {exc}") from None
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError("", "config must be a mapping")
    return raw


def parse_config(path) -> RunConfig:
    """Read and validate a YAML config file.

    Raises
    ------
    ConfigError
        On unreadable files, YAML syntax errors and validation failures.
    """
    return config_from_dict(load_raw(path), base_dir=str(Path(path).parent))


# --- sweeps ---------------------------------------------------------------


def sweep_points(cfg: RunConfig) -> list:
    """Cartesian product of ``sweep.parameters`` as a list of ``{dotted_key: value}``."""
    params = cfg.sweep.parameters
    keys = sorted(params)
    if not keys or any(len(params[k]) == 0 for k in keys):
        return []
    return [dict(zip(keys, combo)) for combo in itertools.product(*(params[k] for k in keys))]


def point_config(cfg: RunConfig, point: dict) -> dict:
    """Raw mapping for one sweep point: the base config with overrides applied."""
    raw = cfg.echo()
    raw["command"] = cfg.sweep.command
    raw.pop("sweep")
    for key, val in point.items():
        if key == "seed":
            raw["seed"] = val
        else:
            sec, name = key.split(".")
            raw[sec][name] = val
    return raw


# --- initial conditions ---------------------------------------------------


def _smooth_noise(grid: Grid, seed: int, width: float) -> np.ndarray:
    """Seeded random field with Gaussian spectrum and Gaussian envelope, unit sup norm."""
    rng = np.random.default_rng(seed)
    k = grid.wavenumbers
    spec = (rng.standard_normal(grid.n_points) + 1j * rng.standard_normal(grid.n_points)) * np.exp(-(k**2))
    f = np.fft.ifft(spec) * np.exp(-((grid.nodes / (4 * width)) ** 2))
    m = np.max(np.abs(f))
    return f / m if m > 0 else f


def initial_field(cfg: RunConfig, grid: Optional[Grid] = None) -> Field:
    """Build the configured initial datum (or asymptotic state ``u+`` for ``waveop``)."""
    g = grid or cfg.make_grid()
    ic = cfg.initial_condition
    x = g.nodes
    if ic.family == "gaussian":
        u = ic.amplitude * np.exp(-(((x - ic.center) / ic.width) ** 2)) * np.exp(1j * ic.phase_velocity * x)
        if ic.noise > 0:
            u = u + ic.noise * _smooth_noise(g, cfg.seed, ic.width)
        return Field(g, u)
    if ic.family == "ground_state":
        w = ic.omega if ic.omega is not None else cfg.model.omega
        return ground_state_profile(g, ModelParams(cfg.model.sigma, w))
    from .io import read_snapshot

    snap = read_snapshot(_resolve(ic.path, cfg.base_dir))
    if snap.field.grid != g:
        raise ConfigError(
            "initial_condition.path",
            f"snapshot grid (n={snap.field.grid.n_points}, L={snap.field.grid.domain_length}) differs from the configured grid",
        )
    return snap.field
