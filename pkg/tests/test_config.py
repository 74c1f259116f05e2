import numpy as np
import pytest
import yaml

from gdnls.config import (
    ConfigError,
    config_from_dict,
    initial_field,
    load_raw,
    parse_config,
    point_config,
    sweep_points,
)
from gdnls.io import write_snapshot
from gdnls.spectral import Grid


def _write(tmp_path, raw, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return path


def test_minimal_config_gets_defaults(tmp_path):
    cfg = parse_config(_write(tmp_path, {"command": "simulate", "model": {"sigma": 2}}))
    assert cfg.model.sigma == 2.0 and cfg.model.omega == 1.0
    assert cfg.grid.n_points == 1024 and cfg.grid.domain_length == pytest.approx(80 * np.pi)
    assert cfg.stepper.dt == 0.01 and cfg.stepper.dealias_fraction == 0.5
    assert cfg.initial_condition.family == "gaussian" and cfg.seed == 0
    assert cfg.outputs.formats == ["csv", "json", "snapshot"]
    # the echo reparses to the same config
    assert config_from_dict(cfg.echo()).echo() == cfg.echo()


def test_waveop_needs_sigma_above_two():
    with pytest.raises(ConfigError) as info:
        config_from_dict({"command": "waveop", "model": {"sigma": 1.5}})
    assert info.value.path == "model.sigma"
    config_from_dict({"command": "waveop", "model": {"sigma": 2.5}})


@pytest.mark.parametrize(
    "raw, path",
    [
        ({"command": "simulate", "model": {"sigma": 1.0}, "stepper": {"dtt": 0.1}}, "stepper.dtt"),
        ({"command": "simulate", "model": {"sigma": 1.0}, "modle": {}}, "modle"),
        ({"command": "simulate", "model": {}}, "model.sigma"),
        ({"command": "simulate"}, "model.sigma"),
        ({"model": {"sigma": 1.0}}, "command"),
        ({"command": "plot", "model": {"sigma": 1.0}}, "command"),
        ({"command": "simulate", "model": {"sigma": "three"}}, "model.sigma"),
        ({"command": "simulate", "model": {"sigma": 1.0}, "grid": {"n_points": 100.5}}, "grid.n_points"),
        ({"command": "simulate", "model": {"sigma": 1.0}, "grid": {"n_points": 101}}, "grid"),
        ({"command": "simulate", "model": {"sigma": 0.2}}, "model"),
        ({"command": "simulate", "model": {"sigma": 1.0}, "stepper": {"dt": -1}}, "stepper"),
        ({"command": "simulate", "model": {"sigma": 1.5}, "simulate": {"system": "gauged"}}, "model.sigma"),
        ({"command": "scatter", "model": {"sigma": 1.0}}, "model.sigma"),
        ({"command": "simulate", "model": {"sigma": 1.0}, "initial_condition": {"family": "file"}}, "initial_condition.path"),
        ({"command": "simulate", "model": {"sigma": 1.0}, "initial_condition": {"family": "sech"}}, "initial_condition.family"),
        ({"command": "simulate", "model": {"sigma": 1.0}, "outputs": {"formats": ["png"]}}, "outputs.formats[0]"),
        ({"command": "convergence", "model": {"sigma": 1.0}, "convergence": {"problems": ["x"]}}, "convergence.problems[0]"),
        ({"command": "sweep", "model": {"sigma": 3.0}, "sweep": {"parameters": {"model.sigmaa": [1]}}}, "sweep.parameters.model.sigmaa"),
        ({"command": "sweep", "model": {"sigma": 3.0}, "sweep": {"command": "sweep"}}, "sweep.command"),
        ({"command": "waveop", "model": {"sigma": 3.0}, "waveop": {"fit_window": [8, 4]}}, "waveop.fit_window"),
    ],
)
def test_validation_errors_name_the_key(raw, path):
    with pytest.raises(ConfigError) as info:
        config_from_dict(raw)
    assert info.value.path == path
    assert path in str(info.value)


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("command: [simulate\n")
    with pytest.raises(ConfigError):
        parse_config(bad)
    bad.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_raw(bad)


def test_sweep_points_and_overrides():
    cfg = config_from_dict(
        {
            "command": "sweep",
            "model": {"sigma": 3.0},
            "sweep": {"command": "waveop", "parameters": {"model.sigma": [2.5, 3.0], "seed": [1, 2]}},
        }
    )
    pts = sweep_points(cfg)
    assert len(pts) == 4 and pts[0] == {"model.sigma": 2.5, "seed": 1}
    raw = point_config(cfg, pts[3])
    assert raw["command"] == "waveop" and raw["model"]["sigma"] == 3.0 and raw["seed"] == 2
    assert "sweep" not in raw and "sweep" in cfg.echo()
    empty = config_from_dict({"command": "sweep", "model": {"sigma": 3.0}, "sweep": {"parameters": {"seed": []}}})
    assert sweep_points(empty) == []


def test_gaussian_family_and_seeded_noise():
    base = {"command": "simulate", "model": {"sigma": 1.0}, "grid": {"n_points": 256, "domain_length": 40.0}}
    ic = {"amplitude": 0.7, "width": 2.0, "phase_velocity": 0.5, "center": 1.0}
    cfg = config_from_dict({**base, "initial_condition": ic})
    x = cfg.make_grid().nodes
    expected = 0.7 * np.exp(-(((x - 1.0) / 2.0) ** 2)) * np.exp(0.5j * x)
    assert np.array_equal(initial_field(cfg).values, expected)
    noisy = {**ic, "noise": 0.01}
    a = initial_field(config_from_dict({**base, "seed": 1, "initial_condition": noisy})).values
    b = initial_field(config_from_dict({**base, "seed": 1, "initial_condition": noisy})).values
    c = initial_field(config_from_dict({**base, "seed": 2, "initial_condition": noisy})).values
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.max(np.abs(a - expected)) == pytest.approx(0.01)


def test_ground_state_and_file_families(tmp_path):
    base = {"command": "functionals", "model": {"sigma": 2.0}, "grid": {"n_points": 256, "domain_length": 40.0}}
    gs = initial_field(config_from_dict({**base, "initial_condition": {"family": "ground_state", "omega": 2.0}}))
    assert np.max(np.abs(gs.values)) == pytest.approx((2 * np.sqrt(2.0) * 3) ** 0.25, rel=1e-3)

    g = Grid(256, 40.0)
    f = g.field(np.exp(-(g.nodes**2)) * 1j)
    write_snapshot(tmp_path / "u0.snap", f, 0.0, 2.0)
    path = _write(tmp_path, {**base, "initial_condition": {"family": "file", "path": "u0.snap"}})
    cfg = parse_config(path)  # relative to the config file
    assert np.array_equal(initial_field(cfg).values, f.values)
    wrong = config_from_dict({**base, "grid": {"n_points": 128, "domain_length": 40.0},
                              "initial_condition": {"family": "file", "path": str(tmp_path / "u0.snap")}})
    with pytest.raises(ConfigError):
        initial_field(wrong)
