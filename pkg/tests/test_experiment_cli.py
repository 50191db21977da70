import json
import math

import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from wellposed.cli import main
from wellposed.coefficients import make_test_coefficient
from wellposed.energy import tau1
from wellposed.experiment import (OUT_DIR_ENV, RESULT_COLUMNS, ConfigError, ExperimentConfig,
                                  InitialData, bundled_configs, emit, load_config, output_dir,
                                  read_table, run_experiment, validate)
from wellposed.moduli import PsiSpec

SMALL = {
    "name": "small",
    "T": 1.0,
    "field": {"family": "constant", "c": 2.0},
    "xi_grid": {"min": 10.0, "max": 1000.0, "count": 8},
    "model": {"kind": "log_psi"},
    "mollify_verify": {"n_eps": 2, "n_t": 4},
}


@pytest.fixture
def small_yaml(tmp_path):
    p = tmp_path / "small.yaml"
    p.write_text(yaml.safe_dump(SMALL))
    return p


# configs

def test_bundled_configs_load():
    names = bundled_configs()
    assert {"constant", "gevrey_a05_p2", "cinf_onepluslog"} <= set(names)
    for n in names:
        cfg = load_config(n)
        assert cfg.name == n
        assert validate(cfg)["passed"], n


@pytest.mark.parametrize("name", ["constant", "gevrey_a05_p2", "cinf_onepluslog"])
def test_config_round_trip(name):
    cfg = load_config(name)
    again = ExperimentConfig.from_yaml(cfg.to_yaml())
    assert again == cfg
    assert again.to_dict() == cfg.to_dict()


def test_round_trip_fills_defaults():
    cfg = ExperimentConfig.from_dict(SMALL)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.tolerances.rtol == 1e-10 and cfg.workers == 1


@pytest.mark.parametrize("patch, field", [
    ({"xi_grid": {"min": 10.0, "max": 1e3, "count": 4}}, "xi_grid.count"),
    ({"xi_grid": {"min": 10.0, "max": 1e3, "cnt": 9}}, "xi_grid.cnt"),
    ({"tolerances": {"rtol": -1.0}}, "tolerances.rtol"),
    ({"initial_data": {"profile": "triangle"}}, "initial_data.profile"),
    ({"initial_data": {"profile": "gevrey_decay", "sigma": 0.5}}, "initial_data.sigma"),
    ({"kernel": "box"}, "kernel"),
    ({"outputs": {"format": "xml"}}, "outputs.format"),
    ({"colour": "red"}, "config.colour"),
    ({"field": {"c": 2.0}}, "field.family"),
    ({"T": 0.0}, "T"),
    ({"workers": 0}, "workers"),
    ({"model": {"kind": "gevrey"}}, "model.p"),
])
def test_config_error_names_field(patch, field):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({**SMALL, **patch})
    assert info.value.field == field
    assert str(info.value).startswith(field)


def test_invalid_yaml():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_yaml("name: [unclosed")


def test_validation_rejects_grid_below_log_threshold():
    data = {**SMALL, "field": {"family": "psi_singular", "psi": {"family": "one_plus_log"}},
            "model": {"kind": "auto"}, "xi_grid": {"min": 2.0, "max": 1e3, "count": 8}}
    rep = validate(ExperimentConfig.from_dict(data))
    assert not rep["passed"]
    assert not rep["checks"]["xi_grid"]["passed"]


def test_initial_data_profiles():
    xi = np.array([1.0, 8.0])
    assert np.allclose(InitialData("gevrey_decay", 2.0, 1.5, 3.0).log_magnitude(xi),
                       math.log(2) - 3 * xi ** (1 / 1.5))
    assert np.allclose(InitialData("gaussian", scale=2.0).log_magnitude(xi), -(xi / 2) ** 2)
    assert np.allclose(InitialData().log_magnitude(xi), 0.0)


# output

def test_output_dir_precedence(monkeypatch, tmp_path):
    cfg = ExperimentConfig.from_dict(SMALL)
    monkeypatch.delenv(OUT_DIR_ENV, raising=False)
    assert str(output_dir(cfg)) == cfg.outputs.dir
    monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path))
    assert output_dir(cfg) == tmp_path / "small"
    assert str(output_dir(cfg, "elsewhere")) == "elsewhere"


def test_emit_one_row(tmp_path):
    p = emit([{"a": 1.0, "b": 2}], ("a", "b"), tmp_path / "t.csv")
    assert p.read_text().splitlines() == ["a,b", "1,2"]


@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
def test_emit_empty_creates_nothing(tmp_path, fmt):
    with pytest.raises(ValueError):
        emit([], ("a",), tmp_path / f"t.{fmt}", fmt)
    assert not (tmp_path / f"t.{fmt}").exists()


def test_emit_seventeen_digits(tmp_path):
    p = emit([(0.1 + 0.2, True)], ("x", "flag"), tmp_path / "t.csv")
    assert p.read_text().splitlines()[1] == "0.30000000000000004,1"


@given(st.lists(st.tuples(st.floats(allow_nan=False, allow_infinity=False), st.booleans(),
                          st.floats(allow_nan=True, allow_infinity=False)),
                min_size=1, max_size=6))
def test_emit_formats_round_trip(tmp_path_factory, rows):
    d = tmp_path_factory.mktemp("emit")
    cols = ("x", "flag", "maybe")
    a = read_table(emit(rows, cols, d / "t.csv", "csv"))
    b = read_table(emit(rows, cols, d / "t.jsonl", "jsonl"))
    assert len(a) == len(b) == len(rows)
    for ra, rb, src in zip(a, b, rows):
        assert ra["x"] == rb["x"] == src[0]
        assert ra["flag"] == rb["flag"] == float(src[1])
        assert (math.isnan(ra["maybe"]) and math.isnan(rb["maybe"])) or ra["maybe"] == rb["maybe"]


def test_emit_io_error_has_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        emit([(1.0,)], ("a",), blocker / "sub" / "t.csv")


# pipeline and CLI

def test_run_sweep_stage(tmp_path):
    cfg = ExperimentConfig.from_dict(SMALL)
    res = run_experiment(cfg, ("validate", "sweep", "classify"), tmp_path)
    assert res.status == 0
    rows = read_table(tmp_path / "sweep.csv")
    assert list(rows[0]) == list(RESULT_COLUMNS)
    assert len(rows) == 8
    fld = make_test_coefficient("constant", c=2.0)
    for r in rows:
        assert r["eps"] == min(1 / r["xi"], tau1(fld))
        assert r["E0"] > 0 and abs(r["log_ratio"]) < 1e-8
    rep = json.loads((tmp_path / "classification.json").read_text())
    assert rep["fit"]["verdict"] == "consistent"
    assert abs(rep["fit"]["sup_ratio"]) < 1e-8


def test_eps_coupling_clamps_to_tau1(tmp_path):
    data = {**SMALL, "name": "psi", "field": {"family": "psi_singular",
                                               "psi": {"family": "one_plus_log"}},
            "model": {"kind": "auto"}, "xi_grid": {"min": 4.0, "max": 400.0, "count": 8}}
    res = run_experiment(ExperimentConfig.from_dict(data), ("sweep",), tmp_path)
    fld = make_test_coefficient("psi_singular", psi=PsiSpec("one_plus_log"))
    t1 = tau1(fld)
    assert res.status == 0
    for r in read_table(tmp_path / "sweep.csv"):
        assert r["eps"] == min(1 / r["xi"], t1)
        assert r["eps_clamped"] == float(1 / r["xi"] > t1)


def test_cli_exit_ok(small_yaml, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["certify", str(small_yaml), "--out", str(out)]) == 0
    printed = capsys.readouterr().out.split()
    assert str(out / "certificate.json") in printed
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["C_prime"] >= 0 and cert["lambda0"] == 2.0


def test_cli_exit_validation(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text(yaml.safe_dump({**SMALL, "xi_grid": {"min": 10.0, "max": 1e3, "count": 3}}))
    assert main(["validate", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "xi_grid.count" in capsys.readouterr().err


def test_cli_exit_failed_validation_report(tmp_path):
    data = {**SMALL, "field": {"family": "psi_singular", "psi": {"family": "one_plus_log"}},
            "model": {"kind": "auto"}, "xi_grid": {"min": 2.0, "max": 1e3, "count": 8}}
    p = tmp_path / "low.yaml"
    p.write_text(yaml.safe_dump(data))
    assert main(["sweep", str(p), "--out", str(tmp_path / "o")]) == 1
    assert (tmp_path / "o" / "validation.json").exists()
    assert not (tmp_path / "o" / "sweep.csv").exists()


def test_cli_exit_io(tmp_path, small_yaml):
    assert main(["validate", str(tmp_path / "missing.yaml")]) == 3
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["validate", str(small_yaml), "--out", str(blocker / "x")]) == 3


def test_cli_env_out_dir(small_yaml, tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path))
    assert main(["validate", str(small_yaml)]) == 0
    assert (tmp_path / "small" / "validation.json").exists()


def test_cli_jsonl_and_workers(small_yaml, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["sweep", str(small_yaml), "--out", str(a), "--format", "jsonl"]) == 0
    assert main(["sweep", str(small_yaml), "--out", str(b), "--format", "jsonl",
                 "--workers", "2"]) == 0
    assert (a / "sweep.jsonl").read_bytes() == (b / "sweep.jsonl").read_bytes()
    first = json.loads((a / "sweep.jsonl").read_text().splitlines()[0])
    assert list(first) == list(RESULT_COLUMNS)


def test_cli_mollify_verify(small_yaml, tmp_path):
    assert main(["mollify-verify", str(small_yaml), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "bounds_summary.json").read_text())
    assert summary["passed"] is True
    assert len(read_table(tmp_path / "bounds.csv")) == 8


def test_cli_rejects_bad_workers(small_yaml):
    assert main(["validate", str(small_yaml), "--workers", "0"]) == 1


def test_cli_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["explode", "constant"])
    assert info.value.code == 2


def test_cli_partial_failure_writes_manifest(small_yaml, tmp_path, monkeypatch):
    import dataclasses

    import wellposed.experiment as ex
    real = ex.run_sweep

    def flaky(*args, **kw):
        rows = real(*args, **kw)
        bad = dataclasses.replace(rows[2], error="IntegrationError: step size underflow")
        return rows[:2] + [bad] + rows[3:]

    monkeypatch.setattr(ex, "run_sweep", flaky)
    out = tmp_path / "o"
    assert main(["sweep", str(small_yaml), "--out", str(out)]) == 2
    assert len(read_table(out / "sweep.csv")) == 7
    manifest = json.loads((out / "errors.json").read_text())
    assert len(manifest["errors"]) == 1 and "underflow" in manifest["errors"][0]["error"]


@pytest.mark.slow
def test_bundled_gevrey_pipeline(tmp_path):
    res = run_experiment(load_config("gevrey_a05_p2"), ("validate", "sweep", "classify"), tmp_path)
    assert res.status == 0
    rep = json.loads((tmp_path / "classification.json").read_text())
    assert rep["fit"]["verdict"] == "consistent"
    assert rep["classification"]["sigma_star"] == 4 / 3
    assert rep["classification"]["preserved"] is True
    assert rep["solution_decay"]["delta"] > 0


@pytest.mark.slow
def test_bundled_cinf_pipeline(tmp_path):
    res = run_experiment(load_config("cinf_onepluslog"), ("validate", "sweep", "classify"),
                         tmp_path)
    assert res.status == 0
    rep = json.loads((tmp_path / "classification.json").read_text())
    assert rep["fit"]["verdict"] == "consistent"
    assert rep["classification"]["classification"] == "C-infinity well-posed"
    assert rep["classification"]["modulus"] == "tau|log tau|/(1+log|log tau|)"
