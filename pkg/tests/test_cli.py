import json

import pytest

from hbtv.cli import OUTPUT_DIR_ENV, main

from conftest import CONFIGS

SVGS = ("output_error.svg", "parameter_error.svg", "gain_eigenvalues.svg")


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)


def write_config(tmp_path, **overrides):
    raw = json.loads((CONFIGS / "pe_multisine.json").read_text())
    raw["horizon"] = 200
    raw.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    return path


def test_run_writes_trace_summary_and_plots(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(CONFIGS / "pe_multisine.json"), "--out-dir", str(out)]) == 0
    for name in ("trace.csv", "summary.txt", *SVGS):
        assert (out / name).is_file(), name
    for name in SVGS:
        text = (out / name).read_text()
        assert text.startswith("<svg") and "<polyline" in text
    assert "HB-TV" in capsys.readouterr().out


def test_run_weak_excitation_compares_both(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(CONFIGS / "weak_excitation.json"), "--out-dir", str(out)]) == 0
    trace = (out / "trace.csv").read_text()
    assert ",HB-TV," in trace and ",RLS-FF," in trace
    assert len(list(out.glob("*.svg"))) == 3
    summary = (out / "summary.txt").read_text()
    assert "final_param_err" in summary


def test_run_is_idempotent(tmp_path):
    out = tmp_path / "out"
    config = write_config(tmp_path)
    assert main(["run", str(config), "--out-dir", str(out)]) == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert main(["run", str(config), "--out-dir", str(out)]) == 0
    assert first == {p.name: p.read_bytes() for p in out.iterdir()}


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "env"))
    assert main(["run", str(write_config(tmp_path))]) == 0
    assert (tmp_path / "env" / "trace.csv").is_file()


def test_run_missing_config(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    assert "config not found" in capsys.readouterr().err


def test_run_malformed_json_names_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "horizon": 10\n  "plant": {}\n}\n')
    assert main(["run", str(path)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_run_bad_field_names_path(tmp_path, capsys):
    raw = json.loads((CONFIGS / "pe_multisine.json").read_text())
    del raw["estimators"][0]["kappa"]
    path = tmp_path / "c.json"
    path.write_text(json.dumps(raw))
    assert main(["run", str(path)]) == 2
    assert "estimators[0].kappa" in capsys.readouterr().err


def test_run_refuses_invalid_hyperparameters(tmp_path):
    est = {"name": "x", "kind": "hbtv", "lambda": 1.01, "kappa": 0.7, "beta": 2.0, "eta": 3.6}
    out = tmp_path / "out"
    assert main(["run", str(write_config(tmp_path, estimators=[est])), "--out-dir", str(out)]) == 1
    assert not out.exists()


def test_run_reports_estimator_failure(tmp_path, capsys):
    est = {"name": "bad", "kind": "hbtv", "lambda": 1.0, "kappa": 1.0, "beta": 0.5, "eta": 1.0, "gain0": 1e300}
    assert main(["run", str(write_config(tmp_path, estimators=[est])), "--out-dir", str(tmp_path / "o")]) == 3
    assert "FAILED bad" in capsys.readouterr().out


def test_run_reports_plant_divergence(tmp_path):
    plant = {"ar": [-1e200], "input": [1.0]}
    assert main(["run", str(write_config(tmp_path, plant=plant)), "--out-dir", str(tmp_path / "o")]) == 3


def test_validate_benchmark_hypers(capsys):
    assert main(["validate", str(CONFIGS / "pe_multisine.json")]) == 0
    out = capsys.readouterr().out
    assert "eta lower bound: 3.55349" in out and "FAIL" not in out and "WARN" not in out


def test_validate_beta_two(tmp_path, capsys):
    est = {"name": "x", "kind": "hbtv", "lambda": 1.01, "kappa": 0.7, "beta": 2.0, "eta": 3.6}
    assert main(["validate", str(write_config(tmp_path, estimators=[est]))]) == 1
    assert "[FAIL] 0 < beta < 2" in capsys.readouterr().out


def test_validate_weak_excitation_warns(capsys):
    assert main(["validate", str(CONFIGS / "weak_excitation.json")]) == 0
    out = capsys.readouterr().out
    assert "[WARN] eta >= convergence bound" in out and "5.68853" in out


def test_validate_baseline_ranges(tmp_path):
    ests = [{"name": "ngd", "kind": "ngd", "rate": 2.0}]
    assert main(["validate", str(write_config(tmp_path, estimators=ests))]) == 1


@pytest.fixture
def trace_csv(tmp_path):
    out = tmp_path / "run"
    assert main(["run", str(write_config(tmp_path)), "--out-dir", str(out)]) == 0
    return out / "trace.csv"


def test_plot_parameter_error(trace_csv, tmp_path):
    target = tmp_path / "p.svg"
    assert main(["plot", str(trace_csv), "--cols", "theta_err", "--log", "--out", str(target)]) == 0
    svg = target.read_text()
    assert "<polyline" in svg and "1e-" in svg


def test_plot_single_point(tmp_path):
    trace = tmp_path / "one.csv"
    trace.write_text("k,estimator,theta_err\n0,a,0.5\n")
    target = tmp_path / "one.svg"
    assert main(["plot", str(trace), "--cols", "theta_err", "--out", str(target)]) == 0
    assert target.read_text().count("<circle") == 1


def test_plot_log_clips_zero(tmp_path, capsys):
    trace = tmp_path / "z.csv"
    trace.write_text("k,estimator,v\n0,a,1.0\n1,a,0.0\n2,a,0.1\n")
    target = tmp_path / "z.svg"
    assert main(["plot", str(trace), "--cols", "v", "--log", "--out", str(target)]) == 0
    assert "clipped" in capsys.readouterr().err
    assert target.is_file()


def test_plot_unknown_column(trace_csv, tmp_path, capsys):
    assert main(["plot", str(trace_csv), "--cols", "nope", "--out", str(tmp_path / "x.svg")]) == 2
    assert "nope" in capsys.readouterr().err


def test_plot_empty_trace(tmp_path, capsys):
    trace = tmp_path / "e.csv"
    trace.write_text("k,estimator,theta_err\n")
    assert main(["plot", str(trace), "--cols", "theta_err", "--out", str(tmp_path / "e.svg")]) == 2
    assert "no rows" in capsys.readouterr().err


def test_plot_missing_trace(tmp_path, capsys):
    assert main(["plot", str(tmp_path / "none.csv"), "--cols", "V", "--out", str(tmp_path / "x.svg")]) == 2
    assert "trace not found" in capsys.readouterr().err
