import copy
import json

import numpy as np
import pytest

from hbtv import harness
from hbtv.analysis import exp_rate_fit, lyapunov_value
from hbtv.harness import ConfigError, EstimatorTrace, compare, parse_config, read_csv, write_csv

from conftest import CONFIGS

HBTV = {"name": "HB-TV", "kind": "hbtv", "lambda": 1.01, "kappa": 0.7, "beta": 0.6, "eta": 3.6, "gain0": 100.0}


def raw_config(**overrides):
    raw = json.loads((CONFIGS / "pe_multisine.json").read_text())
    raw["horizon"] = 300
    raw.update(overrides)
    return raw


@pytest.fixture(scope="module")
def pe_run():
    return harness.run(harness.load_config(CONFIGS / "pe_multisine.json"))


def test_benchmark_parameter_error_log_linear(pe_run):
    t = pe_run.estimators["HB-TV"]
    fit = exp_rate_fit(t.theta_err, 40)
    assert fit.rate > 0 and fit.r_squared >= 0.9
    assert t.theta_err[-1] < 1e-6


def test_shipped_configs_match_printed_values():
    a = harness.load_config(CONFIGS / "pe_multisine.json")
    (spec,) = a.estimators
    assert spec.params == {**spec.params, "lambda": 1.01, "kappa": 0.7, "beta": 0.6, "eta": 3.6}
    np.testing.assert_array_equal(spec.params["gain0"], 100.0)
    b = harness.load_config(CONFIGS / "weak_excitation.json")
    hb, rls = b.estimators
    assert hb.params["lambda"] == pytest.approx(1 / 0.99, rel=1e-15)
    assert (hb.params["kappa"], hb.params["eta"], hb.params["beta"]) == (1.06, 3.0, 0.5)
    assert rls.params["forgetting"] == 0.99 and b.signal.decay_rate == 0.03


def test_run_is_deterministic(tmp_path):
    config = parse_config(raw_config())
    a = write_csv(harness.run(config), tmp_path / "a.csv")
    b = write_csv(harness.run(config), tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_zero_excitation_freezes_estimates():
    raw = raw_config(signal={"kind": "constant", "offset": 0.0}, horizon=50)
    raw["estimators"] = [{**HBTV, "theta0": [1.0, 2.0, 3.0, 4.0], "vartheta0": [0.0, 0.0, 0.0, 0.0]}]
    trace = harness.run(parse_config(raw))
    assert np.all(trace.y == 0)
    t = trace.estimators["HB-TV"]
    np.testing.assert_array_equal(t.vartheta, 0.0)
    # theta only mixes toward vartheta: theta_k = 0.4**k * theta_0
    expected = np.outer(0.4 ** np.arange(1, 51), [1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(t.theta, expected, rtol=1e-12, atol=0)


def test_failing_estimator_is_isolated():
    raw = raw_config()
    bad = {"name": "bad", "kind": "hbtv", "lambda": 1.0, "kappa": 3.0, "beta": 0.5, "eta": 0.5, "gain0": 100.0}
    raw["estimators"] = [bad, HBTV]
    both = harness.run(parse_config(raw))
    raw["estimators"] = [HBTV]
    alone = harness.run(parse_config(raw))
    assert both.failures and "bad" in both.failures
    step, msg = both.failures["bad"]
    assert both.estimators["bad"].steps == step and "positive definiteness" in msg
    good, ref = both.estimators["HB-TV"], alone.estimators["HB-TV"]
    np.testing.assert_array_equal(good.theta_err, ref.theta_err)
    np.testing.assert_array_equal(good.gain, ref.gain)
    assert "FAILED bad" in harness.summary(both)


def test_csv_round_trip_is_exact(pe_run, tmp_path):
    path = write_csv(pe_run, tmp_path / "trace.csv")
    table = read_csv(path)
    t = pe_run.estimators["HB-TV"]
    cols = table.data["HB-TV"]
    np.testing.assert_array_equal(cols["theta_err"], t.theta_err)
    np.testing.assert_array_equal(cols["V"], t.lyapunov)
    np.testing.assert_array_equal(cols["e_y"], t.e_y)
    np.testing.assert_array_equal(cols["u"], pe_run.u)
    for i in range(4):
        np.testing.assert_array_equal(cols[f"theta_{i}"], t.theta[:, i])
        for j in range(4):
            np.testing.assert_array_equal(cols[f"gain_{i}_{j}"], t.gain[:, i, j])
    assert len(cols["k"]) == pe_run.horizon


def test_lyapunov_column_self_consistent(tmp_path):
    raw = json.loads((CONFIGS / "weak_excitation.json").read_text())
    raw["estimators"].append({"name": "NGD", "kind": "ngd", "rate": 1.0})
    raw["estimators"].append({"name": "HB", "kind": "hb", "rate": 0.5, "momentum": 0.3})
    trace = harness.run(parse_config(raw))
    table = read_csv(write_csv(trace, tmp_path / "trace.csv"))
    assert table.dim == 4
    for name, cols in table.data.items():
        for k in range(0, len(cols["k"]), 7):
            theta = np.array([cols[f"theta_{i}"][k] for i in range(4)])
            vartheta = np.array([cols[f"vartheta_{i}"][k] for i in range(4)])
            gain = np.array([[cols[f"gain_{i}_{j}"][k] for j in range(4)] for i in range(4)])
            v = lyapunov_value(vartheta, theta, trace.theta_star, gain)
            assert v == pytest.approx(cols["V"][k], rel=1e-9, abs=1e-300), name


def test_read_csv_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValueError, match="empty"):
        read_csv(empty)
    short = tmp_path / "short.csv"
    short.write_text("k,estimator,V\n0,a,1.0\n1,a\n")
    with pytest.raises(ValueError, match="line 3"):
        read_csv(short)


def synthetic(name, values):
    v = np.asarray(values, dtype=float)
    K = len(v)
    return EstimatorTrace(
        name, "ngd", v, v, v, v, v, v, np.zeros((K, 1)), np.zeros((K, 1)), np.zeros((K, 1, 1)),
        np.zeros(1), np.zeros(1), np.eye(1),
    )


def test_compare_ties():
    v = np.exp(-0.1 * np.arange(100))
    ranking = compare({"a": synthetic("a", v), "b": synthetic("b", v.copy())}, "final_param_err")
    assert [r.rank for r in ranking] == [1, 1]


def test_compare_rates():
    k = np.arange(200)
    traces = {"slow": synthetic("slow", np.exp(-0.05 * k)), "fast": synthetic("fast", np.exp(-0.1 * k))}
    ranking = compare(traces, "fitted_rate")
    assert [r.name for r in ranking] == ["fast", "slow"]
    assert ranking[0].value == pytest.approx(0.1)
    assert [r.name for r in compare(traces, "final_param_err")] == ["fast", "slow"]


def test_compare_errors():
    k = np.arange(50)
    with pytest.raises(ValueError, match="differ in length"):
        compare({"a": synthetic("a", np.ones(50)), "b": synthetic("b", np.ones(40))}, "final_param_err")
    with pytest.raises(ValueError, match="positive"):
        compare({"a": synthetic("a", np.where(k > 45, 0.0, 1.0))}, "fitted_rate")
    with pytest.raises(ValueError, match="unknown metric"):
        compare({"a": synthetic("a", np.ones(50))}, "speed")


def broken(mutate):
    raw = copy.deepcopy(raw_config())
    mutate(raw)
    with pytest.raises(ConfigError) as info:
        parse_config(raw)
    return str(info.value)


def test_config_error_messages():
    assert broken(lambda r: r["estimators"][0].pop("lambda")) == "estimators[0].lambda: missing required field"
    assert "config.horizon" in broken(lambda r: r.update(horizon=0))
    assert "config.estimators" in broken(lambda r: r.update(estimators=[]))
    assert "estimators[0].kind" in broken(lambda r: r["estimators"][0].update(kind="lms"))
    assert "estimators[0].gain0" in broken(lambda r: r["estimators"][0].update(gain0=-1.0))
    assert "estimators[0].gain0" in broken(lambda r: r["estimators"][0].update(gain0=[[1.0, 0.0], [0.0, 1.0]]))
    assert "estimators[0].theta0" in broken(lambda r: r["estimators"][0].update(theta0=[0.0]))
    assert "signal.components[1]" in broken(lambda r: r["signal"]["components"][1].pop("omega_pi"))
    assert "plant" in broken(lambda r: r.update(plant={"transfer_function": {"num": [1, 2], "den": [1, 2]}}))
    assert "duplicate" in broken(lambda r: r["estimators"].append(dict(r["estimators"][0])))


def test_load_config_reports_json_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "name": "x",\n  "horizon": 10,,\n}\n')
    with pytest.raises(ConfigError, match="line 3"):
        harness.load_config(path)
    with pytest.raises(FileNotFoundError, match="config not found"):
        harness.load_config(tmp_path / "missing.json")


def test_nonlinear_plant_config():
    raw = raw_config(
        plant={
            "ar": [-0.5],
            "input": [1.0],
            "nonlinear": [{"coeff": 0.3, "basis": "sine", "source": "u", "lag": 1}],
        },
        horizon=100,
    )
    raw["estimators"] = [{"name": "RLS", "kind": "rlsff", "forgetting": 1.0}]
    trace = harness.run(parse_config(raw))
    np.testing.assert_allclose(trace.theta_star, [0.5, 1.0, 0.3])
    assert trace.estimators["RLS"].theta_err[-1] < 1e-3
