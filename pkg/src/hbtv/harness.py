"""Experiment configs, the run loop, traces and their CSV form.

A config wires one plant, one input signal and any number of estimators.
The plant is simulated once and every estimator consumes the identical
(phi_k, y_k) stream; the harness alone knows theta* and uses it for the
parameter error and the Lyapunov value.
"""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .analysis import DEFAULT_PE_WINDOW, PeReport, exp_rate_fit, lyapunov_value, pe_metrics
from .estimators import (
    ESTIMATORS,
    Check,
    EstimatorError,
    HbConstEstimator,
    HbTvEstimator,
    HbTvHyper,
    NgdEstimator,
    OnlineEstimator,
    RlsFfEstimator,
    initial_gain,
    validate_hyperparameters,
)
from .plant import BASES, PlantModel, RegressionProblem, from_transfer_function, simulate
from .signals import KINDS as SIGNAL_KINDS
from .signals import Signal


class ConfigError(ValueError):
    """Malformed experiment config; the message names the offending field or line."""


# -- config --------------------------------------------------------------------------


@dataclass
class EstimatorSpec:
    name: str
    kind: str
    params: dict[str, Any]

    def hyper(self) -> HbTvHyper:
        p = self.params
        return HbTvHyper(p["lambda"], p["kappa"], p["beta"], p["eta"])

    def build(self, dim: int) -> OnlineEstimator:
        p = self.params
        if self.kind == "hbtv":
            return HbTvEstimator(self.name, dim, self.hyper(), p["gain0"], p.get("theta0"), p.get("vartheta0"))
        if self.kind == "rlsff":
            return RlsFfEstimator(self.name, dim, p["forgetting"], p["gain0"], p.get("theta0"))
        if self.kind == "ngd":
            return NgdEstimator(self.name, dim, p["rate"], p.get("theta0"))
        return HbConstEstimator(self.name, dim, p["rate"], p["momentum"], p.get("theta0"), p.get("theta_prev0"))


@dataclass
class PlotSpec:
    file: str
    columns: list[str]
    log: bool = True
    title: str = ""
    floor: float = 1e-16


@dataclass
class OutputSpec:
    dir: str = "out"
    trace: str = "trace.csv"
    summary: str = "summary.txt"
    plots: list[PlotSpec] = field(default_factory=list)


@dataclass
class ExperimentConfig:
    name: str
    plant: PlantModel
    signal: Signal
    horizon: int
    estimators: list[EstimatorSpec]
    pe_window: int = DEFAULT_PE_WINDOW
    outputs: OutputSpec = field(default_factory=OutputSpec)


_REQUIRED_PARAMS = {
    "hbtv": ("lambda", "kappa", "beta", "eta"),
    "rlsff": ("forgetting",),
    "ngd": ("rate",),
    "hb": ("rate", "momentum"),
}
_VECTOR_PARAMS = ("theta0", "vartheta0", "theta_prev0")

DEFAULT_PLOTS = (
    PlotSpec("output_error.svg", ["abs_e_y"], True, "output error |e_y|"),
    PlotSpec("parameter_error.svg", ["theta_err"], True, "parameter error |theta - theta*|"),
    PlotSpec("gain_eigenvalues.svg", ["gain_max", "gain_min"], True, "gain matrix eigenvalue extremes"),
)


def _need(d: Mapping, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}: missing required field")
    return d[key]


def _number(x, path: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise ConfigError(f"{path}: expected a finite number, got {x!r}")
    return float(x)


def _integer(x, path: str, minimum: int) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ConfigError(f"{path}: expected an integer, got {x!r}")
    if x < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {x}")
    return x


def _numbers(x, path: str) -> list[float]:
    if not isinstance(x, list):
        raise ConfigError(f"{path}: expected a list of numbers, got {x!r}")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(x)]


def _mapping(x, path: str) -> Mapping:
    if not isinstance(x, Mapping):
        raise ConfigError(f"{path}: expected an object, got {type(x).__name__}")
    return x


def _parse_plant(d, path="plant") -> PlantModel:
    d = _mapping(d, path)
    try:
        if "transfer_function" in d:
            tf = _mapping(d["transfer_function"], f"{path}.transfer_function")
            num = _numbers(_need(tf, "num", f"{path}.transfer_function"), f"{path}.transfer_function.num")
            den = _numbers(_need(tf, "den", f"{path}.transfer_function"), f"{path}.transfer_function.den")
            return from_transfer_function(num, den)
        ar = _numbers(d.get("ar", []), f"{path}.ar")
        inputs = _numbers(d.get("input", []), f"{path}.input")
        delay = _integer(d.get("delay", 0), f"{path}.delay", 0)
        coeffs, basis = [], []
        for i, term in enumerate(d.get("nonlinear", [])):
            tpath = f"{path}.nonlinear[{i}]"
            term = _mapping(term, tpath)
            coeffs.append(_number(_need(term, "coeff", tpath), f"{tpath}.coeff"))
            kind = _need(term, "basis", tpath)
            if kind not in BASES:
                raise ConfigError(f"{tpath}.basis: unknown basis {kind!r}; expected one of {sorted(BASES)}")
            if kind == "product":
                first = tuple(term.get("first", ("y", 1)))
                second = tuple(term.get("second", ("u", 1)))
                basis.append(BASES[kind](first, second))
            else:
                basis.append(BASES[kind](term.get("source", "y"), term.get("lag", 1)))
        return PlantModel(ar, inputs, coeffs, basis, delay)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_signal(d, path="signal") -> Signal:
    d = _mapping(d, path)
    kind = d.get("kind", "multisine")
    if kind not in SIGNAL_KINDS or kind == "custom":
        raise ConfigError(f"{path}.kind: unsupported signal kind {kind!r}")
    comps = []
    for i, c in enumerate(d.get("components", [])):
        cpath = f"{path}.components[{i}]"
        c = _mapping(c, cpath)
        if "omega" in c:
            omega = _number(c["omega"], f"{cpath}.omega")
        elif "omega_pi" in c:
            omega = math.pi * _number(c["omega_pi"], f"{cpath}.omega_pi")
        else:
            raise ConfigError(f"{cpath}: needs 'omega' (rad/step) or 'omega_pi' (multiples of pi)")
        comps.append(
            (
                _number(c.get("amplitude", 1.0), f"{cpath}.amplitude"),
                omega,
                _number(c.get("phase", 0.0), f"{cpath}.phase"),
            )
        )
    try:
        return Signal(
            kind,
            tuple(comps),
            offset=_number(d.get("offset", 0.0), f"{path}.offset"),
            decay_rate=_number(d.get("decay_rate", 0.0), f"{path}.decay_rate"),
            amplitude=_number(d.get("amplitude", 1.0), f"{path}.amplitude"),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_estimator(d, i: int, dim: int) -> EstimatorSpec:
    path = f"estimators[{i}]"
    d = _mapping(d, path)
    kind = _need(d, "kind", path)
    if kind not in ESTIMATORS:
        raise ConfigError(f"{path}.kind: unknown estimator {kind!r}; expected one of {sorted(ESTIMATORS)}")
    name = str(d.get("name", kind))
    params: dict[str, Any] = {}
    for key in _REQUIRED_PARAMS[kind]:
        params[key] = _number(_need(d, key, path), f"{path}.{key}")
    gain0 = d.get("gain0", 100.0)
    if isinstance(gain0, list):
        rows = [_numbers(r, f"{path}.gain0[{j}]") for j, r in enumerate(gain0)]
        if len(rows) != dim or any(len(r) != dim for r in rows):
            raise ConfigError(f"{path}.gain0: expected a {dim}x{dim} matrix")
        params["gain0"] = np.array(rows)
    else:
        params["gain0"] = _number(gain0, f"{path}.gain0")
    for key in _VECTOR_PARAMS:
        if d.get(key) is not None:
            vec = _numbers(d[key], f"{path}.{key}")
            if len(vec) != dim:
                raise ConfigError(f"{path}.{key}: expected {dim} entries, got {len(vec)}")
            params[key] = np.array(vec)
    try:
        initial_gain(dim, params["gain0"])
    except ValueError as exc:
        raise ConfigError(f"{path}.gain0: {exc}") from exc
    # rate/forgetting ranges are reported by spec_checks, not rejected here
    return EstimatorSpec(name, kind, params)


def spec_checks(spec: EstimatorSpec) -> tuple[list[Check], float | None]:
    """Constraint checks for one estimator and, for HB-TV, the eta lower bound."""
    p = spec.params
    if spec.kind == "hbtv":
        report = validate_hyperparameters(spec.hyper())
        return report.checks, report.eta_bound
    if spec.kind == "rlsff":
        lb = p["forgetting"]
        return [Check("0 < forgetting <= 1", 0 < lb <= 1, f"forgetting = {lb:.6g}")], None
    if spec.kind == "ngd":
        a = p["rate"]
        return [Check("0 < rate < 2", 0 < a < 2, f"rate = {a:.6g}")], None
    g, b = p["rate"], p["momentum"]
    return [
        Check("rate > 0", g > 0, f"rate = {g:.6g}"),
        Check("0 <= momentum < 1", 0 <= b < 1, f"momentum = {b:.6g}"),
    ], None


def _parse_outputs(d, name: str) -> OutputSpec:
    d = _mapping(d, "outputs")
    plots = []
    for i, p in enumerate(d.get("plots", [])):
        ppath = f"outputs.plots[{i}]"
        p = _mapping(p, ppath)
        cols = _need(p, "columns", ppath)
        if not isinstance(cols, list) or not cols or not all(isinstance(c, str) for c in cols):
            raise ConfigError(f"{ppath}.columns: expected a non-empty list of column names")
        plots.append(
            PlotSpec(
                str(_need(p, "file", ppath)),
                cols,
                bool(p.get("log", True)),
                str(p.get("title", "")),
                _number(p.get("floor", 1e-16), f"{ppath}.floor"),
            )
        )
    return OutputSpec(
        str(d.get("dir", f"out/{name}")),
        str(d.get("trace", "trace.csv")),
        str(d.get("summary", "summary.txt")),
        plots or [PlotSpec(p.file, list(p.columns), p.log, p.title, p.floor) for p in DEFAULT_PLOTS],
    )


def parse_config(raw: Mapping) -> ExperimentConfig:
    raw = _mapping(raw, "config")
    name = str(raw.get("name", "experiment"))
    plant = _parse_plant(_need(raw, "plant", "config"))
    signal = _parse_signal(_need(raw, "signal", "config"))
    horizon = _integer(_need(raw, "horizon", "config"), "config.horizon", 1)
    pe_window = _integer(raw.get("pe_window", DEFAULT_PE_WINDOW), "config.pe_window", 1)
    ests = _need(raw, "estimators", "config")
    if not isinstance(ests, list) or not ests:
        raise ConfigError("config.estimators: need at least one estimator")
    dim = RegressionProblem.from_plant(plant).dim
    specs = [_parse_estimator(e, i, dim) for i, e in enumerate(ests)]
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError(f"config.estimators: duplicate estimator names {names}")
    outputs = _parse_outputs(raw.get("outputs", {}), name)
    return ExperimentConfig(name, plant, signal, horizon, specs, pe_window, outputs)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config not found: {path}")
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(raw)


# -- traces -----------------------------------------------------------------------


@dataclass
class EstimatorTrace:
    """Per-step record of one estimator; row k is the state after consuming sample k."""

    name: str
    kind: str
    e_y: np.ndarray
    theta_err: np.ndarray
    gain_max: np.ndarray
    gain_min: np.ndarray
    normalizer: np.ndarray
    lyapunov: np.ndarray
    theta: np.ndarray
    vartheta: np.ndarray
    gain: np.ndarray
    theta0: np.ndarray
    vartheta0: np.ndarray
    gain0: np.ndarray
    failure: str | None = None
    failure_step: int | None = None

    @property
    def steps(self) -> int:
        return len(self.e_y)

    @property
    def gain_history(self) -> np.ndarray:
        """F_0, F_1, ..., with the initial gain first."""
        return np.concatenate([self.gain0[None], self.gain])

    @property
    def theta_history(self) -> np.ndarray:
        return np.concatenate([self.theta0[None], self.theta])

    @property
    def vartheta_history(self) -> np.ndarray:
        return np.concatenate([self.vartheta0[None], self.vartheta])


@dataclass
class Trace:
    name: str
    u: np.ndarray
    y: np.ndarray
    phi: np.ndarray
    theta_star: np.ndarray
    estimators: dict[str, EstimatorTrace]
    pe: PeReport | None = None

    @property
    def horizon(self) -> int:
        return len(self.y)

    @property
    def failures(self) -> dict[str, tuple[int, str]]:
        return {n: (t.failure_step, t.failure) for n, t in self.estimators.items() if t.failure}


def _record(est: OnlineEstimator, phis, ys, theta_star) -> EstimatorTrace:
    K = len(ys)
    dim = len(theta_star)
    cols = {c: np.full(K, np.nan) for c in ("e_y", "theta_err", "gain_max", "gain_min", "normalizer", "lyapunov")}
    theta = np.full((K, dim), np.nan)
    vartheta = np.full((K, dim), np.nan)
    gain = np.full((K, dim, dim), np.nan)
    theta0, vartheta0, gain0 = est.theta.copy(), est.vartheta.copy(), est.gain.copy()
    failure = failure_step = None
    done = K
    for k in range(K):
        try:
            e_y, diag = est.step(phis[k], ys[k])
        except EstimatorError as exc:
            failure, failure_step, done = str(exc), k, k
            break
        cols["e_y"][k] = e_y
        cols["normalizer"][k] = diag.normalizer
        cols["gain_max"][k] = diag.gain_max
        cols["gain_min"][k] = diag.gain_min
        theta[k] = est.theta
        vartheta[k] = est.vartheta
        gain[k] = est.gain
        cols["theta_err"][k] = np.linalg.norm(est.theta - theta_star)
        cols["lyapunov"][k] = lyapunov_value(est.vartheta, est.theta, theta_star, est.gain)
    cut = {c: v[:done] for c, v in cols.items()}
    return EstimatorTrace(
        est.name,
        est.kind,
        theta=theta[:done],
        vartheta=vartheta[:done],
        gain=gain[:done],
        theta0=theta0,
        vartheta0=vartheta0,
        gain0=gain0,
        failure=failure,
        failure_step=failure_step,
        **cut,
    )


def run_estimators(
    estimators: list[OnlineEstimator], phis: np.ndarray, ys: np.ndarray, theta_star: np.ndarray
) -> dict[str, EstimatorTrace]:
    """Step each estimator over the shared stream; a failure truncates only that estimator."""
    return {est.name: _record(est, phis, ys, theta_star) for est in estimators}


def run(config: ExperimentConfig) -> Trace:
    samples = simulate(config.plant, config.signal, config.horizon)
    problem = RegressionProblem.from_plant(config.plant)
    phis = np.array([s.phi for s in samples])
    ys = np.array([s.y for s in samples])
    us = np.array([s.u for s in samples])
    ests = [spec.build(problem.dim) for spec in config.estimators]
    traces = run_estimators(ests, phis, ys, problem.true_theta)
    pe = pe_metrics(phis, config.pe_window) if config.horizon >= config.pe_window else None
    return Trace(config.name, us, ys, phis, problem.true_theta, traces, pe)


# -- CSV ------------------------------------------------------------------------

BASE_COLUMNS = ("k", "estimator", "u", "y", "e_y", "abs_e_y", "theta_err", "gain_max", "gain_min", "N", "V")


def csv_columns(dim: int) -> list[str]:
    return (
        list(BASE_COLUMNS)
        + [f"theta_{i}" for i in range(dim)]
        + [f"vartheta_{i}" for i in range(dim)]
        + [f"gain_{i}_{j}" for i in range(dim) for j in range(dim)]
    )


def _fmt(x) -> str:
    # repr of a Python float is the shortest string that round-trips exactly
    return repr(float(x))


def write_csv(trace: Trace, path: str | Path) -> Path:
    """One header row, then one row per step per estimator, step-major."""
    path = Path(path)
    dim = len(trace.theta_star)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_columns(dim))
        for k in range(trace.horizon):
            for t in trace.estimators.values():
                if k >= t.steps:
                    continue
                row = [
                    str(k),
                    t.name,
                    _fmt(trace.u[k]),
                    _fmt(trace.y[k]),
                    _fmt(t.e_y[k]),
                    _fmt(abs(t.e_y[k])),
                    _fmt(t.theta_err[k]),
                    _fmt(t.gain_max[k]),
                    _fmt(t.gain_min[k]),
                    _fmt(t.normalizer[k]),
                    _fmt(t.lyapunov[k]),
                ]
                row += [_fmt(v) for v in t.theta[k]]
                row += [_fmt(v) for v in t.vartheta[k]]
                row += [_fmt(v) for v in t.gain[k].ravel()]
                w.writerow(row)
    return path


@dataclass
class TraceTable:
    """A trace CSV read back as float columns grouped by estimator."""

    columns: list[str]
    data: dict[str, dict[str, np.ndarray]]

    @property
    def dim(self) -> int:
        return sum(c.startswith("theta_") and c[6:].isdigit() for c in self.columns)


def read_csv(path: str | Path) -> TraceTable:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty trace file") from None
        if "estimator" not in header:
            raise ValueError(f"{path}: not a trace file (no 'estimator' column)")
        est_col = header.index("estimator")
        rows: dict[str, list[list[str]]] = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            rows.setdefault(row[est_col], []).append(row)
    data = {}
    for name, rs in rows.items():
        cols = {}
        for j, col in enumerate(header):
            if j == est_col:
                continue
            cols[col] = np.array([float(r[j]) for r in rs])
        data[name] = cols
    return TraceTable(header, data)


# -- comparison and summary ------------------------------------------------------

METRICS = ("final_param_err", "final_output_err", "fitted_rate")


@dataclass(frozen=True)
class Ranked:
    rank: int
    name: str
    value: float


def metric_value(t: EstimatorTrace, metric: str, burn_in: int = DEFAULT_PE_WINDOW) -> float:
    if t.steps == 0:
        raise ValueError(f"{t.name}: empty trace")
    if metric == "final_param_err":
        return float(t.theta_err[-1])
    if metric == "final_output_err":
        return float(abs(t.e_y[-1]))
    if metric == "fitted_rate":
        return exp_rate_fit(t.theta_err, burn_in).rate
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


def compare(
    traces: Trace | Mapping[str, EstimatorTrace], metric: str, burn_in: int = DEFAULT_PE_WINDOW
) -> list[Ranked]:
    """Rank estimators on one metric; equal values share a rank.

    Errors rank ascending, fitted decay rates descending.
    """
    ests = traces.estimators if isinstance(traces, Trace) else traces
    lengths = {t.steps for t in ests.values()}
    if len(lengths) > 1:
        raise ValueError(f"traces differ in length: {sorted(lengths)}")
    values = {name: metric_value(t, metric, burn_in) for name, t in ests.items()}
    sign = -1.0 if metric == "fitted_rate" else 1.0
    order = sorted(values, key=lambda n: sign * values[n])
    out = []
    for i, name in enumerate(order):
        if i and values[name] == values[order[i - 1]]:
            rank = out[-1].rank
        else:
            rank = i + 1
        out.append(Ranked(rank, name, values[name]))
    return out


def _g(x: float | None) -> str:
    return "n/a" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.4e}"


def summary(trace: Trace, burn_in: int = DEFAULT_PE_WINDOW) -> str:
    lines = [f"experiment: {trace.name}", f"horizon: {trace.horizon} steps", f"theta*: {trace.theta_star.tolist()}"]
    if trace.pe is not None:
        pe = trace.pe
        lines.append(
            f"excitation (window {pe.window}): eps1 = {pe.eps1:.4e}, eps2 = {pe.eps2:.4e}, "
            f"max |phi|^2 = {pe.max_phi_norm_sq:.4e}, PE: {'yes' if pe.is_pe else 'no'}"
        )
    header = f"{'estimator':<12} {'kind':<6} {'steps':>6} {'|theta err|':>12} {'|e_y|':>12} {'rate':>12} {'R^2':>8} {'max gain':>12}"
    lines += ["", header, "-" * len(header)]
    for t in trace.estimators.values():
        if t.steps:
            try:
                fit = exp_rate_fit(t.theta_err, burn_in)
                rate, r2 = fit.rate, f"{fit.r_squared:8.4f}"
            except ValueError:
                rate, r2 = None, f"{'n/a':>8}"
            row = (
                f"{t.name:<12} {t.kind:<6} {t.steps:>6} {_g(float(t.theta_err[-1])):>12} "
                f"{_g(float(abs(t.e_y[-1]))):>12} {_g(rate):>12} {r2} {_g(float(np.max(t.gain_max))):>12}"
            )
        else:
            row = f"{t.name:<12} {t.kind:<6} {0:>6}"
        lines.append(row)
    for name, (k, msg) in trace.failures.items():
        lines.append(f"FAILED {name} at step {k}: {msg}")
    if len(trace.estimators) > 1 and not trace.failures:
        lines.append("")
        for metric in METRICS:
            try:
                ranking = compare(trace, metric, burn_in)
            except ValueError:
                continue
            lines.append(f"{metric}: " + ", ".join(f"{r.rank}. {r.name} ({r.value:.4e})" for r in ranking))
    return "\n".join(lines) + "\n"
