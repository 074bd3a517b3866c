"""Command-line front end.

    hbtv run CONFIG [--out-dir DIR]
    hbtv validate CONFIG
    hbtv plot TRACE --cols COL [COL ...] [--log] --out FILE.svg

Exit codes: 0 success, 1 validation failure, 2 I/O or parse failure,
3 numeric divergence.  ``HBTV_OUTPUT_DIR`` overrides the output directory
named in a config.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from pathlib import Path

from . import harness
from .estimators import EstimatorError
from .harness import ConfigError, PlotSpec, TraceTable
from .plant import SimulationDivergence
from .svgplot import ClippedValuesWarning, line_plot

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_DIVERGED = 0, 1, 2, 3
OUTPUT_DIR_ENV = "HBTV_OUTPUT_DIR"


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _load(config_path):
    try:
        return harness.load_config(config_path)
    except FileNotFoundError as exc:
        _err(str(exc))
    except ConfigError as exc:
        _err(f"invalid config: {exc}")
    return None


def _validation_lines(config) -> tuple[list[str], bool]:
    lines, ok = [], True
    for spec in config.estimators:
        checks, bound = harness.spec_checks(spec)
        lines.append(f"{spec.name} ({spec.kind})")
        for c in checks:
            status = "PASS" if c.passed else ("FAIL" if c.hard else "WARN")
            lines.append(f"  [{status}] {c.name}: {c.detail}")
            ok &= c.passed or not c.hard
        if bound is not None:
            lines.append(f"  eta lower bound: {bound:.6g}")
    return lines, ok


def render_plot(table: TraceTable, spec: PlotSpec, estimators=None) -> str:
    missing = [c for c in spec.columns if c not in table.columns or c == "estimator"]
    if missing:
        raise KeyError(f"unknown column(s) {missing}; available: {table.columns}")
    names = list(table.data) if estimators is None else list(estimators)
    if not names or not any(len(table.data[n]["k"]) for n in names if n in table.data):
        raise ValueError("trace has no rows")
    series = []
    for name in names:
        if name not in table.data:
            raise KeyError(f"unknown estimator {name!r}")
        cols = table.data[name]
        for c in spec.columns:
            label = name if len(spec.columns) == 1 else f"{name} {c}"
            series.append((label, cols["k"], cols[c]))
    ylabel = spec.columns[0] if len(spec.columns) == 1 else ""
    return line_plot(series, log=spec.log, title=spec.title, ylabel=ylabel, floor=spec.floor)


def cmd_run(config_path, out_dir=None) -> int:
    config = _load(config_path)
    if config is None:
        return EXIT_IO
    lines, ok = _validation_lines(config)
    if not ok:
        print("\n".join(lines))
        _err("hyperparameters violate hard constraints; not running")
        return EXIT_INVALID
    try:
        trace = harness.run(config)
    except SimulationDivergence as exc:
        _err(str(exc))
        return EXIT_DIVERGED
    except EstimatorError as exc:
        _err(str(exc))
        return EXIT_DIVERGED
    target = Path(out_dir or os.environ.get(OUTPUT_DIR_ENV) or config.outputs.dir)
    try:
        target.mkdir(parents=True, exist_ok=True)
        trace_path = harness.write_csv(trace, target / config.outputs.trace)
        text = harness.summary(trace, burn_in=config.pe_window)
        (target / config.outputs.summary).write_text(text)
        table = harness.read_csv(trace_path)
        written = [trace_path, target / config.outputs.summary]
        for spec in config.outputs.plots:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ClippedValuesWarning)
                svg = render_plot(table, spec)
            path = target / spec.file
            path.write_text(svg)
            written.append(path)
    except (OSError, KeyError, ValueError) as exc:
        _err(f"cannot write outputs: {exc}")
        return EXIT_IO
    print(text, end="")
    for p in written:
        print(f"wrote {p}")
    return EXIT_DIVERGED if trace.failures else EXIT_OK


def cmd_validate(config_path) -> int:
    config = _load(config_path)
    if config is None:
        return EXIT_IO
    lines, ok = _validation_lines(config)
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_INVALID


def cmd_plot(trace_path, spec: PlotSpec, estimators=None) -> int:
    try:
        table = harness.read_csv(trace_path)
    except FileNotFoundError:
        _err(f"trace not found: {trace_path}")
        return EXIT_IO
    except ValueError as exc:
        _err(str(exc))
        return EXIT_IO
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ClippedValuesWarning)
            svg = render_plot(table, spec, estimators)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        Path(spec.file).write_text(svg)
    except KeyError as exc:
        _err(str(exc.args[0]))
        return EXIT_IO
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_IO
    print(f"wrote {spec.file}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hbtv", description="Online parameter estimation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config and write trace, summary and plots")
    p_run.add_argument("config")
    p_run.add_argument("--out-dir", help=f"output directory (overrides ${OUTPUT_DIR_ENV} and the config)")

    p_val = sub.add_parser("validate", help="check estimator hyperparameters in a config")
    p_val.add_argument("config")

    p_plot = sub.add_parser("plot", help="plot trace columns to SVG")
    p_plot.add_argument("trace")
    p_plot.add_argument("--cols", nargs="+", required=True, help="trace columns to plot")
    p_plot.add_argument("--log", action="store_true", help="log10 y axis")
    p_plot.add_argument("--out", required=True, help="output SVG path")
    p_plot.add_argument("--title", default="")
    p_plot.add_argument("--floor", type=float, default=1e-16, help="log-axis floor for nonpositive values")
    p_plot.add_argument("--estimators", nargs="+", help="restrict to these estimators")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out_dir)
    if args.command == "validate":
        return cmd_validate(args.config)
    spec = PlotSpec(args.out, args.cols, args.log, args.title, args.floor)
    return cmd_plot(args.trace, spec, args.estimators)


if __name__ == "__main__":
    sys.exit(main())
