"""Command-line front end.

Subcommands: ``compress``, ``evaluate``, ``histogram``, ``bench`` and
``synth``.  Every run echoes its resolved configuration as one JSON line on
stderr.  Exit codes: 0 success, 2 usage, 3 data error, 4 invariant violation.
"""
from __future__ import annotations

import argparse
import io
import json
import os
import sys
from pathlib import Path

from . import evaluation as ev
from .bwc import INCREASE, PRINTED, WindowConfig
from .classic import PREDICTORS, TWO_POINT
from .errors import ConfigError, DataError, InvariantError
from .ingest import (
    MODELS,
    Schema,
    SynthSpec,
    load_csv,
    synth,
    write_kept_csv,
    write_trajectories_csv,
)

DATA_DIR_ENV = "BWCTRAJ_DATA_DIR"

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 2, 3, 4

# which tuning flags each algorithm accepts
ALGO_FLAGS = {
    "squish": {"capacity"},
    "sttrace": {"capacity", "gate"},
    "dr": {"epsilon", "predictor"},
    "tdtr": {"tolerance"},
    "bwc-squish": {"bw", "delta", "start"},
    "bwc-sttrace": {"bw", "delta", "start"},
    "bwc-sttrace-imp": {"bw", "delta", "start", "precision", "imp_sign"},
    "bwc-dr": {"bw", "delta", "start", "predictor"},
}
REQUIRED = {
    "squish": ("capacity",),
    "sttrace": ("capacity",),
    "dr": ("epsilon",),
    "tdtr": ("tolerance",),
    "bwc-squish": ("bw", "delta"),
    "bwc-sttrace": ("bw", "delta"),
    "bwc-sttrace-imp": ("bw", "delta"),
    "bwc-dr": ("bw", "delta"),
}
TUNING = ("capacity", "gate", "epsilon", "predictor", "tolerance", "bw", "delta", "start",
          "precision", "imp_sign")


class UsageError(ConfigError):
    pass


def _resolve_path(path):
    p = Path(path)
    if not p.is_absolute() and not p.exists() and os.environ.get(DATA_DIR_ENV):
        alt = Path(os.environ[DATA_DIR_ENV]) / p
        if alt.exists():
            return alt
    return p


def _schema(args):
    return Schema.from_file(_resolve_path(args.schema)) if args.schema else Schema()


def _load(args):
    if not args.input:
        raise UsageError("--input is required")
    path = _resolve_path(args.input)
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    return path, load_csv(path, _schema(args))


def _algo_params(args, trajectories) -> dict:
    algo = args.algo
    if algo not in ALGO_FLAGS:
        raise UsageError(f"unknown algorithm {algo!r}; choose from {', '.join(ev.ALGORITHMS)}")
    given = {k for k in TUNING if getattr(args, k, None) is not None}
    stray = given - ALGO_FLAGS[algo]
    if stray:
        flags = ", ".join("--" + s.replace("_", "-") for s in sorted(stray))
        raise UsageError(f"{flags} not applicable to {algo}")
    params = {}
    if getattr(args, "ratio", None) is not None:
        params = ev.derive_params(algo, trajectories, args.ratio, delta=args.delta,
                                  precision=args.precision,
                                  predictor=args.predictor or TWO_POINT)
    else:
        missing = [r for r in REQUIRED[algo] if getattr(args, r) is None]
        if missing:
            flags = ", ".join("--" + m for m in missing)
            raise UsageError(f"{algo} needs {flags} (or --ratio)")
    for k in given:
        params["sign" if k == "imp_sign" else k] = getattr(args, k)
    if algo in ev.BWC:
        params.setdefault("start", ev.stream_span(trajectories)[0])
    if algo == "bwc-sttrace-imp" and "precision" not in params:
        params["precision"] = min(ev.default_interval(trajectories), params["delta"])
    return params


def _echo(args, **resolved):
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg.update(resolved)
    print(json.dumps(cfg, sort_keys=True, default=str), file=sys.stderr)


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def cmd_compress(args):
    if not args.output:
        raise UsageError("--output is required")
    path, trajectories = _load(args)
    params = _algo_params(args, trajectories)
    _echo(args, params=params)
    samples = ev.run_algorithm(args.algo, trajectories, params)
    if args.algo in ev.BWC:
        hist = ev.window_histogram(samples, WindowConfig(params["bw"], params["delta"],
                                                         params["start"]))
        if hist.violations():
            raise InvariantError(f"bandwidth cap exceeded in windows {hist.violations()}")
    kept = {p.key for s in samples.values() for p in s}
    write_kept_csv(path, args.output, kept, _schema(args))
    return EXIT_OK


def _samples_from_args(args, trajectories):
    if args.sample:
        sample_path = _resolve_path(args.sample)
        if not sample_path.exists():
            raise DataError(f"sample file not found: {sample_path}")
        return load_csv(sample_path, _schema(args)), {}
    if not args.algo:
        raise UsageError("give --sample FILE or --algo with its parameters")
    params = _algo_params(args, trajectories)
    return ev.run_algorithm(args.algo, trajectories, params), params


def cmd_evaluate(args):
    _, trajectories = _load(args)
    samples, params = _samples_from_args(args, trajectories)
    report = ev.accuracy(trajectories, samples, args.interval)
    _echo(args, params=params, interval=report.interval)
    fh, close = _open_out(args.output)
    try:
        ev.write_accuracy_csv(report, fh)
    finally:
        if close:
            fh.close()
    return EXIT_OK


def cmd_histogram(args):
    _, trajectories = _load(args)
    samples, params = _samples_from_args(args, trajectories)
    delta = args.delta if args.delta is not None else params.get("delta")
    if delta is None:
        raise UsageError("histogram needs --delta")
    start = args.start if args.start is not None else params.get(
        "start", ev.stream_span(trajectories)[0])
    bw = args.bw if args.bw is not None else params.get("bw")
    cfg = WindowConfig(bw or 1, delta, start)
    hist = ev.window_histogram(samples, cfg, end=ev.stream_span(trajectories)[1], bw=bw)
    _echo(args, params=params, resolved_start=start)
    fh, close = _open_out(args.output)
    try:
        ev.write_histogram_csv(hist, fh)
    finally:
        if close:
            fh.close()
    return EXIT_OK


def _bench_data(args):
    if args.input:
        return _load(args)[1]
    spec = SynthSpec(n_trajectories=args.n, duration=args.duration, period=args.period,
                     model=args.model)
    return synth(args.seed, spec)


def cmd_bench(args):
    trajectories = _bench_data(args)
    algos = ev.ALGORITHMS if args.algos == "all" else tuple(a.strip() for a in args.algos.split(","))
    unknown = [a for a in algos if a not in ev.ALGORITHMS]
    if unknown:
        raise UsageError(f"unknown algorithms {unknown}")
    first, last = ev.stream_span(trajectories)
    delta = args.delta if args.delta is not None else (last - first) / 10.0
    configs = [(a, ev.derive_params(a, trajectories, args.ratio, delta=delta,
                                    predictor=args.predictor or TWO_POINT))
               for a in algos]
    _echo(args, resolved_delta=delta,
          params={a: {k: v for k, v in p.items() if k != "capacity" or a != "squish"}
                  for a, p in configs})
    rows = ev.compare(trajectories, configs, args.interval, delta=delta, timing=args.timing)
    fh, close = _open_out(args.output)
    try:
        if args.format == "text":
            fh.write(ev.format_table(rows) + "\n")
        else:
            ev.write_report_csv(rows, fh)
    finally:
        if close:
            fh.close()
    return EXIT_OK


def cmd_synth(args):
    if not args.output:
        raise UsageError("--output is required")
    spec = SynthSpec(n_trajectories=args.n, duration=args.duration, period=args.period,
                     model=args.model)
    _echo(args)
    write_trajectories_csv(synth(args.seed, spec), args.output)
    return EXIT_OK


def _add_tuning(p, ratio=True):
    g = p.add_argument_group("algorithm parameters")
    g.add_argument("--algo", help=f"one of: {', '.join(ev.ALGORITHMS)}")
    g.add_argument("--capacity", type=int, help="Squish per-trajectory / STTrace global buffer")
    g.add_argument("--gate", choices=("full", "always", "never"), help="STTrace pre-check mode")
    g.add_argument("--epsilon", type=float, help="DR deviation threshold (m)")
    g.add_argument("--predictor", choices=PREDICTORS)
    g.add_argument("--tolerance", type=float, help="TD-TR SED tolerance (m)")
    g.add_argument("--bw", type=int, help="points per window")
    g.add_argument("--delta", type=float, help="window duration (s)")
    g.add_argument("--start", type=float, help="first window start (s)")
    g.add_argument("--precision", type=float, help="BWC-STTrace-Imp sampling step (s)")
    g.add_argument("--imp-sign", dest="imp_sign", choices=(INCREASE, PRINTED))
    if ratio:
        g.add_argument("--ratio", type=float, help="derive parameters to keep this fraction")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bwctraj", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def io_args(p, output_help="output file"):
        p.add_argument("--input", help=f"input CSV (relative paths also tried under ${DATA_DIR_ENV})")
        p.add_argument("--schema", help="schema file describing the CSV columns")
        p.add_argument("--output", help=output_help)

    p = sub.add_parser("compress", help="simplify a CSV, writing the kept rows")
    io_args(p, "sample CSV (input columns plus kept=1)")
    _add_tuning(p)
    p.set_defaults(func=cmd_compress)

    for name, func, help_ in (("evaluate", cmd_evaluate, "accuracy report"),
                              ("histogram", cmd_histogram, "points per window")):
        p = sub.add_parser(name, help=help_)
        io_args(p, f"{help_} CSV (default stdout)")
        p.add_argument("--sample", help="sample CSV to evaluate instead of running --algo")
        p.add_argument("--interval", type=float, help="evaluation step (s)")
        _add_tuning(p)
        p.set_defaults(func=func)

    def synth_args(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--model", choices=MODELS, default="mixed")
        p.add_argument("--n", type=int, default=20, help="number of trajectories")
        p.add_argument("--duration", type=float, default=3600.0)
        p.add_argument("--period", type=float, default=10.0)

    p = sub.add_parser("bench", help="compare algorithms at a common ratio")
    io_args(p, "report file (default stdout)")
    synth_args(p)
    p.add_argument("--ratio", type=float, default=0.10)
    p.add_argument("--algos", default="all", help="comma-separated list or 'all'")
    p.add_argument("--delta", type=float, help="window duration (default: span / 10)")
    p.add_argument("--predictor", choices=PREDICTORS)
    p.add_argument("--interval", type=float)
    p.add_argument("--format", choices=("csv", "text"), default="csv")
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--output")
    synth_args(p)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return args.func(args)
    except InvariantError as e:
        print(f"bwctraj: invariant violated: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except ConfigError as e:
        print(f"bwctraj: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as e:
        print(f"bwctraj: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
