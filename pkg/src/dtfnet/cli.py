"""Command-line front end: ``dtfnet {synth,filter,train,extract,eval,tsf,compare}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from .core import (
    ConfigError,
    DataError,
    LabeledSeries,
    NumericalError,
    RunConfig,
    atomic_write_text,
    load_csv,
    write_csv,
)

log = logging.getLogger("dtfnet")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _StderrHandler(logging.StreamHandler):
    """Writes to whatever ``sys.stderr`` is at emit time."""

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, _):
        pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


# --- helpers ----------------------------------------------------------------

CONFIG_FLAGS = {
    "h": int,
    "p": int,
    "H": int,
    "reward_ratio": float,
    "reward_mode": str,
    "d_model": int,
    "rl_steps": int,
    "episodes_max": int,
    "learning_rate_agent": float,
    "learning_rate_forecaster": float,
    "forecaster_epochs": int,
    "seed": int,
    "agent": str,
    "gamma": float,
    "hidden": int,
    "batch_size": int,
}


def _add_config_flags(sp, keys=None):
    sp.add_argument("--config", type=Path, help="key=value config file; flags override it")
    for key in keys or CONFIG_FLAGS:
        flag = "--" + key.replace("_", "-") if key != "H" else "--max-episode-len"
        sp.add_argument(flag, dest=key, type=CONFIG_FLAGS[key], default=None, help=f"override {key}")


def resolve_config(args) -> RunConfig:
    """Config file, then DTF_SEED for a missing seed, then explicit flags."""
    overrides = {k: getattr(args, k, None) for k in CONFIG_FLAGS}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    items = {}
    config = getattr(args, "config", None)
    if config is not None:
        base = RunConfig.from_file(config)
        items = {k: getattr(base, k) for k in CONFIG_FLAGS}
        file_keys = _file_keys(config)
    else:
        file_keys = set()
    if "seed" not in overrides and "seed" not in file_keys and os.environ.get("DTF_SEED"):
        items["seed"] = int(os.environ["DTF_SEED"])
    items.update(overrides)
    cfg = RunConfig.from_mapping(items)
    log.info("resolved config: %s", " ".join(cfg.to_text().split()))
    return cfg


def _file_keys(path) -> set:
    keys = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if "=" in line:
            keys.add(line.split("=", 1)[0].strip())
    return keys


def read_series(path, column: str | None = None) -> LabeledSeries:
    """Load a CSV; ``clean`` and ``label`` columns become ground truth if present."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    header = path.read_text(encoding="utf-8").splitlines()[:1]
    names = [h.strip() for h in header[0].split(",")] if header else []
    if column is None:
        column = "noisy" if "noisy" in names else next((n for n in names if n.lower() not in ("t", "time", "date", "timestamp")), "noisy")
    raw = load_csv(path, column)
    clean = labels = None
    if "clean" in names and column != "clean":
        clean = load_csv(path, "clean", ["clean"]).target
    if "label" in names:
        lab = load_csv(path, "label", ["label"]).target
        labels = tuple(int(i) for i in np.flatnonzero(lab != 0))
    return LabeledSeries(raw.target, clean=clean, abrupt_indices=labels or (), name=path.stem)


def read_trend(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".json":
        from .core import load_trend_json

        return load_trend_json(path)[0]
    return load_csv(path, "trend", ["trend"]).target


def _sidecar(path, suffix: str) -> Path:
    path = Path(path)
    return path.with_name(path.stem + suffix)


# --- subcommands ------------------------------------------------------------


def cmd_synth(args) -> int:
    from .synth import SynthSpec, describe_labels, generate_synthetic

    cfg = resolve_config(args)
    seed = args.seed if args.seed is not None else cfg.seed
    series = generate_synthetic(SynthSpec(args.n_points, args.noise_std, seed))
    label = np.zeros(series.n, dtype=np.int64)
    label[list(series.abrupt_indices)] = 1
    write_csv(args.out, {"noisy": series.target, "clean": series.clean, "label": label})
    labels_out = args.labels_out or _sidecar(args.out, ".labels.json")
    doc = [{"index": int(i), "kind": k} for i, k in describe_labels(series)] if series.abrupt_indices else []
    atomic_write_text(labels_out, json.dumps(doc, indent=1) + "\n")
    return EXIT_OK


def cmd_filter(args) -> int:
    from . import filters
    from .eval import DEFAULT_PARAMS, _haar_universal

    resolve_config(args)
    series = read_series(args.input, args.column)
    y = series.target
    param = args.param if args.param is not None else DEFAULT_PARAMS[args.method]
    if args.method == "hp":
        trend = filters.hp_filter(y, param)
    elif args.method == "l1":
        if args.strict:
            trend = filters.l1_filter(y, param, strict=True)
        else:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                trend = filters.l1_filter(y, param)
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
    elif args.method == "median":
        trend = filters.median_filter(y, int(param))
    elif args.method == "ma":
        trend = filters.moving_average(y, int(param))
    else:
        trend = _haar_universal(y, param)
    write_csv(args.out, {"t": range(series.n), "raw": y, "trend": trend})
    return EXIT_OK


def cmd_train(args) -> int:
    from .dtf import train_agent
    from .core import Rng
    from .forecast import phi_pretrain

    if args.agent is not None:
        args.agent = args.agent.upper()
    cfg = resolve_config(args)
    series = read_series(args.input, args.column)
    rng = Rng(cfg.seed)
    phi = phi_pretrain(series, cfg, rng.split("phi"))
    result = train_agent(series, cfg, phi, rng.split("agent"))
    log.debug("trained %d steps over %d episodes", result.steps, len(result.episode_returns))
    result.policy.save(args.out)
    if args.phi_out:
        phi.save(args.phi_out)
    curve = args.curve_out or _sidecar(args.out, ".curve.csv")
    write_csv(curve, {"episode": range(len(result.episode_returns)), "return": result.episode_returns})
    return EXIT_OK


def cmd_extract(args) -> int:
    from .dtf import PolicyModel, extract_trend

    cfg = resolve_config(args)
    series = read_series(args.input, args.column)
    policy = PolicyModel.load(args.checkpoint)
    if policy.window != cfg.window or policy.d_model != cfg.d_model:
        raise ConfigError(
            f"checkpoint expects window {policy.window} and d_model {policy.d_model}; "
            f"config gives {cfg.window} and {cfg.d_model}"
        )
    trend, actions = extract_trend(series, policy, cfg)
    write_csv(args.out, {"t": range(series.n), "raw": series.target, "trend": trend, "action": actions})
    actions_out = args.actions_out or _sidecar(args.out, ".actions.json")
    doc = {"actions": [int(a) for a in actions], "dtp": [int(i) for i in np.flatnonzero(actions)]}
    atomic_write_text(actions_out, json.dumps(doc) + "\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .eval import trend_metrics, write_table_csv

    resolve_config(args)
    series = read_series(args.input, args.column)
    trend = read_trend(args.trend)
    metrics = trend_metrics(trend, series, args.window)
    write_table_csv([(args.label, metrics)], args.out)
    return EXIT_OK


def cmd_tsf(args) -> int:
    from .dtf import PolicyModel
    from .eval import tsf_experiment

    cfg = resolve_config(args)
    series = read_series(args.input, args.column)
    trend = None
    if args.checkpoint is not None:
        trend = PolicyModel.load(args.checkpoint)
    elif args.trend is not None:
        trend = read_trend(args.trend)
    horizons = [int(h) for h in args.horizons.split(",") if h.strip()]
    res = tsf_experiment(series, trend, args.model, horizons, cfg, lookback=args.lookback)
    write_csv(args.out, {
        "horizon": list(res),
        "mse": [v[0] for v in res.values()],
        "mae": [v[1] for v in res.values()],
    })
    return EXIT_OK


def cmd_compare(args) -> int:
    from .eval import comparison_table, parse_method, write_plot_csv, write_table_csv, run_method
    from .synth import SynthSpec, generate_synthetic

    cfg = resolve_config(args)
    methods = [m for m in args.methods.split(",") if m.strip()]
    for m in methods:
        parse_method(m)
    if args.input is not None:
        series = read_series(args.input, args.column)
    else:
        series = generate_synthetic(SynthSpec(seed=cfg.seed))
    rows = comparison_table(series, methods, cfg)
    write_table_csv(rows, args.out)
    if args.plot_dir is not None:
        for m in methods:
            trend, acts = run_method(m, series, cfg)
            write_plot_csv(Path(args.plot_dir) / f"{m.replace(':', '_')}.csv", series, trend, acts)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dtfnet", description="Dynamic trend filtering with trend-point detection.")
    parser.add_argument("-v", "--verbose", action="store_true", help="verbose progress logging on stderr")
    common = _Parser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                        help="verbose progress logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("synth", parents=[common], help="write the synthetic benchmark series")
    sp.add_argument("--out", required=True, type=Path, help="output CSV (noisy, clean, label)")
    sp.add_argument("--labels-out", type=Path, help="labels JSON (default: <out>.labels.json)")
    sp.add_argument("--n-points", type=int, default=1000, help="series length")
    sp.add_argument("--noise-std", type=float, default=0.2, help="Gaussian noise standard deviation")
    _add_config_flags(sp, ["seed"])
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("filter", parents=[common], help="run a classical trend filter")
    sp.add_argument("--input", required=True, type=Path, help="input CSV")
    sp.add_argument("--column", help="target column (default: noisy or first non-time column)")
    sp.add_argument("--method", required=True, choices=["hp", "l1", "median", "ma", "haar"], help="filter")
    sp.add_argument("--param", type=float, help="lambda, window or threshold (method default if omitted)")
    sp.add_argument("--strict", action="store_true", help="fail with exit 3 if the l1 solver does not converge")
    sp.add_argument("--out", required=True, type=Path, help="output CSV (t, raw, trend)")
    _add_config_flags(sp, ["seed"])
    sp.set_defaults(func=cmd_filter)

    sp = sub.add_parser("train", parents=[common], help="pre-train phi and train the labelling agent")
    sp.add_argument("--input", required=True, type=Path, help="input CSV")
    sp.add_argument("--column", help="target column")
    sp.add_argument("--out", required=True, type=Path, help="policy checkpoint JSON")
    sp.add_argument("--curve-out", type=Path, help="reward-curve CSV (default: <out>.curve.csv)")
    sp.add_argument("--phi-out", type=Path, help="also save the frozen forecaster")
    _add_config_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("extract", parents=[common], help="label a series with a trained policy")
    sp.add_argument("--input", required=True, type=Path, help="input CSV")
    sp.add_argument("--column", help="target column")
    sp.add_argument("--checkpoint", required=True, type=Path, help="policy checkpoint JSON")
    sp.add_argument("--out", required=True, type=Path, help="trend CSV (t, raw, trend, action)")
    sp.add_argument("--actions-out", type=Path, help="actions JSON (default: <out>.actions.json)")
    _add_config_flags(sp, ["h", "p", "d_model"])
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("eval", parents=[common], help="score a trend against the clean signal")
    sp.add_argument("--input", required=True, type=Path, help="CSV with clean and label columns")
    sp.add_argument("--column", help="target column")
    sp.add_argument("--trend", required=True, type=Path, help="trend CSV (trend column) or JSON")
    sp.add_argument("--window", type=int, default=30, help="abrupt-change window width")
    sp.add_argument("--label", default="trend", help="method name written to the table")
    sp.add_argument("--out", required=True, type=Path, help="metrics CSV")
    _add_config_flags(sp, ["seed"])
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("tsf", parents=[common], help="forecasting with an optional trend channel")
    sp.add_argument("--input", required=True, type=Path, help="input CSV")
    sp.add_argument("--column", help="target column")
    group = sp.add_mutually_exclusive_group()
    group.add_argument("--trend", type=Path, help="precomputed trend CSV/JSON")
    group.add_argument("--checkpoint", type=Path, help="policy checkpoint producing a causal trend")
    sp.add_argument("--model", default="nlinear", choices=["nlinear", "dlinear", "mlp"], help="forecaster kind")
    sp.add_argument("--horizons", default="24", help="comma-separated horizons")
    sp.add_argument("--lookback", type=int, help="look-back length (default: h)")
    sp.add_argument("--out", required=True, type=Path, help="metrics CSV (horizon, mse, mae)")
    _add_config_flags(sp)
    sp.set_defaults(func=cmd_tsf)

    sp = sub.add_parser("compare", parents=[common], help="comparison table over trend methods")
    sp.add_argument("--input", type=Path, help="CSV with clean/label columns (default: synthetic series)")
    sp.add_argument("--column", help="target column")
    sp.add_argument("--methods", default="dtf,hp,l1,median,ma,haar", help="comma-separated, e.g. l1:5e-4")
    sp.add_argument("--out", required=True, type=Path, help="metrics CSV")
    sp.add_argument("--plot-dir", type=Path, help="also write tidy per-method plot CSVs here")
    _add_config_flags(sp)
    sp.set_defaults(func=cmd_compare)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr, end="")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    # the resolved config is always logged; -v adds progress detail
    level = logging.DEBUG if args.verbose else logging.INFO
    if not log.handlers:
        handler = _StderrHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        log.addHandler(handler)
    log.setLevel(level)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
