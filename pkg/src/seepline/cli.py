"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric fault.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    Flag,
    flag_abnormal,
    ingest_csv,
    make_windows,
    split_ranges,
    write_csv,
    write_flags_csv,
    zscore_apply,
    zscore_fit,
)
from .errors import ConfigError, SchemaError, SeeplineError
from .evaluation import TABLE5_GRID, evaluate_state, split_truth_pred, sweep
from .imputation import ForestParams, correlation_matrix, fit_imputer, ni_analyze, ni_impute
from .metrics import EvalReport
from .nn import NetworkState, TrainConfig, build_preset, predict_batch, train
from .pipeline import PipelineConfig, denoise_segments, run_pipeline
from .plotdata import KINDS, emit_plot_data, predictions_csv
from .synth import SyntheticSpec, generate, load_spec, write_synthetic
from .utils import atomic_write_json, atomic_write_text, derive_seed, sha256_file
from .wavelet import decompose

log = logging.getLogger("seepline")

FORMATS = ("csv", "json", "markdown")
_EXT = {"csv": "csv", "json": "json", "markdown": "md"}


def env_seed():
    raw = os.environ.get("SEEPLINE_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"SEEPLINE_SEED must be an integer, got {raw!r}") from None


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _stations(series, chosen, predictors):
    if chosen:
        missing = [c for c in chosen if c not in series.channels]
        if missing:
            raise SchemaError(f"channels not in input: {missing}")
        return list(chosen)
    return [c for c in series.channels if c not in predictors]


def _train_args(p):
    g = p.add_argument_group("training")
    g.add_argument("--preset", default="cnn-lstm-2")
    g.add_argument("--epochs", type=int, default=120)
    g.add_argument("--batch", type=int, default=64)
    g.add_argument("--lr", type=float, default=1e-3)
    g.add_argument("--wd", type=float, default=5e-3)
    g.add_argument("--patience", type=int, default=15)
    g.add_argument("--seq-len", type=int, default=10)
    g.add_argument("--fit-on", choices=("train", "all"), default="train")


def _train_config(args):
    return TrainConfig(args.epochs, args.batch, args.lr, args.wd, "mse", args.seed, args.patience)


def _prepare(series, channel, args):
    n = len(series)
    fit = split_ranges(n)["train"] if args.fit_on == "train" else (0, n)
    stats = zscore_fit(series, fit, [channel])
    ds = make_windows(zscore_apply(series, stats), args.seq_len, channel)
    ds.stats = stats
    ds.source_digest = sha256_file(args.input)
    return ds


def cmd_synth(args):
    spec = load_spec(args.spec) if args.spec else SyntheticSpec()
    updates = {"n": args.n, "missing_fraction": args.missing, "noise_fraction": args.noise}
    updates = {k: v for k, v in updates.items() if v is not None}
    spec = dataclasses.replace(spec, seed=args.seed, **updates)
    paths = write_synthetic(generate(spec), args.out, args.name)
    for p in paths:
        print(p)


def cmd_impute(args):
    series = ingest_csv(args.input)
    predictors = _csv_list(args.predictors)
    targets = _stations(series, _csv_list(args.target) if args.target else None, predictors)
    out = Path(args.out)
    series = flag_abnormal(series, args.abnormal_k, targets)
    if args.analyze:
        correlation_matrix(series, targets + predictors).write_csv(out / "correlation.csv")
        params = ForestParams(n_trees=args.trees, max_depth=args.depth, seed=derive_seed(args.seed, "analysis"))
        res = ni_analyze(series, targets[0], predictors,
                         params=params, sobol_n=args.sobol_n, seed=derive_seed(args.seed, "sobol"))
        atomic_write_json(out / "ni_analysis.json", res.to_dict())
    for t in targets:
        params = ForestParams(n_trees=args.trees, max_depth=args.depth, seed=derive_seed(args.seed, f"imputation:{t}"))
        model = None
        if args.save_forest and np.isin(series.flag_column(t), (Flag.MISSING, Flag.ABNORMAL)).any():
            model = fit_imputer(series, t, predictors, params)
            model.save(out / "forests" / f"{t}.json")
        series = ni_impute(series, t, predictors, params, model=model)
    print(write_csv(series, out / "imputed.csv"))
    print(write_flags_csv(series, out / "imputed_flags.csv"))


def cmd_denoise(args):
    series = ingest_csv(args.input)
    channels = _stations(series, _csv_list(args.channels) if args.channels else None, _csv_list(args.predictors))
    out = Path(args.out)
    n = len(series)
    ranges = split_ranges(n)
    segs = [ranges[k] for k in ("train", "validation", "test")] if args.scope == "split" else [(0, n)]
    settings = argparse.Namespace(
        family=args.wavelet, level=args.level, mode=args.mode, boundary=args.boundary, rule=args.rule
    )
    vals = series.values.copy()
    for ch in channels:
        x = series.column(ch)
        if np.any(series.flag_column(ch) == Flag.MISSING):
            raise SchemaError(f"channel {ch!r} has missing cells; impute first")
        vals[:, series.index(ch)] = denoise_segments(x, segs, settings)
        dec = decompose(x, args.wavelet, args.level, args.boundary)
        atomic_write_text(out / "decompositions" / f"{ch}.json", dec.to_json() + "\n")
    print(write_csv(series.replace(values=vals), out / "denoised.csv"))


def cmd_train(args):
    series = ingest_csv(args.input)
    channels = _stations(series, _csv_list(args.channel) if args.channel else None, _csv_list(args.predictors))
    out = Path(args.out)
    spec = build_preset(args.preset, args.seq_len, args.seed)
    cfg = _train_config(args)
    for ch in channels:
        ds = _prepare(series, ch, args)
        atomic_write_json(out / "datasets" / f"{ch}.json", ds.manifest())
        state = train(spec, ds, cfg)
        print(state.save(out / "checkpoints" / f"{ch}.json"))


def cmd_predict(args):
    state = NetworkState.load(args.checkpoint)
    series = ingest_csv(args.input)
    ch = state.channel
    x = state.stats.normalize(series.column(ch), ch)
    L = state.spec.window_length
    if len(x) < L:
        raise SchemaError(f"need at least {L} frames to predict, have {len(x)}")
    idx = np.arange(len(x) - L + 1)[:, None] + np.arange(L)[None, :]
    pred = predict_batch(state, x[idx])
    stamps = series.timestamps
    step = int(stamps[-1] - stamps[-2]) if len(stamps) > 1 else 0
    truth = np.append(series.column(ch)[L:], np.nan)
    targets = np.append(stamps[L:], stamps[-1] + step)
    records = [(ch, state.spec.name, "", t, a, b) for t, a, b in zip(targets, truth, pred)]
    path = atomic_write_text(Path(args.out) / f"predictions_{ch}.csv", predictions_csv(records))
    print(f"{ch} next={float(pred[-1])!r}")
    print(path)


def _write_report(report, args, stem="report"):
    path = report.write(Path(args.out) / f"{stem}.{_EXT[args.format]}", args.format)
    sys.stdout.write(report.render(args.format))
    return path


def cmd_evaluate(args):
    series = ingest_csv(args.input)
    raw = ingest_csv(args.raw) if args.truth == "raw" and args.raw else None
    if args.truth == "raw" and raw is None:
        raise ConfigError("--truth raw needs --raw pointing at the un-denoised CSV")
    report = EvalReport()
    records = []
    for ck in args.checkpoint:
        state = NetworkState.load(ck)
        ch = state.channel
        ds = make_windows(zscore_apply(series, state.stats), state.spec.window_length, ch)
        ds.stats = state.stats
        truth = None if raw is None else raw.column(ch)
        if raw is not None and len(raw) != len(series):
            raise SchemaError("raw and evaluated inputs differ in length")
        report.append(evaluate_state(state, ds, ch, args.model or state.spec.name, args.split, truth))
        t, p = split_truth_pred(state, ds, args.split, truth)
        stamps = series.timestamps[ds.target_positions(args.split)]
        records += [(ch, args.model or state.spec.name, args.split, s, a, b) for s, a, b in zip(stamps, t, p)]
    atomic_write_text(Path(args.out) / "predictions.csv", predictions_csv(records))
    _write_report(report, args)


def cmd_sweep(args):
    series = ingest_csv(args.input)
    grid = TABLE5_GRID
    if args.grid:
        with open(args.grid, encoding="utf-8") as fh:
            grid = json.load(fh)
    ds = _prepare(series, args.channel, args)
    report = sweep(grid, ds, _train_config(args), args.channel)
    _write_report(report, args, "sweep")


def _raw_keys(path):
    with open(path, encoding="utf-8") as fh:
        return set(json.load(fh))


def cmd_run(args):
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    seed = args.seed
    if seed is None and (not args.config or "seed" not in _raw_keys(args.config)):
        seed = env_seed()
    updates = {
        "input": args.input,
        "out": args.out,
        "seed": seed,
        "stations": _csv_list(args.stations) if args.stations else None,
        "predictors": _csv_list(args.predictors) if args.predictors else None,
        "network.preset": args.preset,
        "train.epochs": args.epochs,
        "train.batch_size": args.batch,
        "train.learning_rate": args.lr,
        "train.weight_decay": args.wd,
        "seq_len": args.seq_len,
        "wavelet.enabled": args.wavelet_enabled,
        "wavelet.family": args.wavelet,
        "wavelet.level": args.level,
        "wavelet.scope": args.denoise_scope,
        "forest.n_trees": args.trees,
        "truth": args.truth,
        "fit_on": args.fit_on,
    }
    cfg = cfg.override(updates)
    result = run_pipeline(cfg)
    sys.stdout.write(result.report.render(args.format))
    print(Path(cfg.out) / "manifest.json")


def cmd_plot_data(args):
    out = Path(args.out) / (args.name or f"{args.kind}.csv")
    print(emit_plot_data(args.artifact, args.kind, out))


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    def seeded(p):
        p.add_argument("--seed", type=int, default=None, help="global seed (default $SEEPLINE_SEED or 0)")

    parser = argparse.ArgumentParser(prog="seepline", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"seepline {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic monitoring CSV")
    seeded(p)
    p.add_argument("--spec", help="JSON generator settings")
    p.add_argument("--n", type=int)
    p.add_argument("--missing", type=float, help="fraction of station cells to blank")
    p.add_argument("--noise", type=float, help="noise sigma as a fraction of the clean half-range")
    p.add_argument("--name", default="synth")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("impute", parents=[common], help="fill gaps from driver channels")
    seeded(p)
    p.add_argument("--input", required=True)
    p.add_argument("--target", help="comma-separated channels (default: all non-predictors)")
    p.add_argument("--predictors", default="rainfall,water_level")
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--depth", type=int, default=12)
    p.add_argument("--abnormal-k", type=float, default=6.0)
    p.add_argument("--analyze", action="store_true", help="also write correlation and Sobol evidence")
    p.add_argument("--sobol-n", type=int, default=1024)
    p.add_argument("--save-forest", action="store_true", help="write each fitted forest as JSON")
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("denoise", parents=[common], help="wavelet-threshold channels")
    p.add_argument("--input", required=True)
    p.add_argument("--channels")
    p.add_argument("--predictors", default="rainfall,water_level")
    p.add_argument("--wavelet", default="db4")
    p.add_argument("--level", type=int, default=4)
    p.add_argument("--mode", choices=("soft", "hard"), default="soft")
    p.add_argument("--boundary", choices=("symmetric", "periodic"), default="symmetric")
    p.add_argument("--rule", choices=("mirror", "sure"), default="mirror")
    p.add_argument("--scope", choices=("split", "full"), default="split")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("train", parents=[common], help="train one network per channel")
    seeded(p)
    p.add_argument("--input", required=True)
    p.add_argument("--channel")
    p.add_argument("--predictors", default="rainfall,water_level")
    _train_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="one-step forecasts from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common], help="score checkpoints on a split")
    p.add_argument("--checkpoint", required=True, action="append")
    p.add_argument("--input", required=True, help="CSV the model was trained on")
    p.add_argument("--raw", help="un-denoised CSV used as truth with --truth raw")
    p.add_argument("--truth", choices=("raw", "denoised"), default="denoised")
    p.add_argument("--split", choices=("train", "validation", "test"), default="test")
    p.add_argument("--model")
    p.add_argument("--format", choices=FORMATS, default="csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", parents=[common], help="hyperparameter grid")
    seeded(p)
    p.add_argument("--input", required=True)
    p.add_argument("--channel", required=True)
    p.add_argument("--grid", help="JSON list of {batch, conv, pool, lstm}")
    p.add_argument("--format", choices=FORMATS, default="csv")
    _train_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("run", help="full pipeline from a JSON config")
    seeded(p)
    p.add_argument("--config")
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--stations")
    p.add_argument("--predictors")
    p.add_argument("--preset")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--wd", type=float)
    p.add_argument("--seq-len", type=int)
    p.add_argument("--trees", type=int)
    p.add_argument("--wavelet", help="filter family")
    p.add_argument("--level", type=int)
    p.add_argument("--no-wavelet", dest="wavelet_enabled", action="store_false", default=None)
    p.add_argument("--with-wavelet", dest="wavelet_enabled", action="store_true")
    p.add_argument("--denoise-scope", choices=("split", "full"))
    p.add_argument("--truth", choices=("raw", "denoised"))
    p.add_argument("--fit-on", choices=("train", "all"))
    p.add_argument("--format", choices=FORMATS, default="csv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plot-data", parents=[common], help="CSV tables for figures")
    p.add_argument("--artifact", required=True)
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--name", help="output file name (default <kind>.csv)")
    p.set_defaults(func=cmd_plot_data)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if hasattr(args, "seed") and args.seed is None and args.func is not cmd_run:
            args.seed = env_seed()
        args.func(args)
    except SeeplineError as exc:
        print(f"seepline: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
