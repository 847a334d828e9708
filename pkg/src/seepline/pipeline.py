"""End-to-end run: impute, normalize, denoise, window, train, evaluate.

Every intermediate lands in the output directory, and ``manifest.json``
records a digest per stage. The manifest leaves out runtimes and the
output path, so two runs with the same config, input and seed produce
the same bytes.
"""

import contextlib
import copy
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data import (
    flag_abnormal,
    format_csv,
    ingest_csv,
    make_windows,
    split_ranges,
    write_flags_csv,
    zscore_apply,
    zscore_fit,
    zscore_invert,
)
from .errors import ConfigError, SchemaError, SeeplineError, StageError
from .evaluation import split_truth_pred
from .imputation import ForestParams, correlation_matrix, ni_analyze, ni_impute
from .metrics import EvalReport, evaluate_arrays
from .nn import NetworkSpec, TrainConfig, build_preset, train
from .plotdata import decomposition_csv, forecast_overlay_csv, heatmap_csv, predictions_csv, scatter_csv
from .wavelet import WaveletDecomposition, decompose, denoise
from .utils import atomic_write_json, atomic_write_text, derive_seed, sha256_bytes, sha256_file, sha256_json

log = logging.getLogger(__name__)

MANIFEST_FORMAT = "seepline.manifest"
MANIFEST_VERSION = 1
STAGES = ("ingest", "impute", "normalize", "denoise", "window", "train", "evaluate", "plot-data")


def _from_dict(cls, d, where):
    if d is None:
        return cls()
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in d:
            continue
        v = d[f.name]
        sub = _SECTIONS.get(f.name)
        kwargs[f.name] = _from_dict(sub, v, f"{where}.{f.name}") if sub and cls is PipelineConfig else v
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class ForestSection:
    n_trees: int = 100
    max_depth: int = 12
    min_samples_leaf: int = 2
    max_features: Optional[int] = None
    bootstrap: bool = True


@dataclass(frozen=True)
class AnalysisSection:
    enabled: bool = True
    station: Optional[str] = None
    threshold: float = 0.8
    sobol_n: int = 1024


@dataclass(frozen=True)
class WaveletSection:
    enabled: bool = True
    family: str = "db4"
    level: int = 4
    mode: str = "soft"
    boundary: str = "symmetric"
    scope: str = "split"
    rule: str = "mirror"

    def __post_init__(self):
        if self.scope not in ("split", "full"):
            raise ConfigError(f"wavelet scope must be 'split' or 'full', got {self.scope!r}")


@dataclass(frozen=True)
class NetworkSection:
    preset: str = "cnn-lstm-2"
    layers: Optional[list] = None


@dataclass(frozen=True)
class TrainSection:
    epochs: int = 120
    batch_size: int = 64
    learning_rate: float = 1e-3
    weight_decay: float = 5e-3
    patience: Optional[int] = 15


@dataclass(frozen=True)
class PipelineConfig:
    input: Optional[str] = None
    stations: Optional[list] = None
    predictors: list = field(default_factory=lambda: ["rainfall", "water_level"])
    abnormal_k: float = 6.0
    forest: ForestSection = ForestSection()
    analysis: AnalysisSection = AnalysisSection()
    wavelet: WaveletSection = WaveletSection()
    network: NetworkSection = NetworkSection()
    train: TrainSection = TrainSection()
    seq_len: int = 10
    truth: str = "raw"
    fit_on: str = "train"
    out: str = "out"
    seed: int = 0

    def __post_init__(self):
        if self.truth not in ("raw", "denoised"):
            raise ConfigError(f"truth must be 'raw' or 'denoised', got {self.truth!r}")
        if self.fit_on not in ("train", "all"):
            raise ConfigError(f"fit_on must be 'train' or 'all', got {self.fit_on!r}")
        if int(self.seq_len) < 1:
            raise ConfigError("seq_len must be positive")

    @classmethod
    def from_dict(cls, d):
        return _from_dict(cls, d, "config")

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None

    def to_dict(self):
        return dataclasses.asdict(self)

    def override(self, updates):
        """Apply ``{"wavelet.enabled": False, "seed": 3}``-style updates; ``None`` values are skipped."""
        d = copy.deepcopy(self.to_dict())
        for key, value in updates.items():
            if value is None:
                continue
            node = d
            parts = key.split(".")
            for p in parts[:-1]:
                if p not in node or not isinstance(node[p], dict):
                    raise ConfigError(f"unknown config key {key!r}")
                node = node[p]
            if parts[-1] not in node:
                raise ConfigError(f"unknown config key {key!r}")
            node[parts[-1]] = value
        return PipelineConfig.from_dict(d)

    def forest_params(self, name):
        return ForestParams(**dataclasses.asdict(self.forest), seed=derive_seed(self.seed, name))

    def train_config(self):
        return TrainConfig(**dataclasses.asdict(self.train), seed=self.seed)

    def network_spec(self):
        if self.network.layers is not None:
            return NetworkSpec(tuple(self.network.layers), int(self.seq_len), self.seed, 1, "custom")
        return build_preset(self.network.preset, int(self.seq_len), self.seed)

    def model_name(self):
        base = self.network.preset if self.network.layers is None else "custom"
        return f"wavelet-{base}" if self.wavelet.enabled else base


_SECTIONS = {
    "forest": ForestSection,
    "analysis": AnalysisSection,
    "wavelet": WaveletSection,
    "network": NetworkSection,
    "train": TrainSection,
}


@dataclass
class PipelineResult:
    out: Path
    manifest: dict
    report: EvalReport
    states: dict
    datasets: dict


@contextlib.contextmanager
def _stage(name):
    log.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except (SeeplineError, ValueError, OSError) as exc:
        raise StageError(name, exc) from exc


def denoise_segments(values, ranges, wavelet):
    """Denoise each (start, stop) segment on its own and stitch the results."""
    out = np.array(values, dtype=np.float64)
    for a, b in ranges:
        if b > a:
            out[a:b] = denoise(
                out[a:b], wavelet.family, wavelet.level, wavelet.mode, wavelet.boundary, wavelet.rule
            )
    return out


def _write(out, rel, text, digests):
    path = atomic_write_text(out / rel, text)
    digests[rel] = sha256_bytes(text.encode("utf-8"))
    return path


def run_pipeline(cfg):
    if cfg.input is None:
        raise ConfigError("no input file configured")
    out = Path(cfg.out)
    artifacts = {}
    stages = {}

    with _stage("ingest"):
        series = ingest_csv(cfg.input)
        input_digest = sha256_file(cfg.input)
        predictors = list(cfg.predictors)
        stations = list(cfg.stations) if cfg.stations else [c for c in series.channels if c not in predictors]
        missing = [c for c in stations + predictors if c not in series.channels]
        if missing:
            raise SchemaError(f"channels not in input: {missing}")
        if not stations:
            raise SchemaError("no station channels selected")
        stages["ingest"] = input_digest

    with _stage("impute"):
        flagged = flag_abnormal(series, cfg.abnormal_k, stations)
        matrix = correlation_matrix(flagged, stations + predictors)
        _write(out, "correlation.csv", matrix.to_csv(), artifacts)
        if cfg.analysis.enabled:
            target = cfg.analysis.station or stations[0]
            analysis = ni_analyze(
                flagged,
                target,
                predictors,
                cfg.analysis.threshold,
                cfg.forest_params("analysis"),
                cfg.analysis.sobol_n,
                derive_seed(cfg.seed, "sobol"),
            )
            _write(out, "ni_analysis.json", json.dumps(analysis.to_dict(), indent=2, sort_keys=True) + "\n", artifacts)
        imputed = flagged
        for st in stations:
            imputed = ni_impute(imputed, st, predictors, cfg.forest_params(f"imputation:{st}"))
        _write(out, "imputed.csv", format_csv(imputed), artifacts)
        write_flags_csv(imputed, out / "imputed_flags.csv")
        artifacts["imputed_flags.csv"] = sha256_file(out / "imputed_flags.csv")
        stages["impute"] = sha256_json([artifacts["imputed.csv"], artifacts["imputed_flags.csv"]])

    n = len(imputed)
    ranges = split_ranges(n)

    with _stage("normalize"):
        fit_range = ranges["train"] if cfg.fit_on == "train" else (0, n)
        stats = zscore_fit(imputed, fit_range, stations)
        normed = zscore_apply(imputed, stats)
        _write(out, "normalization.json", json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n", artifacts)
        stages["normalize"] = sha256_json(stats.to_dict())

    denoised = {}
    with _stage("denoise"):
        if cfg.wavelet.enabled:
            segs = [ranges[k] for k in ("train", "validation", "test")] if cfg.wavelet.scope == "split" else [(0, n)]
            vals = normed.values.copy()
            for st in stations:
                denoised[st] = denoise_segments(normed.column(st), segs, cfg.wavelet)
                vals[:, normed.index(st)] = denoised[st]
                a, b = segs[0]
                dec = decompose(normed.column(st)[a:b], cfg.wavelet.family, cfg.wavelet.level, cfg.wavelet.boundary)
                _write(out, f"decompositions/{st}.json", dec.to_json() + "\n", artifacts)
            den_series = zscore_invert(normed.replace(values=vals), stats)
            _write(out, "denoised.csv", format_csv(den_series), artifacts)
            stages["denoise"] = artifacts["denoised.csv"]
        else:
            stages["denoise"] = None

    datasets = {}
    with _stage("window"):
        source = artifacts.get("denoised.csv", artifacts["imputed.csv"])
        for st in stations:
            ds = make_windows(normed, int(cfg.seq_len), st, values=denoised.get(st))
            ds.stats = stats
            ds.source_digest = source
            datasets[st] = ds
            _write(out, f"datasets/{st}.json", json.dumps(ds.manifest(), indent=2, sort_keys=True) + "\n", artifacts)
        stages["window"] = sha256_json({st: artifacts[f"datasets/{st}.json"] for st in stations})

    states = {}
    with _stage("train"):
        spec = cfg.network_spec()
        tcfg = cfg.train_config()
        for st in stations:
            states[st] = train(spec, datasets[st], tcfg)
            rel = f"checkpoints/{st}.json"
            _write(out, rel, states[st].to_json(), artifacts)
        stages["train"] = sha256_json({st: artifacts[f"checkpoints/{st}.json"] for st in stations})

    report = EvalReport()
    records = []
    model = cfg.model_name()
    with _stage("evaluate"):
        for st in stations:
            raw = imputed.column(st) if cfg.truth == "raw" else None
            ds = datasets[st]
            for split in ("train", "validation", "test"):
                if ds.split[split][1] <= ds.split[split][0]:
                    continue
                t, p = split_truth_pred(states[st], ds, split, raw)
                stamps = imputed.timestamps[ds.target_positions(split)]
                records += [(st, model, split, ts, a, b) for ts, a, b in zip(stamps, t, p)]
                if split == "test":
                    report.append(evaluate_arrays(t, p, st, model, states[st].runtime_seconds))
        _write(out, "predictions.csv", predictions_csv(records), artifacts)
        for fmt in ("csv", "json"):
            report.write(out / f"report.{fmt}", fmt)
        report.write(out / "report.md", "markdown")
        stages["evaluate"] = sha256_json(report.metrics_only())

    with _stage("plot-data"):
        _write(out, "plot/correlation_heatmap.csv", heatmap_csv(matrix), artifacts)
        _write(out, "plot/forecast_overlay.csv", forecast_overlay_csv(records), artifacts)
        _write(out, "plot/scatter.csv", scatter_csv(records), artifacts)
        if cfg.wavelet.enabled:
            for st in stations:
                with open(out / f"decompositions/{st}.json", encoding="utf-8") as fh:
                    dec = WaveletDecomposition.from_dict(json.load(fh))
                _write(out, f"plot/decomposition_{st}.csv", decomposition_csv(dec), artifacts)
        stages["plot-data"] = sha256_json({k: v for k, v in artifacts.items() if k.startswith("plot/")})

    cfg_dict = cfg.to_dict()
    cfg_dict.pop("out")
    cfg_dict.pop("input")
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "config": cfg_dict,
        "config_digest": sha256_json(cfg_dict),
        "input_digest": input_digest,
        "seed": cfg.seed,
        "stations": stations,
        "model": model,
        "stages": {k: stages.get(k) for k in STAGES},
        "artifacts": dict(sorted(artifacts.items())),
    }
    atomic_write_json(out / "manifest.json", manifest)
    return PipelineResult(out, manifest, report, states, datasets)
