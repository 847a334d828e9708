import json

import numpy as np
import pytest

from seepline.errors import ConfigError, SchemaError, StageError
from seepline.nn import train
from seepline.pipeline import PipelineConfig, run_pipeline


def small_config(inp, out, **kw):
    base = {
        "input": str(inp),
        "out": str(out),
        "forest": {"n_trees": 5, "max_depth": 6},
        "analysis": {"sobol_n": 64},
        "train": {"epochs": 2},
        "seed": 3,
    }
    for k, v in kw.items():
        if isinstance(v, dict):
            base[k] = {**base.get(k, {}), **v}
        else:
            base[k] = v
    return PipelineConfig.from_dict(base)


@pytest.fixture(scope="module")
def plain_run(small_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("plain")
    return run_pipeline(small_config(small_csv, out, wavelet={"enabled": False}))


@pytest.fixture(scope="module")
def wavelet_run(small_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("wave")
    return run_pipeline(small_config(small_csv, out))


def test_artifacts_written(wavelet_run):
    out = wavelet_run.out
    for rel in (
        "correlation.csv", "ni_analysis.json", "imputed.csv", "imputed_flags.csv", "normalization.json",
        "denoised.csv", "decompositions/no8.json", "datasets/no13.json", "checkpoints/no8.json",
        "predictions.csv", "report.csv", "report.json", "report.md", "plot/scatter.csv",
        "plot/decomposition_no13.csv", "manifest.json",
    ):
        assert (out / rel).is_file(), rel
    m = json.loads((out / "manifest.json").read_text())
    assert m["model"] == "wavelet-cnn-lstm-2" and m["stations"] == ["no8", "no13"]
    assert set(m["stages"]) == {"ingest", "impute", "normalize", "denoise", "window", "train", "evaluate", "plot-data"}
    assert all(m["stages"].values())


def test_report_rows(wavelet_run):
    rep = wavelet_run.report
    assert [r.station for r in rep] == ["no8", "no13"]
    assert all(r.n > 0 and np.isfinite(r.rmse) for r in rep)


def test_wavelet_disabled_reproduces_plain_pipeline(plain_run, small_csv):
    out = plain_run.out
    assert plain_run.manifest["model"] == "cnn-lstm-2"
    assert plain_run.manifest["stages"]["denoise"] is None
    assert not (out / "denoised.csv").exists() and not (out / "decompositions").exists()
    cfg = small_config(small_csv, out, wavelet={"enabled": False})
    for st, ds in plain_run.datasets.items():
        direct = train(cfg.network_spec(), ds, cfg.train_config())
        assert direct.to_json() == (out / f"checkpoints/{st}.json").read_text()


def test_wavelet_toggle_leaves_other_stages(plain_run, wavelet_run):
    a, b = plain_run.manifest["stages"], wavelet_run.manifest["stages"]
    for k in ("ingest", "impute", "normalize"):
        assert a[k] == b[k]
    assert (plain_run.out / "imputed.csv").read_bytes() == (wavelet_run.out / "imputed.csv").read_bytes()


def test_windows_use_denoised_values(plain_run, wavelet_run):
    ds = wavelet_run.datasets["no8"]
    raw = plain_run.datasets["no8"]
    assert ds.source_digest == wavelet_run.manifest["artifacts"]["denoised.csv"]
    assert np.array_equal(ds.starts, raw.starts)
    assert not np.array_equal(ds.inputs, raw.inputs)
    # denoising smooths: fewer large one-step jumps inside windows
    assert np.abs(np.diff(ds.inputs, axis=1)).mean() < np.abs(np.diff(raw.inputs, axis=1)).mean()


def test_manifest_independent_of_paths(small_csv, tmp_path):
    inp2 = tmp_path / "copy.csv"
    inp2.write_bytes(small_csv.read_bytes())
    cfg = {"wavelet": {"enabled": False}, "analysis": {"enabled": False}, "stations": ["no8"]}
    a = run_pipeline(small_config(small_csv, tmp_path / "a", **cfg))
    b = run_pipeline(small_config(inp2, tmp_path / "b", **cfg))
    assert (tmp_path / "a/manifest.json").read_bytes() == (tmp_path / "b/manifest.json").read_bytes()
    assert a.manifest["input_digest"] == b.manifest["input_digest"]


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"sed": 1})
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"wavelet": {"famliy": "db4"}})
    with pytest.raises(ConfigError):
        PipelineConfig().override({"train.epoch": 3})


def test_config_round_trip():
    cfg = PipelineConfig.from_dict({"seed": 4, "wavelet": {"level": 3}, "stations": ["no8"]})
    assert PipelineConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    assert cfg.override({"seed": None, "wavelet.level": 2}).wavelet.level == 2


def test_bad_config_values():
    with pytest.raises(ConfigError):
        PipelineConfig(truth="clean")
    with pytest.raises(ConfigError):
        PipelineConfig(fit_on="test")
    with pytest.raises(ConfigError):
        run_pipeline(PipelineConfig())


def test_stage_error_names_stage(small_csv, tmp_path):
    cfg = small_config(small_csv, tmp_path, stations=["no99"])
    with pytest.raises(StageError) as info:
        run_pipeline(cfg)
    assert info.value.stage == "ingest" and isinstance(info.value.cause, SchemaError)
    assert info.value.exit_code == 3


def test_failed_stage_keeps_partial_artifacts(small_csv, tmp_path):
    cfg = small_config(small_csv, tmp_path, analysis={"enabled": False}, network={"layers": [{"type": "dense", "units": 1}]})
    with pytest.raises(StageError) as info:
        run_pipeline(cfg)
    assert info.value.stage == "train"
    assert (tmp_path / "imputed.csv").is_file() and (tmp_path / "denoised.csv").is_file()
    assert not (tmp_path / "manifest.json").exists()
