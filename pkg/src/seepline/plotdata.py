"""Plain CSV tables behind the usual figures; no rendering happens here."""

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError, NotFoundError, SchemaError
from .imputation.correlation import CorrelationMatrix
from .utils import atomic_write_text, format_float
from .wavelet.transform import WaveletDecomposition

KINDS = ("correlation-heatmap", "decomposition", "forecast-overlay", "scatter")
PREDICTION_HEADER = ("station", "model", "split", "timestamp", "truth", "prediction")


def _cell(v):
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else format_float(v)


def _rows_to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def heatmap_csv(matrix):
    """Labeled square matrix: first column and header hold the channel names."""
    return matrix.to_csv()


def decomposition_csv(dec):
    """One column per band (oL_n, oH_n .. oH_1), shorter bands padded with blanks."""
    n = dec.level
    names = [f"oL_{n}"] + [f"oH_{j}" for j in range(n, 0, -1)]
    bands = dec.bands()
    height = max(len(b) for b in bands)
    rows = []
    for i in range(height):
        rows.append([_cell(float(b[i])) if i < len(b) else "" for b in bands])
    return _rows_to_csv(names, rows)


def predictions_csv(records):
    """``records``: iterable of (station, model, split, timestamp, truth, prediction)."""
    rows = [[s, m, sp, int(t), _cell(float(a)), _cell(float(b))] for s, m, sp, t, a, b in records]
    return _rows_to_csv(PREDICTION_HEADER, rows)


def read_predictions(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != PREDICTION_HEADER:
            raise SchemaError(f"{path}: expected header {','.join(PREDICTION_HEADER)}")
        out = []
        for row in reader:
            s, m, sp, t, a, b = row
            out.append((s, m, sp, int(t), float(a or 'nan'), float(b or 'nan')))
    return out


def forecast_overlay_csv(records):
    """timestamp, truth and one prediction column per station/model pair."""
    truth = {}
    preds = {}
    keys = []
    for s, m, _, t, a, b in records:
        key = f"{s}:{m}"
        if key not in preds:
            preds[key] = {}
            keys.append(key)
        preds[key][t] = b
        truth.setdefault(s, {})[t] = a
    stations = list(truth)
    stamps = sorted({t for d in preds.values() for t in d})
    header = ["timestamp"] + [f"{s}:truth" for s in stations] + keys
    rows = []
    for t in stamps:
        row = [t] + [_cell(truth[s].get(t)) for s in stations] + [_cell(preds[k].get(t)) for k in keys]
        rows.append(row)
    return _rows_to_csv(header, rows)


def scatter_csv(records, split="test"):
    rows = [[s, m, _cell(a), _cell(b)] for s, m, sp, _, a, b in records if split is None or sp == split]
    return _rows_to_csv(["station", "model", "truth", "prediction"], rows)


def emit_plot_data(artifact, kind, out_path):
    """Convert a stored artifact into the plot table of ``kind`` and write it to ``out_path``.

    correlation-heatmap reads a correlation CSV, decomposition a
    decomposition JSON, and the other kinds a predictions CSV.
    """
    if kind not in KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}; choose from {', '.join(KINDS)}")
    path = Path(artifact)
    if not path.is_file():
        raise NotFoundError(f"artifact not found: {path}")
    if kind == "correlation-heatmap":
        text = heatmap_csv(CorrelationMatrix.from_csv(path.read_text(encoding="utf-8")))
    elif kind == "decomposition":
        with open(path, encoding="utf-8") as fh:
            text = decomposition_csv(WaveletDecomposition.from_dict(json.load(fh)))
    elif kind == "forecast-overlay":
        text = forecast_overlay_csv(read_predictions(path))
    else:
        text = scatter_csv(read_predictions(path))
    return atomic_write_text(out_path, text)
