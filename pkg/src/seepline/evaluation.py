"""Model evaluation on dataset splits and the hyperparameter sweep."""

import dataclasses
import logging

import numpy as np

from .errors import SeeplineError
from .metrics import EvalReport, EvalRow, evaluate_arrays
from .nn import NetworkSpec, TrainConfig, cnn_lstm_layers, predict_batch, train

log = logging.getLogger(__name__)

# batch, conv filters, pool size, LSTM units; the last row is the CNN-LSTM-2 preset
TABLE5_GRID = [
    {"batch": 32, "conv": 16, "pool": 2, "lstm": [25, 50]},
    {"batch": 64, "conv": 32, "pool": 2, "lstm": [50, 75]},
    {"batch": 32, "conv": 16, "pool": 4, "lstm": [25, 50]},
    {"batch": 64, "conv": 32, "pool": 4, "lstm": [50, 75]},
    {"batch": 16, "conv": 16, "pool": 2, "lstm": [50, 50]},
    {"batch": 128, "conv": 16, "pool": 4, "lstm": [25, 50]},
    {"batch": 16, "conv": 32, "pool": 2, "lstm": [25, 75]},
    {"batch": 128, "conv": 32, "pool": 2, "lstm": [25, 50]},
    {"batch": 64, "conv": 32, "pool": 2, "lstm": [25, 50]},
]


def split_truth_pred(state, dataset, split="test", truth=None):
    """Denormalised (truth, prediction) for a split.

    ``truth`` optionally supplies a full-length series in original units
    (e.g. the raw, un-denoised record) indexed by frame position.
    """
    X, y = dataset.part(split)
    pred = predict_batch(state, X)
    if truth is None:
        t = y if dataset.stats is None else dataset.stats.denormalize(y, dataset.channel)
    else:
        t = np.asarray(truth, dtype=np.float64)[dataset.target_positions(split)]
    return t, pred


def evaluate_state(state, dataset, station=None, model=None, split="test", truth=None):
    t, p = split_truth_pred(state, dataset, split, truth)
    return evaluate_arrays(
        t, p, station or dataset.channel, model or state.spec.name, state.runtime_seconds
    )


def grid_spec(entry, window_length):
    return NetworkSpec(
        tuple(cnn_lstm_layers((int(entry["conv"]),), int(entry["pool"]), tuple(int(u) for u in entry["lstm"]))),
        window_length,
        name=entry.get("name", "cnn-lstm"),
    )


def sweep(grid, dataset, cfg=TrainConfig(), station=None, truth=None):
    """Train and score every grid entry with the shared seed; failures become error rows."""
    report = EvalReport()
    station = station or dataset.channel
    for i, entry in enumerate(grid):
        label = f"case{i + 1}"
        try:
            spec = grid_spec(dict(entry, name=label), dataset.window_length)
            run_cfg = dataclasses.replace(cfg, batch_size=int(entry.get("batch", cfg.batch_size)))
            state = train(spec, dataset, run_cfg)
            report.append(evaluate_state(state, dataset, station, label, truth=truth))
        except (SeeplineError, ValueError, KeyError, TypeError) as exc:
            log.warning("sweep entry %s failed: %s", label, exc)
            report.append(EvalRow(station, label, None, None, None, 0.0, 0, f"{type(exc).__name__}: {exc}"))
    return report
