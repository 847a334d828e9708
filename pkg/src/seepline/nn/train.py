"""Mini-batch training, inference and JSON checkpoints."""

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..data import NormalizationStats
from ..errors import ConfigError, InsufficientDataError, NumericFault, SchemaError, ShapeError
from ..utils import atomic_write_text, sha256_json
from .network import Network, NetworkSpec, mse_loss
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "seepline.network"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 120
    batch_size: int = 64
    learning_rate: float = 1e-3
    weight_decay: float = 5e-3
    loss: str = "mse"
    seed: int = 0
    patience: Optional[int] = 15
    restore_best: bool = True

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch size must be >= 1")
        if not self.learning_rate >= 0 or not self.weight_decay >= 0:
            raise ConfigError("learning rate and weight decay must be non-negative")
        if self.loss != "mse":
            raise ConfigError(f"unsupported loss {self.loss!r}")


@dataclass
class NetworkState:
    """Trained parameters with everything needed to reproduce and apply them."""

    spec: NetworkSpec
    params: dict
    stats: Optional[NormalizationStats] = None
    channel: Optional[str] = None
    config: Optional[TrainConfig] = None
    history: dict = field(default_factory=lambda: {"train": [], "validation": []})
    best_epoch: Optional[int] = None
    runtime_seconds: float = 0.0

    def network(self):
        net = Network(self.spec)
        net.set_state(self.params)
        return net

    def to_dict(self):
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "spec": self.spec.to_dict(),
            "params": {
                k: {"shape": list(v.shape), "values": v.ravel().tolist()} for k, v in sorted(self.params.items())
            },
            "channel": self.channel,
            "normalization": None if self.stats is None else self.stats.to_dict(),
            "normalization_digest": None if self.stats is None else sha256_json(self.stats.to_dict()),
            "train_config": None if self.config is None else asdict(self.config),
            "seed": self.spec.seed,
            "history": self.history,
            "best_epoch": self.best_epoch,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != CHECKPOINT_FORMAT or d.get("version") != CHECKPOINT_VERSION:
            raise SchemaError(f"not a {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION} checkpoint")
        params = {
            k: np.asarray(v["values"], dtype=np.float64).reshape(v["shape"]) for k, v in d["params"].items()
        }
        stats = None if d.get("normalization") is None else NormalizationStats.from_dict(d["normalization"])
        cfg = None if d.get("train_config") is None else TrainConfig(**d["train_config"])
        return cls(
            NetworkSpec.from_dict(d["spec"]),
            params,
            stats,
            d.get("channel"),
            cfg,
            d.get("history", {"train": [], "validation": []}),
            d.get("best_epoch"),
        )

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"

    def save(self, path):
        return atomic_write_text(path, self.to_json())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _batches(n, size):
    return [(a, min(a + size, n)) for a in range(0, n, size)]


def evaluate_loss(net, X, y, batch_size=256):
    if len(y) == 0:
        return float("nan")
    total = 0.0
    for a, b in _batches(len(y), batch_size):
        loss, _ = mse_loss(net.forward(X[a:b]), y[a:b])
        total += loss * (b - a)
    return total / len(y)


def train(spec, dataset, cfg=TrainConfig(), progress=None):
    """Fit ``spec`` to the dataset's train split, early-stopping on validation loss.

    Batches follow chronological order and are never shuffled. The network
    is initialised from ``cfg.seed`` so identical inputs give identical
    parameters.
    """
    X, y = dataset.train
    if len(y) == 0:
        raise InsufficientDataError("training split is empty")
    if X.shape[1] != spec.window_length:
        raise ShapeError(f"dataset windows have length {X.shape[1]}, spec expects {spec.window_length}")
    Xv, yv = dataset.validation
    spec = spec.with_seed(cfg.seed)
    net = Network(spec)
    params = net.named_params()
    grads = net.named_grads()
    opt = AdamState()
    history = {"train": [], "validation": []}
    best = (np.inf, None, None)
    stale = 0
    started = time.perf_counter()
    for epoch in range(cfg.epochs):
        total = 0.0
        for bi, (a, b) in enumerate(_batches(len(y), cfg.batch_size)):
            try:
                net.zero_grad()
                pred = net.forward(X[a:b])
                loss, dpred = mse_loss(pred, y[a:b])
                net.backward(dpred)
            except NumericFault as exc:
                raise NumericFault(str(exc), epoch, bi) from None
            adam_step(params, grads, opt, cfg.learning_rate, cfg.weight_decay)
            total += loss * (b - a)
        history["train"].append(total / len(y))
        val = evaluate_loss(net, Xv, yv) if len(yv) else float("nan")
        history["validation"].append(val)
        if progress is not None:
            progress(epoch, history["train"][-1], val)
        score = val if len(yv) else history["train"][-1]
        if score < best[0]:
            best = (score, epoch, net.get_state())
            stale = 0
        else:
            stale += 1
            if cfg.patience is not None and len(yv) and stale >= cfg.patience:
                log.info("early stop at epoch %d (best %d)", epoch, best[1])
                break
    if cfg.restore_best and best[2] is not None:
        net.set_state(best[2])
    return NetworkState(
        spec=spec,
        params=net.get_state(),
        stats=dataset.stats,
        channel=dataset.channel,
        config=cfg,
        history=history,
        best_epoch=best[1],
        runtime_seconds=time.perf_counter() - started,
    )


def predict_batch(state, windows, denormalize=True, net=None):
    """One-step-ahead predictions for an (n, L) array of normalised windows."""
    net = state.network() if net is None else net
    windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    out = np.concatenate([net.forward(windows[a:b]) for a, b in _batches(len(windows), 512)]) if len(windows) else np.empty(0)
    if denormalize and state.stats is not None:
        out = state.stats.denormalize(out, state.channel)
    return out


def predict(state, window, denormalize=True):
    window = np.asarray(window, dtype=np.float64).ravel()
    if len(window) != state.spec.window_length:
        raise ShapeError(f"window length {len(window)} != {state.spec.window_length}")
    return float(predict_batch(state, window[None, :], denormalize)[0])
