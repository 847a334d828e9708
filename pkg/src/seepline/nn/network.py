"""Network specifications, presets and the sequential container."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NumericFault, ShapeError
from ..utils import substream
from .layers import layer_from_config


@dataclass(frozen=True)
class NetworkSpec:
    """Layer list plus window length and init seed.

    Shapes are propagated on construction so that a non-composing stack
    fails here rather than mid-training.
    """

    layers: tuple
    window_length: int = 10
    seed: int = 0
    n_channels: int = 1
    name: str = "custom"
    output_shapes: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        layers = tuple(dict(cfg) for cfg in self.layers)
        object.__setattr__(self, "layers", layers)
        if self.window_length < 1:
            raise ConfigError(f"window length must be positive, got {self.window_length}")
        shape = (self.window_length, self.n_channels)
        shapes = []
        for i, cfg in enumerate(layers):
            layer = layer_from_config(cfg)
            try:
                shape = layer.infer_shape(shape)
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({cfg.get('type')}): {exc}") from None
            if any(d < 1 for d in shape):
                raise ShapeError(f"layer {i} ({cfg.get('type')}) produces empty shape {shape}")
            shapes.append(shape)
        if not shapes or shapes[-1] != (1,):
            raise ShapeError(f"network must end in a single output, got {shapes[-1] if shapes else None}")
        object.__setattr__(self, "output_shapes", tuple(shapes))

    def to_dict(self):
        return {
            "name": self.name,
            "layers": [dict(cfg) for cfg in self.layers],
            "window_length": self.window_length,
            "n_channels": self.n_channels,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            tuple(d["layers"]),
            int(d["window_length"]),
            int(d.get("seed", 0)),
            int(d.get("n_channels", 1)),
            d.get("name", "custom"),
        )

    def with_seed(self, seed):
        return NetworkSpec(self.layers, self.window_length, seed, self.n_channels, self.name)


def _conv(filters, kernel=3):
    return {"type": "conv1d", "filters": filters, "kernel": kernel, "activation": "relu"}


def cnn_lstm_layers(conv_filters=(32,), pool=2, lstm_units=(25, 50), kernel=3):
    """conv* -> maxpool -> lstm* -> flatten -> dense(1)."""
    layers = [_conv(f, kernel) for f in conv_filters]
    layers.append({"type": "maxpool", "size": pool})
    layers += [{"type": "lstm", "units": u} for u in lstm_units]
    layers += [{"type": "flatten"}, {"type": "dense", "units": 1, "activation": "linear"}]
    return layers


PRESETS = {
    "cnn-lstm-1": lambda: cnn_lstm_layers((16, 32), 2, (50,)),
    "cnn-lstm-2": lambda: cnn_lstm_layers((32,), 2, (25, 50)),
    "mlp": lambda: [
        {"type": "flatten"},
        {"type": "dense", "units": 64, "activation": "relu"},
        {"type": "dense", "units": 32, "activation": "relu"},
        {"type": "dense", "units": 1, "activation": "linear"},
    ],
    "rnn": lambda: [{"type": "rnn", "units": 50}, {"type": "flatten"}, {"type": "dense", "units": 1}],
    "gru": lambda: [{"type": "gru", "units": 50}, {"type": "flatten"}, {"type": "dense", "units": 1}],
    "lstm": lambda: [{"type": "lstm", "units": 50}, {"type": "flatten"}, {"type": "dense", "units": 1}],
}


def build_preset(name, window_length=10, seed=0):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return NetworkSpec(tuple(PRESETS[name]()), window_length, seed, 1, name)


class Network:
    """Sequential stack built from a :class:`NetworkSpec`."""

    def __init__(self, spec):
        self.spec = spec
        rng = substream(spec.seed, "init")
        self.layers = [layer_from_config(cfg) for cfg in spec.layers]
        shape = (spec.window_length, spec.n_channels)
        for layer in self.layers:
            shape = layer.build(shape, rng)

    def named_params(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for k, v in layer.params.items():
                out[f"{i}.{layer.kind}.{k}"] = v
        return out

    def named_grads(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for k, v in layer.grads.items():
                out[f"{i}.{layer.kind}.{k}"] = v
        return out

    def n_params(self):
        return sum(v.size for v in self.named_params().values())

    def get_state(self):
        return {k: v.copy() for k, v in self.named_params().items()}

    def set_state(self, state):
        params = self.named_params()
        if set(state) != set(params):
            raise ShapeError("parameter names do not match the network")
        for k, v in state.items():
            v = np.asarray(v, dtype=np.float64)
            if v.shape != params[k].shape:
                raise ShapeError(f"{k}: shape {v.shape} != {params[k].shape}")
            params[k][...] = v

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            x = x[:, :, None]
        expected = (self.spec.window_length, self.spec.n_channels)
        if x.shape[1:] != expected:
            raise ShapeError(f"input shape {x.shape[1:]} does not match network input {expected}")
        for layer in self.layers:
            x = layer.forward(x)
        if not np.all(np.isfinite(x)):
            raise NumericFault("non-finite network output")
        return x[:, 0]

    def backward(self, dout):
        """Accumulate parameter gradients for d(loss)/d(output) and return d(loss)/d(input)."""
        g = np.asarray(dout, dtype=np.float64).reshape(-1, 1)
        for layer in reversed(self.layers):
            g = layer.backward(g)
        for k, v in self.named_grads().items():
            if not np.all(np.isfinite(v)):
                raise NumericFault(f"non-finite gradient in {k}")
        return g


def mse_loss(pred, target):
    """Mean squared error and its gradient with respect to ``pred``."""
    diff = pred - target
    n = diff.size
    return float(np.mean(diff * diff)), 2.0 * diff / n
