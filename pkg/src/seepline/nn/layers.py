"""Layers with explicit forward/backward passes.

Tensors are float64 arrays with a leading batch axis. Shapes quoted in
docstrings leave the batch axis out: sequences are (T, C), vectors (D,).
"""

import math

import numpy as np

from ..errors import ConfigError, ShapeError

ACTIVATIONS = ("linear", "relu", "tanh", "sigmoid")


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _activate(name, z):
    if name == "linear":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return sigmoid(z)
    raise ConfigError(f"unknown activation {name!r}")


def _activate_grad(name, z, a, dy):
    if name == "linear":
        return dy
    if name == "relu":
        return dy * (z > 0)
    if name == "tanh":
        return dy * (1.0 - a * a)
    if name == "sigmoid":
        return dy * a * (1.0 - a)
    raise ConfigError(f"unknown activation {name!r}")


def glorot(rng, shape, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    kind = "layer"

    def __init__(self):
        self.params = {}
        self.grads = {}
        self.input_shape = None
        self.output_shape = None

    def build(self, input_shape, rng):
        self.input_shape = tuple(input_shape)
        self.output_shape = self.infer_shape(self.input_shape)
        self.init_params(rng)
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        return self.output_shape

    def infer_shape(self, input_shape):
        raise NotImplementedError

    def init_params(self, rng):
        pass

    def config(self):
        return {"type": self.kind}

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0.0)

    def _expect_rank(self, shape, rank):
        if len(shape) != rank:
            raise ShapeError(f"{self.kind} expects a rank-{rank} input, got shape {shape}")


class Conv1D(Layer):
    """Same-padded 1-D cross-correlation: (T, C_in) -> (T, filters)."""

    kind = "conv1d"

    def __init__(self, filters, kernel=3, activation="linear"):
        super().__init__()
        if kernel < 1 or kernel % 2 == 0:
            raise ConfigError(f"kernel size must be odd, got {kernel}")
        if activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {activation!r}")
        self.filters = int(filters)
        self.kernel = int(kernel)
        self.activation = activation

    def infer_shape(self, s):
        self._expect_rank(s, 2)
        return (s[0], self.filters)

    def init_params(self, rng):
        c_in = self.input_shape[1]
        k = self.kernel
        self.params = {
            "kernel": glorot(rng, (k, c_in, self.filters), k * c_in, k * self.filters),
            "bias": np.zeros(self.filters),
        }

    def config(self):
        return {"type": self.kind, "filters": self.filters, "kernel": self.kernel, "activation": self.activation}

    def _columns(self, x):
        pad = self.kernel // 2
        xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
        T = x.shape[1]
        # cols[b, t, k, c] = xp[b, t + k, c]
        return np.stack([xp[:, k: k + T, :] for k in range(self.kernel)], axis=2)

    def forward(self, x):
        cols = self._columns(x)
        B, T, K, C = cols.shape
        W = self.params["kernel"].reshape(K * C, self.filters)
        z = cols.reshape(B * T, K * C) @ W + self.params["bias"]
        z = z.reshape(B, T, self.filters)
        a = _activate(self.activation, z)
        self._cache = (cols, z, a)
        return a

    def backward(self, dy):
        cols, z, a = self._cache
        B, T, K, C = cols.shape
        dz = _activate_grad(self.activation, z, a, dy).reshape(B * T, self.filters)
        self.grads["kernel"] += (cols.reshape(B * T, K * C).T @ dz).reshape(K, C, self.filters)
        self.grads["bias"] += dz.sum(axis=0)
        dcols = (dz @ self.params["kernel"].reshape(K * C, self.filters).T).reshape(B, T, K, C)
        pad = self.kernel // 2
        dxp = np.zeros((B, T + 2 * pad, C))
        for k in range(K):
            dxp[:, k: k + T, :] += dcols[:, :, k, :]
        return dxp[:, pad: pad + T, :]


class MaxPool1D(Layer):
    """Non-overlapping max over time: (T, C) -> (ceil(T / size), C).

    The trailing partial window is pooled as-is; ties resolve to the
    earliest position, which also receives the gradient.
    """

    kind = "maxpool"

    def __init__(self, size=2):
        super().__init__()
        if size < 1:
            raise ConfigError(f"pool size must be >= 1, got {size}")
        self.size = int(size)

    def infer_shape(self, s):
        self._expect_rank(s, 2)
        return (-(-s[0] // self.size), s[1])

    def config(self):
        return {"type": self.kind, "size": self.size}

    def forward(self, x):
        B, T, C = x.shape
        s = self.size
        n = -(-T // s)
        xp = np.full((B, n * s, C), -np.inf)
        xp[:, :T, :] = x
        win = xp.reshape(B, n, s, C)
        arg = np.argmax(win, axis=2)
        self._cache = (x.shape, arg)
        return np.take_along_axis(win, arg[:, :, None, :], axis=2)[:, :, 0, :]

    def backward(self, dy):
        (B, T, C), arg = self._cache
        s = self.size
        n = arg.shape[1]
        dwin = np.zeros((B, n, s, C))
        np.put_along_axis(dwin, arg[:, :, None, :], dy[:, :, None, :], axis=2)
        return dwin.reshape(B, n * s, C)[:, :T, :]


class Flatten(Layer):
    kind = "flatten"

    def infer_shape(self, s):
        return (int(np.prod(s)),)

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)


class Dense(Layer):
    kind = "dense"

    def __init__(self, units, activation="linear"):
        super().__init__()
        if activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {activation!r}")
        self.units = int(units)
        self.activation = activation

    def infer_shape(self, s):
        self._expect_rank(s, 1)
        return (self.units,)

    def init_params(self, rng):
        d = self.input_shape[0]
        self.params = {
            "kernel": glorot(rng, (d, self.units), d, self.units),
            "bias": np.zeros(self.units),
        }

    def config(self):
        return {"type": self.kind, "units": self.units, "activation": self.activation}

    def forward(self, x):
        z = x @ self.params["kernel"] + self.params["bias"]
        a = _activate(self.activation, z)
        self._cache = (x, z, a)
        return a

    def backward(self, dy):
        x, z, a = self._cache
        dz = _activate_grad(self.activation, z, a, dy)
        self.grads["kernel"] += x.T @ dz
        self.grads["bias"] += dz.sum(axis=0)
        return dz @ self.params["kernel"].T


class _Recurrent(Layer):
    """Shared plumbing: gates stacked along the hidden axis for one matmul per step."""

    gates = ()

    def __init__(self, units):
        super().__init__()
        self.units = int(units)

    def infer_shape(self, s):
        self._expect_rank(s, 2)
        return (s[0], self.units)

    def config(self):
        return {"type": self.kind, "units": self.units}

    def init_params(self, rng):
        H, D = self.units, self.input_shape[1]
        self.params = {}
        for g in self.gates:
            self.params[f"V_{g}"] = glorot(rng, (H, D), D, H)
        for g in self.gates:
            self.params[f"W_{g}"] = glorot(rng, (H, H), H, H)
        for g in self.gates:
            self.params[f"b_{g}"] = np.zeros(H)

    def _stacked(self):
        V = np.concatenate([self.params[f"V_{g}"] for g in self.gates], axis=0)
        W = np.concatenate([self.params[f"W_{g}"] for g in self.gates], axis=0)
        b = np.concatenate([self.params[f"b_{g}"] for g in self.gates])
        return V, W, b

    def _scatter(self, dV, dW, db):
        H = self.units
        for k, g in enumerate(self.gates):
            sl = slice(k * H, (k + 1) * H)
            self.grads[f"V_{g}"] += dV[sl]
            self.grads[f"W_{g}"] += dW[sl]
            self.grads[f"b_{g}"] += db[sl]


class LSTM(_Recurrent):
    """Long short-term memory returning the full hidden sequence (T, H).

    i = s(V_i x + W_i h + b_i), f = s(V_f x + W_f h + b_f),
    c~ = tanh(V_c x + W_c h + b_c), c = f*c_prev + i*c~,
    o = s(V_o x + W_o h + b_o), h = o*tanh(c); h_0 = c_0 = 0.
    """

    kind = "lstm"
    gates = ("i", "f", "c", "o")

    def init_params(self, rng):
        super().init_params(rng)
        self.params["b_f"][:] = 1.0

    def forward(self, x):
        B, T, _ = x.shape
        H = self.units
        V, W, b = self._stacked()
        xv = x @ V.T + b
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        hs = np.empty((B, T, H))
        cache = []
        for t in range(T):
            a = xv[:, t] + h @ W.T
            i = sigmoid(a[:, :H])
            f = sigmoid(a[:, H: 2 * H])
            g = np.tanh(a[:, 2 * H: 3 * H])
            o = sigmoid(a[:, 3 * H:])
            c_prev, h_prev = c, h
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            hs[:, t] = h
            cache.append((i, f, g, o, c_prev, h_prev, tc))
        self._cache = (x, V, W, cache)
        return hs

    def backward(self, dhs):
        x, V, W, cache = self._cache
        B, T, D = x.shape
        H = self.units
        dV = np.zeros_like(V)
        dW = np.zeros_like(W)
        db = np.zeros(4 * H)
        dx = np.empty_like(x)
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            i, f, g, o, c_prev, h_prev, tc = cache[t]
            dh = dhs[:, t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            da = np.concatenate(
                [
                    dc * g * i * (1.0 - i),
                    dc * c_prev * f * (1.0 - f),
                    dc * i * (1.0 - g * g),
                    dh * tc * o * (1.0 - o),
                ],
                axis=1,
            )
            dc_next = dc * f
            dV += da.T @ x[:, t]
            dW += da.T @ h_prev
            db += da.sum(axis=0)
            dh_next = da @ W
            dx[:, t] = da @ V
        self._scatter(dV, dW, db)
        return dx

    def gate_trace(self):
        """Per-step (i, f, c~, o) activations from the last forward pass."""
        return [(i, f, g, o) for i, f, g, o, *_ in self._cache[3]]


class GRU(_Recurrent):
    """Gated recurrent unit, reset gate applied before the recurrent matmul.

    z = s(V_z x + W_z h + b_z), r = s(V_r x + W_r h + b_r),
    n = tanh(V_h x + W_h (r*h) + b_h), h' = z*h + (1-z)*n.
    """

    kind = "gru"
    gates = ("z", "r", "h")

    def forward(self, x):
        B, T, _ = x.shape
        H = self.units
        V, W, b = self._stacked()
        xv = x @ V.T + b
        Wzr = W[: 2 * H]
        Wh = W[2 * H:]
        h = np.zeros((B, H))
        hs = np.empty((B, T, H))
        cache = []
        for t in range(T):
            azr = xv[:, t, : 2 * H] + h @ Wzr.T
            z = sigmoid(azr[:, :H])
            r = sigmoid(azr[:, H:])
            rh = r * h
            n = np.tanh(xv[:, t, 2 * H:] + rh @ Wh.T)
            h_prev = h
            h = z * h_prev + (1.0 - z) * n
            hs[:, t] = h
            cache.append((z, r, n, h_prev, rh))
        self._cache = (x, V, W, cache)
        return hs

    def backward(self, dhs):
        x, V, W, cache = self._cache
        B, T, D = x.shape
        H = self.units
        Wz, Wr, Wh = W[:H], W[H: 2 * H], W[2 * H:]
        dV = np.zeros_like(V)
        dW = np.zeros_like(W)
        db = np.zeros(3 * H)
        dx = np.empty_like(x)
        dh_next = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            z, r, n, h_prev, rh = cache[t]
            dh = dhs[:, t] + dh_next
            dan = dh * (1.0 - z) * (1.0 - n * n)
            drh = dan @ Wh
            daz = dh * (h_prev - n) * z * (1.0 - z)
            dar = drh * h_prev * r * (1.0 - r)
            da = np.concatenate([daz, dar, dan], axis=1)
            dV += da.T @ x[:, t]
            dW[:H] += daz.T @ h_prev
            dW[H: 2 * H] += dar.T @ h_prev
            dW[2 * H:] += dan.T @ rh
            db += da.sum(axis=0)
            dh_next = dh * z + drh * r + daz @ Wz + dar @ Wr
            dx[:, t] = da @ V
        self._scatter(dV, dW, db)
        return dx


class SimpleRNN(_Recurrent):
    """Elman recurrence h = tanh(V x + W h + b)."""

    kind = "rnn"
    gates = ("h",)

    def forward(self, x):
        B, T, _ = x.shape
        V, W, b = self._stacked()
        xv = x @ V.T + b
        h = np.zeros((B, self.units))
        hs = np.empty((B, T, self.units))
        for t in range(T):
            h = np.tanh(xv[:, t] + h @ W.T)
            hs[:, t] = h
        self._cache = (x, V, W, hs)
        return hs

    def backward(self, dhs):
        x, V, W, hs = self._cache
        B, T, D = x.shape
        dV = np.zeros_like(V)
        dW = np.zeros_like(W)
        db = np.zeros(self.units)
        dx = np.empty_like(x)
        dh_next = np.zeros((B, self.units))
        for t in range(T - 1, -1, -1):
            h_prev = hs[:, t - 1] if t > 0 else np.zeros((B, self.units))
            da = (dhs[:, t] + dh_next) * (1.0 - hs[:, t] ** 2)
            dV += da.T @ x[:, t]
            dW += da.T @ h_prev
            db += da.sum(axis=0)
            dh_next = da @ W
            dx[:, t] = da @ V
        self._scatter(dV, dW, db)
        return dx


LAYER_TYPES = {
    "conv1d": Conv1D,
    "maxpool": MaxPool1D,
    "flatten": Flatten,
    "dense": Dense,
    "lstm": LSTM,
    "gru": GRU,
    "rnn": SimpleRNN,
}


def layer_from_config(cfg):
    cfg = dict(cfg)
    kind = cfg.pop("type", None)
    if kind not in LAYER_TYPES:
        raise ConfigError(f"unknown layer type {kind!r}; choose from {sorted(LAYER_TYPES)}")
    try:
        return LAYER_TYPES[kind](**cfg)
    except TypeError as exc:
        raise ConfigError(f"bad arguments for {kind}: {exc}") from None
