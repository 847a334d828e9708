"""Central-difference gradient checking."""

import numpy as np

from .network import mse_loss


def relative_error(a, b):
    """||a - b|| / (||a|| + ||b||), zero when both vanish."""
    a = np.ravel(a)
    b = np.ravel(b)
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if denom == 0 else float(np.linalg.norm(a - b) / denom)


def _loss(net, X, y):
    return mse_loss(net.forward(X), y)[0]


def numeric_gradients(net, X, y, eps=1e-5):
    grads = {}
    for name, p in net.named_params().items():
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            up = _loss(net, X, y)
            flat[i] = old - eps
            down = _loss(net, X, y)
            flat[i] = old
            gflat[i] = (up - down) / (2 * eps)
        grads[name] = g
    gx = np.zeros_like(X)
    xf = gx.reshape(-1)
    Xw = X.copy()
    flatx = Xw.reshape(-1)
    for i in range(flatx.size):
        old = flatx[i]
        flatx[i] = old + eps
        up = _loss(net, Xw, y)
        flatx[i] = old - eps
        down = _loss(net, Xw, y)
        flatx[i] = old
        xf[i] = (up - down) / (2 * eps)
    grads["input"] = gx
    return grads


def analytic_gradients(net, X, y):
    net.zero_grad()
    loss, dpred = mse_loss(net.forward(X), y)
    dx = net.backward(dpred)
    out = {k: v.copy() for k, v in net.named_grads().items()}
    out["input"] = dx.reshape(X.shape)
    return out


def check_gradients(net, X, y, eps=1e-5):
    """Relative error per parameter tensor (and the input) between backprop and finite differences."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[:, :, None]
    ana = analytic_gradients(net, X, y)
    num = numeric_gradients(net, X, y, eps)
    return {k: relative_error(ana[k], num[k]) for k in ana}
