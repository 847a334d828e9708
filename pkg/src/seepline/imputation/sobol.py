"""First- and total-order Sobol indices by Saltelli pick-freeze sampling."""

import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.stats import qmc

from ..errors import ConfigError, DegenerateVarianceError

ISHIGAMI_A = 7.0
ISHIGAMI_B = 0.1


@dataclass(frozen=True)
class SobolResult:
    first_order: np.ndarray
    total_order: np.ndarray
    n: int
    seed: int
    names: Optional[List[str]] = field(default=None)

    def to_dict(self):
        return {
            "first_order": self.first_order.tolist(),
            "total_order": self.total_order.tolist(),
            "n": self.n,
            "seed": self.seed,
            "names": self.names,
        }


def _evaluate(model, X):
    f = model.predict if hasattr(model, "predict") else model
    return np.asarray(f(X), dtype=np.float64).ravel()


def saltelli_matrices(bounds, n, seed):
    """Base matrices A, B (n x d each) from one scrambled Sobol' draw of dimension 2d."""
    bounds = np.asarray(bounds, dtype=np.float64)
    d = len(bounds)
    sampler = qmc.Sobol(d=2 * d, scramble=True, seed=np.random.default_rng(seed))
    with warnings.catch_warnings():
        # non-power-of-two n loses balance but stays valid
        warnings.simplefilter("ignore", UserWarning)
        base = sampler.random(n)
    lo, hi = bounds[:, 0], bounds[:, 1]
    A = lo + base[:, :d] * (hi - lo)
    B = lo + base[:, d:] * (hi - lo)
    return A, B


def sobol_indices(model, bounds, n=1024, seed=0, names=None):
    """Estimate S1 (Saltelli 2010) and ST (Jansen) for each input.

    ``model`` is anything with ``predict(X)`` or a vectorised callable; inputs
    are uniform over ``bounds``. Costs n * (d + 2) model evaluations.
    """
    bounds = np.asarray(bounds, dtype=np.float64)
    if bounds.ndim != 2 or bounds.shape[1] != 2:
        raise ConfigError("bounds must be a (d, 2) array of [lo, hi]")
    if not np.all(np.isfinite(bounds)) or np.any(bounds[:, 0] >= bounds[:, 1]):
        raise ConfigError("bounds must be finite with lo < hi")
    if n < 64:
        raise ConfigError(f"need n >= 64 base samples, got {n}")
    A, B = saltelli_matrices(bounds, n, seed)
    fA = _evaluate(model, A)
    fB = _evaluate(model, B)
    var = np.var(np.concatenate([fA, fB]))
    if not var > 0:
        raise DegenerateVarianceError("model output has zero variance over the sampled bounds")
    d = len(bounds)
    s1 = np.empty(d)
    st = np.empty(d)
    for i in range(d):
        ABi = A.copy()
        ABi[:, i] = B[:, i]
        fABi = _evaluate(model, ABi)
        s1[i] = np.mean(fB * (fABi - fA)) / var
        st[i] = 0.5 * np.mean((fA - fABi) ** 2) / var
    return SobolResult(s1, st, int(n), int(seed), None if names is None else list(names))


def ishigami(X, a=ISHIGAMI_A, b=ISHIGAMI_B):
    X = np.atleast_2d(X)
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    return np.sin(x1) + a * np.sin(x2) ** 2 + b * x3**4 * np.sin(x1)


def ishigami_first_order(a=ISHIGAMI_A, b=ISHIGAMI_B):
    """Closed-form first-order indices for inputs uniform on [-pi, pi]."""
    v1 = 0.5 * (1 + b * np.pi**4 / 5) ** 2
    v2 = a**2 / 8
    v13 = b**2 * np.pi**8 * (1 / 18 - 1 / 50)
    total = v1 + v2 + v13
    return np.array([v1 / total, v2 / total, 0.0])
