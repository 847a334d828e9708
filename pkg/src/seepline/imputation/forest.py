"""Random regression forest grown by variance reduction."""

import json
import math
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np

from ..errors import ConfigError, InsufficientDataError, SchemaError
from ..utils import atomic_write_text

FOREST_FORMAT = "seepline.forest"
FOREST_VERSION = 1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 12
    min_samples_leaf: int = 2
    max_features: Optional[int] = None  # None -> ceil(d / 3)
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 0 or self.min_samples_leaf < 1:
            raise ConfigError(f"invalid forest hyperparameters: {self}")

    def features_per_split(self, d):
        m = math.ceil(d / 3) if self.max_features is None else self.max_features
        return max(1, min(d, m))


class RegressionTree:
    """Flat-array binary tree; ``feature[i] == -1`` marks a leaf."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X):
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            n = node[idx]
            go_left = X[idx, self.feature[n]] <= self.threshold[n]
            node[idx] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return node

    def predict(self, X):
        return self.value[self.apply(np.asarray(X, dtype=np.float64))]

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["value"])


def _best_split(x, y, min_leaf):
    """Best threshold on one feature: (gain, threshold) or None."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    n = len(ys)
    cs = np.cumsum(ys)
    cs2 = np.cumsum(ys * ys)
    i = np.arange(min_leaf, n - min_leaf + 1)
    if len(i) == 0:
        return None
    valid = xs[i - 1] < xs[np.minimum(i, n - 1)]
    if not valid.any():
        return None
    i = i[valid]
    tot, tot2 = cs[-1], cs2[-1]
    sl, sl2 = cs[i - 1], cs2[i - 1]
    sr, sr2 = tot - sl, tot2 - sl2
    sse_parent = tot2 - tot * tot / n
    sse = (sl2 - sl * sl / i) + (sr2 - sr * sr / (n - i))
    gain = sse_parent - sse
    b = int(np.argmax(gain))
    lo, hi = xs[i[b] - 1], xs[i[b]]
    thr = 0.5 * (lo + hi)
    if not lo <= thr < hi:
        thr = lo
    return float(gain[b]), float(thr)


def grow_tree(X, y, params, rng, importances):
    """Grow one tree depth-first; adds per-feature SSE reduction to ``importances``."""
    n, d = X.shape
    m = params.features_per_split(d)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(val):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(val)
        return len(feature) - 1

    root = new_node(float(y.mean()))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yn = y[idx]
        if depth >= params.max_depth or len(idx) < 2 * params.min_samples_leaf or np.ptp(yn) == 0:
            continue
        feats = rng.choice(d, size=m, replace=False)
        best = None
        for f in feats:
            res = _best_split(X[idx, f], yn, params.min_samples_leaf)
            if res is not None and res[0] > 0 and (best is None or res[0] > best[0]):
                best = (res[0], int(f), res[1])
        if best is None:
            continue
        gain, f, thr = best
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        importances[f] += gain
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(float(y[li].mean()))
        right[node] = new_node(float(y[ri].mean()))
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return RegressionTree(feature, threshold, left, right, value)


@dataclass
class RandomForest:
    trees: List[RegressionTree]
    importances: np.ndarray
    params: ForestParams
    n_features: int
    feature_names: Optional[List[str]] = None

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise SchemaError(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.mean([t.predict(X) for t in self.trees], axis=0)
        return float(out[0]) if single else out

    __call__ = predict

    def to_dict(self):
        return {
            "format": FOREST_FORMAT,
            "version": FOREST_VERSION,
            "params": asdict(self.params),
            "n_features": self.n_features,
            "feature_names": self.feature_names,
            "importances": self.importances.tolist(),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FOREST_FORMAT or d.get("version") != FOREST_VERSION:
            raise SchemaError(f"not a {FOREST_FORMAT} v{FOREST_VERSION} checkpoint")
        return cls(
            [RegressionTree.from_dict(t) for t in d["trees"]],
            np.asarray(d["importances"], dtype=np.float64),
            ForestParams(**d["params"]),
            int(d["n_features"]),
            d.get("feature_names"),
        )

    def save(self, path):
        return atomic_write_text(path, json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def rf_fit(X, y, params=ForestParams(), feature_names=None):
    """Fit a bootstrap forest.

    Rows are put in a canonical order before any random draw, so the fitted
    forest does not depend on the order rows were supplied in. Each tree
    draws from its own child seed.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise SchemaError(f"X {X.shape} and y {y.shape} do not align")
    if len(y) == 0 or len(y) < 2 * params.min_samples_leaf:
        raise InsufficientDataError(f"need at least {2 * params.min_samples_leaf} rows, have {len(y)}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise SchemaError("features and target must be finite")
    order = np.lexsort((y,) + tuple(X[:, j] for j in range(X.shape[1] - 1, -1, -1)))
    X, y = X[order], y[order]
    n, d = X.shape
    seeds = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    trees = []
    per_tree = []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        rows = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
        imp = np.zeros(d)
        trees.append(grow_tree(X[rows], y[rows], params, rng, imp))
        per_tree.append(imp / imp.sum() if imp.sum() > 0 else imp)
    importances = np.mean(per_tree, axis=0)
    if importances.sum() > 0:
        importances = importances / importances.sum()
    return RandomForest(trees, importances, params, d, None if feature_names is None else list(feature_names))


def rf_predict(model, x):
    return model.predict(x)
