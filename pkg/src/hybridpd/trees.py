"""Regression trees, random forests and least-squares gradient boosting."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigurationError


@dataclass
class RegressionTree:
    """CART tree as flat arrays; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    max_depth: int
    min_samples_split: int

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    def arrays(self):
        return (self.feature, self.threshold, self.left, self.right, self.value)

    def predict(self, x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        return np.asarray(kernels.predict_tree(*self.arrays(), x))

    def depth(self):
        def walk(node):
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))
        return walk(0)


def fit_tree(x, y, max_depth, min_samples_split=2, feature_rng=None, max_features=None):
    """Grow a CART regression tree with variance-reduction split search.

    Splits only when the children's summed SSE strictly improves on the
    node SSE; ties prefer the lowest feature index, then lowest threshold.
    Leaves predict the mean of their training targets.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ConfigurationError("fit_tree requires a non-empty N x d matrix")
    if x.shape[0] != y.shape[0]:
        raise ConfigurationError("x and y disagree on N")
    if max_depth is not None and max_depth < 0:
        raise ConfigurationError("max_depth must be >= 0")

    feature = []
    threshold = []
    left = []
    right = []
    value = []

    def new_node():
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def grow(idx, depth):
        node = new_node()
        value[node] = float(y[idx].mean())
        if max_depth is not None and depth >= max_depth:
            return node
        if max_features is not None and max_features < x.shape[1]:
            cols = np.sort(feature_rng.choice(x.shape[1], size=max_features, replace=False))
            sub = np.ascontiguousarray(x[:, cols])
            f, thr, _ = kernels.best_split(sub, y, idx, min_samples_split)
            f = int(cols[f]) if f >= 0 else -1
        else:
            f, thr, _ = kernels.best_split(x, y, idx, min_samples_split)
        if f < 0:
            return node
        go_left = x[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = grow(idx[go_left], depth + 1)
        right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(x.shape[0], dtype=np.int64), 0)
    return RegressionTree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
        max_depth=-1 if max_depth is None else max_depth,
        min_samples_split=min_samples_split,
    )


@dataclass
class ForestModel:
    """Bagged trees; prediction is the mean over trees."""

    trees: list = field(default_factory=list)
    seed: int = 0

    def predict(self, x):
        if not self.trees:
            raise ConfigurationError("forest has no trees")
        x = np.ascontiguousarray(x, dtype=np.float64)
        w = [1.0 / len(self.trees)] * len(self.trees)
        out = kernels.predict_ensemble([t.arrays() for t in self.trees], x, w, 0.0)
        return np.asarray(out)


def fit_rf(x, y, n_trees, min_samples_split=5, seed=0, max_depth=None,
           bootstrap=True, max_features=None):
    """Random forest with per-tree seeds derived from the master seed."""
    if n_trees < 1:
        raise ConfigurationError("n_trees must be >= 1")
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.shape[0] == 0:
        raise ConfigurationError("empty training data")
    trees = []
    n = x.shape[0]
    for t in range(n_trees):
        rng = np.random.default_rng([int(seed), 0x72660000 + t])
        if bootstrap:
            rows = rng.integers(0, n, size=n)
            xb, yb = x[rows], y[rows]
        else:
            xb, yb = x, y
        trees.append(fit_tree(xb, yb, max_depth, min_samples_split,
                              feature_rng=rng, max_features=max_features))
    return ForestModel(trees=trees, seed=seed)


@dataclass
class BoostedModel:
    """init + sum of shrinkage-scaled stage trees."""

    trees: list = field(default_factory=list)
    shrinkage: float = 0.1
    init: float = 0.0

    def predict(self, x, n_stages=None):
        x = np.ascontiguousarray(x, dtype=np.float64)
        trees = self.trees if n_stages is None else self.trees[:n_stages]
        w = [self.shrinkage] * len(trees)
        out = kernels.predict_ensemble([t.arrays() for t in trees], x, w, self.init)
        return np.asarray(out)

    def staged_train_mse(self, x, y):
        """Training MSE after each stage (for the monotonicity property)."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        pred = np.full(x.shape[0], self.init)
        out = []
        for t in self.trees:
            pred = pred + self.shrinkage * t.predict(x)
            out.append(float(np.mean((pred - y) ** 2)))
        return out


def fit_gb(x, y, n_trees, max_depth=2, seed=0, shrinkage=0.1, min_samples_split=2):
    """Least-squares gradient boosting: each stage fits the current residuals."""
    if n_trees < 1:
        raise ConfigurationError("n_trees must be >= 1")
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.shape[0] == 0:
        raise ConfigurationError("empty training data")
    init = float(y.mean())
    residual = y - init
    trees = []
    for _ in range(n_trees):
        tree = fit_tree(x, residual, max_depth, min_samples_split)
        residual = residual - shrinkage * tree.predict(x)
        trees.append(tree)
    return BoostedModel(trees=trees, shrinkage=shrinkage, init=init)
