"""Comparison classifiers: logistic regression, a one-hidden-layer MLP and a random forest.

All three expose ``predict_proba(X)`` returning the probability of label 1.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DimensionError, TrainingError
from .seeds import make_rng


def sigmoid(z):
    return expit(np.asarray(z, dtype=float))


def log_loss(y, z):
    """Mean binary log-loss computed from margins ``z``."""
    y = np.asarray(y, dtype=float)
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def hard_labels(proba):
    return (np.asarray(proba) >= 0.5).astype(np.int64)


def _check_width(X, expected):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != expected:
        got = X.shape[1] if X.ndim == 2 else X.ndim
        raise DimensionError(f"model expects {expected} features, got {got}")
    return X


# -- logistic regression ----------------------------------------------------


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    l2: float
    loss_history: list = field(default_factory=list)

    @property
    def n_features(self):
        return self.weights.shape[0]

    def decision_function(self, X):
        return _check_width(X, self.n_features) @ self.weights + self.bias

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))


def logreg_loss_and_grad(weights, bias, X, y, l2):
    """L2-regularized mean log-loss and its gradient; the bias is not penalized."""
    z = X @ weights + bias
    loss = log_loss(y, z) + 0.5 * l2 * float(weights @ weights)
    r = (sigmoid(z) - y) / y.shape[0]
    return loss, X.T @ r + l2 * weights, float(r.sum())


def train_logreg(X, y, l2=0.01, lr=0.1, epochs=200) -> LinearModel:
    """Full-batch gradient descent from zero for exactly ``epochs`` steps."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.zeros(X.shape[1])
    b = 0.0
    history = []
    for epoch in range(int(epochs)):
        loss, gw, gb = logreg_loss_and_grad(w, b, X, y, l2)
        if not math.isfinite(loss):
            raise TrainingError(f"logistic regression loss became non-finite at epoch {epoch}")
        history.append(loss)
        w = w - lr * gw
        b = b - lr * gb
    return LinearModel(w, b, float(l2), history)


# -- multilayer perceptron ---------------------------------------------------


@dataclass
class MlpModel:
    """ReLU hidden layer, sigmoid output."""

    W1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    loss_history: list = field(default_factory=list)

    @property
    def n_features(self):
        return self.W1.shape[0]

    def decision_function(self, X):
        X = _check_width(X, self.n_features)
        return np.maximum(X @ self.W1 + self.b1, 0.0) @ self.w2 + self.b2

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))


HIDDEN_BIAS_INIT = 0.1


def init_mlp(n_features, hidden, rng) -> MlpModel:
    """Glorot-uniform weights; hidden biases start slightly positive so no ReLU unit begins dead."""
    lim1 = math.sqrt(6.0 / (n_features + hidden))
    lim2 = math.sqrt(6.0 / (hidden + 1))
    return MlpModel(
        W1=rng.uniform(-lim1, lim1, (n_features, hidden)),
        b1=np.full(hidden, HIDDEN_BIAS_INIT),
        w2=rng.uniform(-lim2, lim2, hidden),
        b2=0.0,
    )


def mlp_loss_and_grads(model: MlpModel, X, y, l2):
    """Mean log-loss plus ``l2/2`` times the squared weight norms, with backprop gradients."""
    pre = X @ model.W1 + model.b1
    hid = np.maximum(pre, 0.0)
    z = hid @ model.w2 + model.b2
    loss = log_loss(y, z) + 0.5 * l2 * (float((model.W1 ** 2).sum()) + float(model.w2 @ model.w2))
    dz = (sigmoid(z) - y) / y.shape[0]
    grads = {
        "w2": hid.T @ dz + l2 * model.w2,
        "b2": float(dz.sum()),
    }
    dpre = np.outer(dz, model.w2) * (pre > 0)
    grads["W1"] = X.T @ dpre + l2 * model.W1
    grads["b1"] = dpre.sum(axis=0)
    return loss, grads


def train_mlp(X, y, hidden=32, lr=0.01, epochs=200, l2=1e-4, seed=0, batch_size=32) -> MlpModel:
    """Mini-batch SGD; one fixed shuffle stream per seed."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if hidden < 1:
        raise ConfigError("hidden must be positive")
    model = init_mlp(X.shape[1], int(hidden), make_rng(seed, "mlp-init"))
    shuffle = make_rng(seed, "mlp-shuffle")
    n = X.shape[0]
    for epoch in range(int(epochs)):
        order = shuffle.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            loss, g = mlp_loss_and_grads(model, X[batch], y[batch], l2)
            if not math.isfinite(loss):
                raise TrainingError(f"MLP loss became non-finite at epoch {epoch}")
            total += loss * batch.size
            model.W1 -= lr * g["W1"]
            model.b1 -= lr * g["b1"]
            model.w2 -= lr * g["w2"]
            model.b2 -= lr * g["b2"]
        model.loss_history.append(total / n)
    return model


# -- random forest -----------------------------------------------------------


@dataclass
class DecisionTree:
    """Array-encoded binary tree; ``feature == -1`` marks a leaf.

    Rows with ``x[feature] <= threshold`` go left.  ``value`` is the leaf
    probability of class 1 (class 0 gets ``1 - value``).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return node

    def predict_proba(self, X):
        return self.value[self.apply(X)]


@dataclass
class Forest:
    trees: list
    n_features: int
    seed: int = 0
    max_features: Optional[int] = None

    def predict_proba(self, X):
        X = _check_width(X, self.n_features)
        per_tree = np.stack([t.predict_proba(X) for t in self.trees], axis=1)
        # Sorting makes the sum independent of tree order.
        return np.sort(per_tree, axis=1).sum(axis=1) / len(self.trees)


def gini_best_split(X, y, features, min_leaf=1):
    """Best (feature, threshold, weighted child impurity) among ``features``.

    Thresholds are midpoints between adjacent distinct values; ties go to the
    lowest feature index, then the lowest threshold.  Returns ``None`` when no
    split leaves ``min_leaf`` rows on both sides.
    """
    n = y.shape[0]
    best = None
    for f in sorted(int(f) for f in features):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        ones_left = np.cumsum(ys)[:-1]
        n_left = np.arange(1, n)
        valid = xs[1:] > xs[:-1]
        valid &= (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not valid.any():
            continue
        n_right = n - n_left
        ones_right = ys.sum() - ones_left
        p_l = ones_left / n_left
        p_r = ones_right / n_right
        impurity = (n_left * 2 * p_l * (1 - p_l) + n_right * 2 * p_r * (1 - p_r)) / n
        impurity = np.where(valid, impurity, np.inf)
        k = int(np.argmin(impurity))
        thr = 0.5 * (xs[k] + xs[k + 1])
        cand = (float(impurity[k]), f, thr)
        if best is None or cand[0] < best[0]:
            best = cand
    if best is None:
        return None
    return best[1], best[2], best[0]


def build_tree(X, y, rng, max_depth=None, min_leaf=1, max_features=None) -> DecisionTree:
    d = X.shape[1]
    m = d if max_features is None else max(1, min(d, int(max_features)))
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[rows].mean()))
        return len(feature) - 1

    stack = [(new_node(np.arange(X.shape[0])), np.arange(X.shape[0]), 0)]
    while stack:
        node, rows, depth = stack.pop()
        ys = y[rows]
        if ys.min() == ys.max() or (max_depth is not None and depth >= max_depth) or rows.size < 2 * min_leaf:
            continue
        cands = rng.choice(d, m, replace=False) if m < d else np.arange(d)
        split = gini_best_split(X[rows], ys, cands, min_leaf)
        if split is None:
            continue
        f, thr, _ = split
        mask = X[rows, f] <= thr
        lrows, rrows = rows[mask], rows[~mask]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(lrows)
        right[node] = new_node(rrows)
        stack.append((right[node], rrows, depth + 1))
        stack.append((left[node], lrows, depth + 1))
    return DecisionTree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=float),
    )


def train_forest(
    X, y, n_trees=100, max_depth=None, min_leaf=1, seed=0, max_features="sqrt", bootstrap=True, n_jobs=1
) -> Forest:
    """Bagged Gini trees, each with its own derived seed."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if n_trees < 1:
        raise ConfigError("n_trees must be positive")
    if max_depth is not None and max_depth < 1:
        raise ConfigError("max_depth must be at least 1")
    if min_leaf < 1 or min_leaf > n:
        raise ConfigError(f"min_leaf must lie in [1, {n}], got {min_leaf}")
    m = max(1, int(math.sqrt(d))) if max_features == "sqrt" else max_features

    def fit_one(t):
        rng = make_rng(seed, "forest-tree", t)
        rows = rng.integers(0, n, n) if bootstrap else np.arange(n)
        return build_tree(X[rows], y[rows], rng, max_depth, min_leaf, m)

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            trees = list(pool.map(fit_one, range(n_trees)))
    else:
        trees = [fit_one(t) for t in range(n_trees)]
    return Forest(trees, d, int(seed), m)


def predict_proba(model, X):
    """Probability of label 1 for any fitted model family."""
    return model.predict_proba(X)
