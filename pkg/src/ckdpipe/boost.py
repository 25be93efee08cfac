"""Gradient boosting of oblivious (symmetric) decision trees on quantized features.

Every tree uses one ``(feature, border)`` test per level, so a depth-``d``
tree has ``2**d`` leaves.  A row's leaf index sets bit ``l`` when the row's bin
on the level-``l`` feature exceeds that level's border index.  Leaves hold
Newton steps ``-G / (H + l2_leaf_reg)`` of the log-loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .baselines import log_loss, sigmoid
from .errors import ConfigError, DimensionError, TrainingError


@dataclass(frozen=True)
class BoostParams:
    iterations: int = 200
    depth: int = 8
    learning_rate: float = 0.01
    l2_leaf_reg: float = 3.0
    border_count: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError("iterations must be non-negative")
        if not 1 <= self.depth <= 16:
            raise ConfigError("depth must lie in [1, 16]")
        if self.border_count < 1:
            raise ConfigError("border_count must be positive")
        if self.l2_leaf_reg < 0:
            raise ConfigError("l2_leaf_reg must be non-negative")


@dataclass
class QuantizedMatrix:
    borders: list
    bins: np.ndarray


@dataclass
class ObliviousTree:
    features: np.ndarray
    border_index: np.ndarray
    leaf_values: np.ndarray

    @property
    def depth(self):
        return int(self.features.shape[0])

    def leaf_index(self, bins):
        idx = np.zeros(bins.shape[0], dtype=np.int64)
        for level, (f, b) in enumerate(zip(self.features, self.border_index)):
            idx |= (bins[:, f] > b).astype(np.int64) << level
        return idx


@dataclass
class ObliviousEnsemble:
    params: BoostParams
    borders: list
    base_score: float
    trees: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)

    @property
    def n_features(self):
        return len(self.borders)

    def bins(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            got = X.shape[1] if X.ndim == 2 else X.ndim
            raise DimensionError(f"model expects {self.n_features} features, got {got}")
        return apply_borders(X, self.borders)

    def predict_margin(self, X):
        return predict_margin(self, X)

    def predict_proba(self, X):
        return sigmoid(predict_margin(self, X))


def _feature_borders(column, border_count):
    values, counts = np.unique(column, return_counts=True)
    if values.size <= 1:
        return np.empty(0)
    mids = 0.5 * (values[1:] + values[:-1])
    if values.size - 1 <= border_count:
        return mids
    # Equal-frequency cuts, each placed at the gap between distinct values
    # whose cumulative count is nearest the target rank.
    cum = np.cumsum(counts)[:-1]
    n = column.size
    chosen = set()
    for k in range(1, border_count + 1):
        target = k * n / (border_count + 1)
        i = int(np.searchsorted(cum, target))
        best = min(
            (g for g in (i - 1, i) if 0 <= g < cum.size),
            key=lambda g: (abs(cum[g] - target), g),
        )
        chosen.add(best)
    return mids[sorted(chosen)]


def quantize(X, border_count=32) -> QuantizedMatrix:
    """Quantile borders per feature; ``bin = b`` means ``border[b-1] < x <= border[b]``."""
    X = np.asarray(X, dtype=float)
    if np.isnan(X).any():
        raise ConfigError("quantize needs a matrix without missing values")
    borders = [_feature_borders(X[:, j], border_count) for j in range(X.shape[1])]
    return QuantizedMatrix(borders, apply_borders(X, borders))


def apply_borders(X, borders):
    bins = np.empty(X.shape, dtype=np.int64)
    for j, b in enumerate(borders):
        bins[:, j] = np.searchsorted(b, X[:, j], side="left")
    return bins


class _Histogram:
    """Flattened (node, feature, bin) layout for split search."""

    def __init__(self, bins, borders):
        self.n_bins = np.array([len(b) + 1 for b in borders], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.n_bins)[:-1]])
        self.total = int(self.n_bins.sum())
        self.flat = bins + self.offsets
        feats, cut, base = [], [], []
        for f, nb in enumerate(self.n_bins):
            for b in range(nb - 1):
                feats.append(f)
                cut.append(b)
                base.append(self.offsets[f])
        self.cand_feature = np.asarray(feats, dtype=np.int64)
        self.cand_border = np.asarray(cut, dtype=np.int64)
        # column (in the cumsum with a leading zero) just before each feature's first bin
        self.cand_start = np.asarray(base, dtype=np.int64)
        self.cand_end = self.cand_start + self.cand_border + 1

    def sums(self, node, weights, n_nodes):
        n, d = self.flat.shape
        keys = (node[:, None] * self.total + self.flat).ravel()
        w = np.repeat(weights, d)
        return np.bincount(keys, weights=w, minlength=n_nodes * self.total).reshape(n_nodes, self.total)


def split_gains(G_left, H_left, G_node, H_node, l2):
    """Gain of every candidate, summed over nodes: rows are nodes, columns candidates."""
    G_right = G_node[:, None] - G_left
    H_right = H_node[:, None] - H_left

    def score(g, h):
        den = h + l2
        return np.divide(g * g, den, out=np.zeros_like(g), where=den > 0)

    node_score = score(G_node, H_node)[:, None]
    return (score(G_left, H_left) + score(G_right, H_right) - node_score).sum(axis=0)


def best_split(hist: _Histogram, node, g, h, n_nodes, l2):
    """Choose the level split; returns ``(feature, border, gains)`` or ``None``."""
    if hist.cand_feature.size == 0:
        return None
    Gb = hist.sums(node, g, n_nodes)
    Hb = hist.sums(node, h, n_nodes)
    Gc = np.concatenate([np.zeros((n_nodes, 1)), np.cumsum(Gb, axis=1)], axis=1)
    Hc = np.concatenate([np.zeros((n_nodes, 1)), np.cumsum(Hb, axis=1)], axis=1)
    G_left = Gc[:, hist.cand_end] - Gc[:, hist.cand_start]
    H_left = Hc[:, hist.cand_end] - Hc[:, hist.cand_start]
    G_node = np.bincount(node, weights=g, minlength=n_nodes)
    H_node = np.bincount(node, weights=h, minlength=n_nodes)
    gains = split_gains(G_left, H_left, G_node, H_node, l2)
    k = int(np.argmax(gains))
    return int(hist.cand_feature[k]), int(hist.cand_border[k]), gains


def newton_leaves(leaf, g, h, n_leaves, l2):
    G = np.bincount(leaf, weights=g, minlength=n_leaves)
    H = np.bincount(leaf, weights=h, minlength=n_leaves)
    den = H + l2
    return np.divide(-G, den, out=np.zeros_like(G), where=den > 0)


def fit_boost(X, y, params: BoostParams = BoostParams()) -> ObliviousEnsemble:
    """Newton boosting of oblivious trees on the log-loss.

    Each level takes the single ``(feature, border)`` maximizing the summed
    gain over all current nodes; ties go to the lowest feature, then the
    lowest border.  Margins advance by ``learning_rate`` times the leaf value.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] == 0:
        raise TrainingError("cannot boost on an empty training set")
    rate = float(y.mean())
    if rate <= 0.0 or rate >= 1.0:
        raise TrainingError("both classes must be present to fit the booster")
    q = quantize(X, params.border_count)
    base = math.log(rate / (1.0 - rate))
    ensemble = ObliviousEnsemble(params, q.borders, base)
    hist = _Histogram(q.bins, q.borders)
    margin = np.full(X.shape[0], base)
    lam = params.l2_leaf_reg
    for _ in range(params.iterations):
        p = sigmoid(margin)
        g = p - y
        h = p * (1.0 - p)
        node = np.zeros(X.shape[0], dtype=np.int64)
        feats, cuts = [], []
        for level in range(params.depth):
            choice = best_split(hist, node, g, h, 1 << level, lam)
            if choice is None:
                break
            f, b, _ = choice
            feats.append(f)
            cuts.append(b)
            node |= (q.bins[:, f] > b).astype(np.int64) << level
        leaves = newton_leaves(node, g, h, 1 << len(feats), lam)
        tree = ObliviousTree(np.asarray(feats, dtype=np.int64), np.asarray(cuts, dtype=np.int64), leaves)
        if not np.isfinite(leaves).all():
            raise TrainingError("non-finite leaf value")
        ensemble.trees.append(tree)
        margin = margin + params.learning_rate * leaves[node]
        ensemble.train_loss.append(log_loss(y, margin))
    return ensemble


def predict_margin(ensemble: ObliviousEnsemble, X):
    """``base_score + learning_rate * sum of leaf values`` per row."""
    bins = ensemble.bins(X)
    total = np.zeros(bins.shape[0])
    for tree in ensemble.trees:
        total += tree.leaf_values[tree.leaf_index(bins)]
    return ensemble.base_score + ensemble.params.learning_rate * total


def predict_proba(ensemble: ObliviousEnsemble, X):
    return sigmoid(predict_margin(ensemble, X))
