"""Exact Shapley attributions for oblivious-tree ensembles.

For one tree and a coalition ``S`` of features, the value ``v(S)`` of a row
is the tree output when levels testing a feature in ``S`` follow the row and
all other levels split by background occupancy (the cover of each child over
the cover of its parent).  A node that no background row reaches splits
50/50.  Shapley values of ``v`` are computed exactly by enumerating subsets
of the features the tree actually uses; at most ``depth`` of them, so at most
``2**depth`` coalitions per tree.  Attributions are on the margin scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boost import ObliviousEnsemble, ObliviousTree
from .errors import DimensionError, SchemaError


@dataclass
class ShapMatrix:
    base_value: float
    phi: np.ndarray


def node_covers(tree: ObliviousTree, background_bins):
    """Background row counts per node, one array per level (level ``l`` has ``2**l`` nodes)."""
    covers = []
    idx = np.zeros(background_bins.shape[0], dtype=np.int64)
    covers.append(np.array([float(background_bins.shape[0])]))
    for level, (f, b) in enumerate(zip(tree.features, tree.border_index)):
        idx |= (background_bins[:, f] > b).astype(np.int64) << level
        covers.append(np.bincount(idx, minlength=1 << (level + 1)).astype(float))
    return covers


def _child_weights(covers):
    """Fraction of each node's cover going to its low / high child, per level."""
    weights = []
    for level in range(len(covers) - 1):
        parent = covers[level]
        child = covers[level + 1]
        half = parent.size
        lo, hi = child[:half], child[half:]
        with np.errstate(divide="ignore", invalid="ignore"):
            w_lo = np.where(parent > 0, lo / parent, 0.5)
            w_hi = np.where(parent > 0, hi / parent, 0.5)
        weights.append((w_lo, w_hi))
    return weights


def coalition_values(tree: ObliviousTree, bins, covers):
    """``v(S)`` for every subset ``S`` of the tree's distinct features.

    Returns ``(used_features, values)`` where ``values[s, i]`` is the value of
    coalition bitmask ``s`` (bit ``j`` = ``used_features[j]``) for row ``i``.
    """
    used = sorted(set(int(f) for f in tree.features))
    n = bins.shape[0]
    n_sub = 1 << len(used)
    member = ((np.arange(n_sub)[:, None] >> np.arange(len(used))) & 1).astype(bool)
    weights = _child_weights(covers)
    vals = np.broadcast_to(tree.leaf_values, (n_sub, n, tree.leaf_values.size))
    for level in range(tree.depth - 1, -1, -1):
        f = int(tree.features[level])
        half = 1 << level
        lo, hi = vals[..., :half], vals[..., half:]
        w_lo, w_hi = weights[level]
        averaged = lo * w_lo + hi * w_hi
        goes_high = (bins[:, f] > tree.border_index[level])[None, :, None]
        followed = np.where(goes_high, hi, lo)
        known = member[:, used.index(f)][:, None, None]
        vals = np.where(known, followed, averaged)
    return used, vals[..., 0]


def _shapley_weights(m):
    return np.array([math.factorial(s) * math.factorial(m - s - 1) / math.factorial(m) for s in range(m)])


def tree_shapley(tree: ObliviousTree, bins, covers):
    """Per-row Shapley values of one tree (unscaled) and its empty-coalition values."""
    used, values = coalition_values(tree, bins, covers)
    m = len(used)
    phi = {}
    if m:
        sizes = np.array([bin(s).count("1") for s in range(1 << m)])
        w = _shapley_weights(m)
        for j, f in enumerate(used):
            without = np.flatnonzero(((np.arange(1 << m) >> j) & 1) == 0)
            delta = values[without | (1 << j)] - values[without]
            phi[f] = w[sizes[without]] @ delta
    return phi, values[0]


def tree_shap(ensemble: ObliviousEnsemble, features, background) -> ShapMatrix:
    """Exact Shapley values of the ensemble margin for every row of ``features``.

    ``background`` (typically the training matrix) sets the cover weights.
    ``base_value`` is the background-weighted mean margin.
    """
    X = np.asarray(features, dtype=float)
    B = np.asarray(background, dtype=float)
    if B.ndim != 2 or B.shape[0] == 0:
        raise SchemaError("background must be a non-empty matrix")
    if X.ndim != 2 or X.shape[1] != ensemble.n_features or B.shape[1] != ensemble.n_features:
        raise DimensionError(
            f"model expects {ensemble.n_features} features, got {X.shape[-1]} (rows) / {B.shape[-1]} (background)"
        )
    bg_bins = ensemble.bins(B)
    # One background row rides along so the empty-coalition value exists even for zero rows.
    bins = np.vstack([ensemble.bins(X), bg_bins[:1]])
    n = X.shape[0]
    lr = ensemble.params.learning_rate
    phi = np.zeros(X.shape)
    base = 0.0
    for tree in ensemble.trees:
        covers = node_covers(tree, bg_bins)
        contrib, empty = tree_shapley(tree, bins, covers)
        for f, values in contrib.items():
            phi[:, f] += values[:n]
        base += float(empty[-1])
    return ShapMatrix(ensemble.base_score + lr * base, lr * phi)


@dataclass
class FeatureRanking:
    entries: list

    @property
    def names(self):
        return [name for name, _ in self.entries]


def summarize(shap: ShapMatrix, names) -> FeatureRanking:
    """Features by mean |phi| descending; ties in lexicographic name order."""
    if shap.phi.size == 0:
        raise SchemaError("empty SHAP matrix")
    if shap.phi.shape[1] != len(names):
        raise DimensionError(f"{shap.phi.shape[1]} attribution columns for {len(names)} names")
    means = np.abs(shap.phi).mean(axis=0)
    entries = sorted(((str(n), float(v)) for n, v in zip(names, means)), key=lambda e: (-e[1], e[0]))
    return FeatureRanking(entries)
