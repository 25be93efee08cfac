"""Stratified splitting, stratified folds and SMOTE oversampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SchemaError
from .seeds import make_rng


@dataclass(frozen=True)
class SplitConfig:
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")


@dataclass(frozen=True)
class SmoteConfig:
    target_per_class: int = 450
    k_neighbors: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.target_per_class < 1:
            raise ConfigError("target_per_class must be positive")
        if self.k_neighbors < 1:
            raise ConfigError("k_neighbors must be positive")


@dataclass
class Split:
    train_index: np.ndarray
    test_index: np.ndarray
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray


def split_indices(labels, config: SplitConfig):
    """Per class: shuffle with a class-specific stream, the first floor(f*n) rows go to test."""
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.size < 2:
        raise SchemaError("stratified split needs both classes")
    train, test = [], []
    for c in classes:
        members = np.flatnonzero(labels == c)
        if members.size < 2:
            raise SchemaError(f"class {int(c)} has fewer than 2 rows")
        n_test = math.floor(config.test_fraction * members.size)
        if n_test < 1 or n_test >= members.size:
            raise ConfigError(
                f"test_fraction {config.test_fraction} leaves class {int(c)} "
                f"({members.size} rows) with an empty side"
            )
        order = make_rng(config.seed, "split", int(c)).permutation(members)
        test.append(order[:n_test])
        train.append(order[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_split(features, labels, config: SplitConfig = SplitConfig()) -> Split:
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    tr, te = split_indices(labels, config)
    return Split(tr, te, features[tr], labels[tr], features[te], labels[te])


def stratified_folds(labels, k: int, seed: int, stage: str = "folds"):
    """Assign each row a fold id in ``0..k-1``, balanced within every class."""
    labels = np.asarray(labels)
    if k < 2:
        raise ConfigError("k must be at least 2")
    fold = np.empty(labels.size, dtype=np.int64)
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if members.size < k:
            raise SchemaError(f"class {int(c)} has {members.size} rows, fewer than k={k}")
        order = make_rng(seed, stage, int(c)).permutation(members)
        fold[order] = np.arange(members.size) % k
    return fold


def smote_with_parents(features, labels, config: SmoteConfig = SmoteConfig()):
    """SMOTE up to ``target_per_class`` rows for every class.

    Returns ``(features, labels, parents)``; ``parents`` has one
    ``(row, neighbor)`` pair of input indices per synthetic row.  Original rows
    come first in their input order, then synthetic rows class by class.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    new_rows, new_labels, parents = [], [], []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        need = config.target_per_class - members.size
        if need < 0:
            raise ConfigError(
                f"class {int(c)} already has {members.size} rows, above target {config.target_per_class}"
            )
        if need == 0:
            continue
        if config.k_neighbors >= members.size:
            raise ConfigError(f"k_neighbors={config.k_neighbors} must be below class {int(c)} size {members.size}")
        pts = features[members]
        sq = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(sq, np.inf)
        neighbors = np.argsort(sq, axis=1, kind="stable")[:, : config.k_neighbors]
        rng = make_rng(config.seed, "smote", int(c))
        base = rng.integers(0, members.size, need)
        pick = rng.integers(0, config.k_neighbors, need)
        gap = rng.uniform(0.0, 1.0, need)
        nn = neighbors[base, pick]
        new_rows.append(pts[base] + gap[:, None] * (pts[nn] - pts[base]))
        new_labels.append(np.full(need, c, dtype=labels.dtype))
        parents.append(np.stack([members[base], members[nn]], axis=1))
    if not new_rows:
        return features.copy(), labels.copy(), np.empty((0, 2), dtype=np.int64)
    X = np.vstack([features] + new_rows)
    y = np.concatenate([labels] + new_labels)
    return X, y, np.vstack(parents)


def smote(features, labels, config: SmoteConfig = SmoteConfig()):
    X, y, _ = smote_with_parents(features, labels, config)
    return X, y
