"""Wrapper feature selection by simulated annealing over feature bitmasks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .baselines import sigmoid
from .errors import ConfigError, SchemaError
from .resample import stratified_folds
from .seeds import make_rng

PROBE_EPOCHS = 200
PROBE_LR = 0.1
PROBE_L2 = 0.01


@dataclass(frozen=True)
class SAConfig:
    t0: float = 1.0
    cooling: float = 0.95
    max_iter: int = 300
    feature_penalty: float = 0.001
    probe_folds: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.t0 <= 0:
            raise ConfigError("t0 must be positive")
        if not 0.0 < self.cooling < 1.0:
            raise ConfigError("cooling must lie in (0, 1)")
        if self.max_iter < 0:
            raise ConfigError("max_iter must be non-negative")
        if self.probe_folds < 2:
            raise ConfigError("probe_folds must be at least 2")


@dataclass
class FitnessTrace:
    avg_fitness: list = field(default_factory=list)
    max_fitness: list = field(default_factory=list)

    def rows(self):
        return list(zip(range(len(self.avg_fitness)), self.avg_fitness, self.max_fitness))


def temperature(config: SAConfig, iteration: int) -> float:
    return config.t0 * config.cooling ** iteration


def probe_accuracy(masks, X, y, folds):
    """Cross-validated accuracy of the probe classifier for a batch of masks.

    The probe is L2-regularized logistic regression trained by full-batch
    gradient descent from zero.  Masked-out columns are zeroed, which keeps
    their weights at exactly zero, so all masks train side by side.
    """
    masks = np.atleast_2d(np.asarray(masks, dtype=float))
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    k = int(folds.max()) + 1
    n_masks = masks.shape[0]
    # One column per (mask, fold) pair, mask-major.
    col_mask = np.repeat(masks, k, axis=0)
    col_fold = np.tile(np.arange(k), n_masks)
    train = (folds[:, None] != col_fold[None, :]).astype(float)
    scale = train / train.sum(axis=0)
    W = np.zeros(col_mask.shape)
    b = np.zeros(col_mask.shape[0])
    for _ in range(PROBE_EPOCHS):
        r = (sigmoid(X @ (W * col_mask).T + b) - y[:, None]) * scale
        W -= PROBE_LR * ((r.T @ X) * col_mask + PROBE_L2 * W)
        b -= PROBE_LR * r.sum(axis=0)
    z = X @ (W * col_mask).T + b
    hit = ((z >= 0) == (y[:, None] == 1)) & (train == 0)
    return hit.sum(axis=0).reshape(n_masks, k).sum(axis=1) / y.size


class FitnessFunction:
    """Penalized probe accuracy with fixed folds and a per-mask cache."""

    def __init__(self, X, y, probe_folds=3, feature_penalty=0.001, seed=0):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y)
        self.penalty = feature_penalty
        self.folds = stratified_folds(self.y, probe_folds, seed, stage="sa-probe")
        self.cache = {}

    def batch(self, masks):
        masks = np.atleast_2d(np.asarray(masks, dtype=bool))
        if (masks.sum(axis=1) == 0).any():
            raise ConfigError("fitness is undefined for an empty mask")
        acc = probe_accuracy(masks, self.X, self.y, self.folds)
        return acc - self.penalty * masks.sum(axis=1) / masks.shape[1]

    def __call__(self, mask):
        mask = np.asarray(mask, dtype=bool)
        key = mask.tobytes()
        if key not in self.cache:
            self.cache[key] = float(self.batch(mask[None, :])[0])
        return self.cache[key]


def fitness(mask, features, labels, probe_folds=3, feature_penalty=0.001, seed=0) -> float:
    """Probe CV accuracy on the masked columns minus ``penalty * popcount / d``."""
    return FitnessFunction(features, labels, probe_folds, feature_penalty, seed)(mask)


def sa_select(features, labels, config: SAConfig = SAConfig(), callback: Optional[Callable] = None):
    """Simulated annealing over feature masks with single-bit-flip moves.

    A neighbor is accepted when it is no worse than the current mask, or with
    probability ``exp(delta / T)`` otherwise.  The temperature after ``i``
    iterations is ``t0 * cooling**i``.  ``callback(i, delta, accepted, T)`` is
    called once per iteration.

    Returns ``(best_mask, trace)``; the trace has ``max_iter + 1`` points, the
    first being the initial mask.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    d = X.shape[1]
    if d < 2:
        raise SchemaError("sa_select needs at least 2 features")
    if np.unique(y).size < 2:
        raise SchemaError("sa_select needs both classes")
    score = FitnessFunction(X, y, config.probe_folds, config.feature_penalty, config.seed)
    rng = make_rng(config.seed, "sa")

    current = rng.integers(0, 2, d).astype(bool)
    while not current.any():
        current = rng.integers(0, 2, d).astype(bool)
    current_fit = score(current)
    best, best_fit = current.copy(), current_fit
    running = current_fit
    trace = FitnessTrace([current_fit], [best_fit])

    for i in range(config.max_iter):
        T = temperature(config, i)
        while True:
            bit = int(rng.integers(0, d))
            neighbor = current.copy()
            neighbor[bit] = ~neighbor[bit]
            if neighbor.any():
                break
        neighbor_fit = score(neighbor)
        delta = neighbor_fit - current_fit
        accepted = delta >= 0 or rng.random() < math.exp(delta / T)
        if callback is not None:
            callback(i, delta, accepted, T)
        if accepted:
            current, current_fit = neighbor, neighbor_fit
        if current_fit > best_fit:
            best, best_fit = current.copy(), current_fit
        running += (current_fit - running) / (i + 2)
        trace.avg_fitness.append(running)
        trace.max_fitness.append(best_fit)
    return best, trace


def exhaustive_best(features, labels, probe_folds=3, feature_penalty=0.001, seed=0, chunk=256):
    """Best fitness over every non-empty mask (feasible for small ``d``)."""
    X = np.asarray(features, dtype=float)
    d = X.shape[1]
    score = FitnessFunction(X, labels, probe_folds, feature_penalty, seed)
    codes = np.arange(1, 1 << d)
    masks = ((codes[:, None] >> np.arange(d)) & 1).astype(bool)
    values = np.concatenate([score.batch(masks[s:s + chunk]) for s in range(0, len(masks), chunk)])
    k = int(np.argmax(values))
    return masks[k], float(values[k]), masks, values
