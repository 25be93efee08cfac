"""Tukey-fence outlier detection and Cuckoo Search outlier adjustment.

Each numeric column with outliers gets its own search.  A nest is a vector of
candidate replacement values, one per outlier cell of that column, scored by

    F(v) = sum_i |v_i - x_i| / iqr + penalty * sum_i max(0, lower - v_i, v_i - upper) / iqr

whose exact minimizer clamps each outlier to its nearest fence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SchemaError
from .ingest import EncodedMatrix
from .seeds import derive_seed


@dataclass(frozen=True)
class Fences:
    q1: float
    q3: float
    iqr: float
    lower: float
    upper: float


@dataclass(frozen=True)
class CuckooConfig:
    n_nests: int = 25
    pa: float = 0.25
    levy_beta: float = 1.5
    step_scale: float = 0.01
    max_iter: int = 200
    penalty_weight: float = 1000.0
    seed: int = 0

    def __post_init__(self):
        if self.n_nests < 1:
            raise ConfigError("n_nests must be positive")
        if not 0.0 <= self.pa <= 1.0:
            raise ConfigError("pa must lie in [0, 1]")
        if not 1.0 < self.levy_beta <= 2.0:
            raise ConfigError("levy_beta must lie in (1, 2]")
        if self.step_scale <= 0:
            raise ConfigError("step_scale must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be positive")
        if self.penalty_weight < 0:
            raise ConfigError("penalty_weight must be non-negative")


@dataclass
class AdjustmentLog:
    column: str
    fences: Fences
    outlier_rows: list
    original: list
    adjusted: list
    best_fitness: list = field(default_factory=list)
    skipped: bool = False


def _quantile(sorted_col, p):
    pos = p * (sorted_col.size - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, sorted_col.size - 1)
    return float(sorted_col[lo] + (pos - lo) * (sorted_col[hi] - sorted_col[lo]))


def detect_outliers(column):
    """Tukey 1.5*IQR fences with linearly interpolated quartiles.

    Returns the fences and the ascending indices of cells outside them.
    """
    column = np.asarray(column, dtype=float)
    if column.size < 4 or not np.isfinite(column).all():
        raise SchemaError("detect_outliers needs at least 4 finite values")
    ordered = np.sort(column)
    q1, q3 = _quantile(ordered, 0.25), _quantile(ordered, 0.75)
    iqr = q3 - q1
    fences = Fences(q1, q3, iqr, q1 - 1.5 * iqr, q3 + 1.5 * iqr)
    idx = np.flatnonzero((column < fences.lower) | (column > fences.upper))
    return fences, [int(i) for i in idx]


def levy_sigma(beta: float) -> float:
    """Scale of the numerator Gaussian in Mantegna's algorithm."""
    num = math.gamma(1 + beta) * math.sin(math.pi * beta / 2)
    den = math.gamma((1 + beta) / 2) * beta * 2 ** ((beta - 1) / 2)
    return (num / den) ** (1 / beta)


def mantegna(u, v, beta):
    return u / np.abs(v) ** (1.0 / beta)


def levy_step(rng: np.random.Generator, beta: float = 1.5, size=None):
    """Draw Lévy-stable steps with Mantegna's two-Gaussian construction."""
    if not 1.0 < beta <= 2.0:
        raise ConfigError("beta must lie in (1, 2]")
    u = rng.normal(0.0, levy_sigma(beta), size)
    v = rng.normal(0.0, 1.0, size)
    return mantegna(u, v, beta)


def _cell_costs(values, original, fences, penalty):
    excess = np.maximum(0.0, np.maximum(fences.lower - values, values - fences.upper))
    return (np.abs(values - original) + penalty * excess) / fences.iqr


def cuckoo_adjust(original, fences: Fences, config: CuckooConfig, rng: np.random.Generator):
    """Search replacements for ``original`` (the outlier cells of one column).

    The objective is a sum of independent per-cell terms, so a Lévy proposal
    replaces a nest coordinate-wise wherever the proposal scores better, and
    the best nest is assembled from the best value seen for each cell.  The
    worst ceil(pa * n_nests) nests are re-seeded uniformly inside the fences
    after every iteration.

    Returns ``(best_values, history)`` where history is the best fitness after
    each iteration.
    """
    if not fences.iqr > 0:
        raise ConfigError("cuckoo_adjust needs a positive IQR to scale the objective")
    original = np.asarray(original, dtype=float)
    m = original.size
    span = fences.upper - fences.lower
    lo_clip, hi_clip = fences.lower - 3 * fences.iqr, fences.upper + 3 * fences.iqr
    n_abandon = math.ceil(config.pa * config.n_nests)

    nests = rng.uniform(fences.lower, fences.upper, (config.n_nests, m))
    costs = _cell_costs(nests, original, fences, config.penalty_weight)
    cols = np.arange(m)
    rows = np.argmin(costs, axis=0)
    best = nests[rows, cols].copy()
    best_cost = costs[rows, cols].copy()

    history = []
    for _ in range(config.max_iter):
        step = levy_step(rng, config.levy_beta, (config.n_nests, m))
        proposal = np.clip(nests + config.step_scale * span * step, lo_clip, hi_clip)
        prop_costs = _cell_costs(proposal, original, fences, config.penalty_weight)
        better = prop_costs < costs
        nests[better] = proposal[better]
        costs[better] = prop_costs[better]

        rows = np.argmin(costs, axis=0)
        cand = costs[rows, cols]
        improved = cand < best_cost
        best[improved] = nests[rows, cols][improved]
        best_cost[improved] = cand[improved]

        if n_abandon:
            worst = np.argsort(costs.sum(axis=1), kind="stable")[config.n_nests - n_abandon:]
            nests[worst] = rng.uniform(fences.lower, fences.upper, (n_abandon, m))
            costs[worst] = _cell_costs(nests[worst], original, fences, config.penalty_weight)
            rows = np.argmin(costs, axis=0)
            cand = costs[rows, cols]
            improved = cand < best_cost
            best[improved] = nests[rows, cols][improved]
            best_cost[improved] = cand[improved]

        history.append(float(best_cost.sum()))
    return best, history


def adjust_outliers(matrix: EncodedMatrix, config: CuckooConfig = CuckooConfig(), columns=None):
    """Replace Tukey outliers of every numeric column with Cuckoo Search results.

    Categorical columns are skipped.  Column ``j`` searches with the seed
    ``derive_seed(config.seed, "cuckoo", j)`` so columns are independent of
    processing order.  Returns the adjusted matrix and one log per column that
    had outliers.

    A column whose quartiles coincide (IQR 0) can still have cells outside
    the collapsed fences, e.g. a mostly-zero count.  The objective has no
    scale there, so such a column is left as is and logged with
    ``skipped=True``.
    """
    if matrix.missing.any():
        raise SchemaError("adjust_outliers needs a fully imputed matrix")
    if columns is None:
        columns = [c for c in matrix.feature_names if c not in matrix.categorical]
    values = matrix.values.copy()
    logs = []
    for name in columns:
        j = matrix.column_index(name)
        fences, idx = detect_outliers(values[:, j])
        if not idx:
            continue
        if fences.iqr == 0:
            kept = [float(v) for v in values[idx, j]]
            logs.append(AdjustmentLog(name, fences, list(idx), kept, kept, [], skipped=True))
            continue
        rng = np.random.Generator(np.random.PCG64(derive_seed(config.seed, "cuckoo", j)))
        best, history = cuckoo_adjust(values[idx, j], fences, config, rng)
        logs.append(
            AdjustmentLog(
                column=name,
                fences=fences,
                outlier_rows=list(idx),
                original=[float(v) for v in values[idx, j]],
                adjusted=[float(v) for v in best],
                best_fitness=history,
            )
        )
        values[idx, j] = best
    return matrix.replace(values=values), logs


def winsorize(values, fences: Fences):
    """Closed-form optimum of the adjustment objective: clamp to the fences."""
    return np.clip(np.asarray(values, dtype=float), fences.lower, fences.upper)
