"""Imputation, one-way ANOVA screening and standardization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SchemaError
from .ingest import EncodedMatrix


@dataclass(frozen=True)
class ImputeConfig:
    k: int = 5

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k}")


@dataclass(frozen=True)
class AnovaResult:
    feature_name: str
    f_stat: float
    p_value: float
    df_between: int
    df_within: int


@dataclass
class Scaler:
    feature_names: list
    means: np.ndarray
    stds: np.ndarray
    constant: np.ndarray


# -- imputation -------------------------------------------------------------


def mode_impute(matrix: EncodedMatrix, categorical_columns) -> EncodedMatrix:
    """Fill missing cells of the named columns with the column's most frequent code.

    Ties go to the smallest code.
    """
    values = matrix.values.copy()
    missing = matrix.missing.copy()
    for name in categorical_columns:
        j = matrix.column_index(name)
        holes = missing[:, j]
        if not holes.any():
            continue
        observed = values[~holes, j]
        if observed.size == 0:
            raise SchemaError(f"column {name!r} has no observed values to impute from")
        codes, counts = np.unique(observed, return_counts=True)
        values[holes, j] = codes[np.argmax(counts)]
        missing[holes, j] = False
    return matrix.replace(values=values, missing=missing)


def _minmax_scaled(values, missing):
    scaled = np.zeros_like(values)
    for j in range(values.shape[1]):
        obs = ~missing[:, j]
        if not obs.any():
            continue
        col = values[obs, j]
        lo, hi = col.min(), col.max()
        if hi > lo:
            scaled[obs, j] = (col - lo) / (hi - lo)
    return scaled


def knn_impute(matrix: EncodedMatrix, config: ImputeConfig = ImputeConfig(), columns=None) -> EncodedMatrix:
    """Fill missing numeric cells with the mean of the k nearest donor rows.

    Distances use min-max scaled coordinates observed in both rows, as
    ``sqrt(sum of squared differences / shared count)``.  Donors for a cell
    are rows where that column was originally observed; equal distances keep
    the lower row index.  ``columns`` defaults to every non-categorical
    feature.
    """
    n = matrix.n_rows
    if config.k >= n:
        raise ConfigError(f"k={config.k} must be smaller than the row count {n}")
    if columns is None:
        columns = [c for c in matrix.feature_names if c not in matrix.categorical]
    targets = [matrix.column_index(c) for c in columns]

    values = matrix.values.copy()
    missing = matrix.missing.copy()
    if not missing[:, targets].any():
        return matrix.replace()
    empty_rows = np.flatnonzero(matrix.missing.all(axis=1))
    if empty_rows.size:
        raise SchemaError(f"row {int(empty_rows[0])} has every feature missing")

    observed = ~matrix.missing
    scaled = _minmax_scaled(matrix.values, matrix.missing)
    for i in np.flatnonzero(matrix.missing[:, targets].any(axis=1)):
        shared = observed & observed[i]
        counts = shared.sum(axis=1)
        diff = np.where(shared, scaled - scaled[i], 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            dist = np.sqrt((diff * diff).sum(axis=1) / counts)
        dist[counts == 0] = np.inf
        dist[i] = np.inf
        for j in targets:
            if not matrix.missing[i, j]:
                continue
            donors = np.flatnonzero(observed[:, j] & np.isfinite(dist))
            if donors.size < config.k:
                raise SchemaError(
                    f"column {matrix.feature_names[j]!r}: row {int(i)} has only {donors.size} usable "
                    f"donors for k={config.k}"
                )
            order = np.argsort(dist[donors], kind="stable")[: config.k]
            values[i, j] = matrix.values[donors[order], j].mean()
            missing[i, j] = False
    return matrix.replace(values=values, missing=missing)


# -- F distribution ----------------------------------------------------------


def _beta_continued_fraction(a, b, x, rtol=1e-12, max_iter=10000):
    # Modified Lentz evaluation of the incomplete-beta continued fraction.
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < rtol:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) via continued fractions, using the symmetry relation for fast convergence."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def f_survival(f_stat: float, df_between: int, df_within: int) -> float:
    """Upper-tail probability P(F > f_stat) of the F(df_between, df_within) distribution."""
    if f_stat <= 0:
        return 1.0
    if math.isinf(f_stat):
        return 0.0
    x = df_within / (df_within + df_between * f_stat)
    return regularized_incomplete_beta(df_within / 2.0, df_between / 2.0, x)


# -- ANOVA ------------------------------------------------------------------


def one_way_anova(column, labels, name="feature") -> AnovaResult:
    column = np.asarray(column, dtype=float)
    labels = np.asarray(labels)
    groups = [column[labels == c] for c in np.unique(labels)]
    if len(groups) < 2:
        raise SchemaError("ANOVA needs at least two classes")
    n = column.size
    df_b = len(groups) - 1
    df_w = n - len(groups)
    if df_w < 1:
        raise SchemaError("ANOVA needs more rows than classes")
    grand = column.mean()
    ssb = sum(g.size * (g.mean() - grand) ** 2 for g in groups)
    ssw = sum(((g - g.mean()) ** 2).sum() for g in groups)
    # Sums of squares below this scale are rounding noise, not signal.
    noise = 1e-12 * max(1.0, float((column * column).sum()))
    if ssb <= noise:
        f_stat = 0.0
    elif ssw <= noise:
        f_stat = math.inf
    else:
        f_stat = (ssb / df_b) / (ssw / df_w)
    return AnovaResult(name, float(f_stat), f_survival(f_stat, df_b, df_w), df_b, df_w)


def anova_screen(matrix: EncodedMatrix, alpha: float = 0.05):
    """Run one ANOVA per feature and keep those with ``p <= alpha`` in column order."""
    if matrix.missing.any():
        raise SchemaError("anova_screen needs a fully imputed matrix")
    if np.unique(matrix.labels).size < 2:
        raise SchemaError("anova_screen needs both classes")
    results = [
        one_way_anova(matrix.values[:, j], matrix.labels, name) for j, name in enumerate(matrix.feature_names)
    ]
    kept = [r.feature_name for r in results if r.p_value <= alpha]
    return kept, results


# -- standardization -------------------------------------------------------


def fit_standardize(values, feature_names=None) -> Scaler:
    """Per-column mean and population standard deviation.

    Constant columns are flagged and get std 1 so they map to zeros.
    """
    values = np.asarray(values, dtype=float)
    if np.isnan(values).any():
        raise SchemaError("fit_standardize needs a fully imputed matrix")
    means = values.mean(axis=0)
    stds = values.std(axis=0)
    constant = stds == 0
    stds = np.where(constant, 1.0, stds)
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(values.shape[1])]
    return Scaler(names, means, stds, constant)


def apply_standardize(values, scaler: Scaler):
    values = np.asarray(values, dtype=float)
    if values.shape[1] != scaler.means.shape[0]:
        raise SchemaError(f"matrix has {values.shape[1]} columns, scaler expects {scaler.means.shape[0]}")
    out = (values - scaler.means) / scaler.stds
    out[:, scaler.constant] = 0.0
    return out
