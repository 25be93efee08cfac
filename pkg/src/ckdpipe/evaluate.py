"""Confusion matrices, classification metrics, Cohen's kappa, ROC/AUC, CV and grid search."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CkdError, ConfigError, SchemaError
from .resample import stratified_folds


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int
    positive_label: int = 1

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn

    def swapped(self):
        """The same counts seen with the other label as positive."""
        return ConfusionMatrix(self.tn, self.fn, self.fp, self.tp, 1 - self.positive_label)

    def as_grid(self):
        """Display layout ``[[TP, FP], [FN, TN]]``."""
        return [[self.tp, self.fp], [self.fn, self.tn]]


@dataclass(frozen=True)
class ClassMetrics:
    label: int
    precision: float
    recall: float
    f1: float
    degenerate: tuple = ()


@dataclass
class MetricsReport:
    accuracy: float
    per_class: dict
    confusion: ConfusionMatrix
    kappa: float
    auc: float = float("nan")
    roc: list = field(default_factory=list)
    kappa_degenerate: bool = False
    training_time_seconds: float = 0.0

    def to_dict(self, with_time=False):
        out = {
            "accuracy": self.accuracy,
            "auc": self.auc,
            "kappa": self.kappa,
            "kappa_degenerate": self.kappa_degenerate,
            "confusion": {
                "positive_label": self.confusion.positive_label,
                "tp": self.confusion.tp,
                "fp": self.confusion.fp,
                "fn": self.confusion.fn,
                "tn": self.confusion.tn,
            },
            "per_class": {
                str(k): {"precision": m.precision, "recall": m.recall, "f1": m.f1, "degenerate": list(m.degenerate)}
                for k, m in sorted(self.per_class.items())
            },
        }
        if with_time:
            out["training_time_seconds"] = self.training_time_seconds
        return out


def confusion(y_true, y_pred, positive_label=1) -> ConfusionMatrix:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise SchemaError(f"length mismatch: {y_true.size} labels vs {y_pred.size} predictions")
    pos_t = y_true == positive_label
    pos_p = y_pred == positive_label
    return ConfusionMatrix(
        tp=int((pos_t & pos_p).sum()),
        fp=int((~pos_t & pos_p).sum()),
        fn=int((pos_t & ~pos_p).sum()),
        tn=int((~pos_t & ~pos_p).sum()),
        positive_label=positive_label,
    )


def _ratio(num, den, name, flags):
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def class_metrics(cm: ConfusionMatrix) -> ClassMetrics:
    """Precision, recall and F1 for ``cm.positive_label``; zero denominators give 0 and a flag."""
    flags = []
    precision = _ratio(cm.tp, cm.tp + cm.fp, "precision", flags)
    recall = _ratio(cm.tp, cm.tp + cm.fn, "recall", flags)
    f1 = _ratio(2 * precision * recall, precision + recall, "f1", flags)
    return ClassMetrics(cm.positive_label, precision, recall, f1, tuple(flags))


def metrics(cm: ConfusionMatrix):
    """Accuracy plus per-class metrics for both labels."""
    if cm.total == 0:
        raise SchemaError("empty confusion matrix")
    per_class = {cm.positive_label: class_metrics(cm), 1 - cm.positive_label: class_metrics(cm.swapped())}
    return (cm.tp + cm.tn) / cm.total, per_class


def kappa(cm: ConfusionMatrix):
    """Cohen's kappa; returns ``(kappa, degenerate)``.

    When chance agreement is 1 the statistic is undefined: kappa is 1 for
    perfect agreement, else 0, and the flag is set.
    """
    n = cm.total
    if n == 0:
        raise SchemaError("empty confusion matrix")
    p_o = (cm.tp + cm.tn) / n
    p_e = ((cm.tp + cm.fp) * (cm.tp + cm.fn) + (cm.fn + cm.tn) * (cm.fp + cm.tn)) / (n * n)
    if p_e == 1.0:
        return (1.0 if p_o == 1.0 else 0.0), True
    return (p_o - p_e) / (1.0 - p_e), False


def roc_auc(y_true, scores):
    """ROC points over descending distinct thresholds and the trapezoid AUC.

    Tied scores move together, so the curve crosses a tie block diagonally;
    the area equals the Mann-Whitney statistic with ties counted as one half.
    """
    y = np.asarray(y_true)
    s = np.asarray(scores, dtype=float)
    n_pos = int((y == 1).sum())
    n_neg = int((y != 1).sum())
    if n_pos == 0 or n_neg == 0:
        raise SchemaError("roc_auc needs both classes")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]
    tps = np.cumsum(y == 1)[last]
    fps = np.cumsum(y != 1)[last]
    tpr = np.r_[0, tps] / n_pos
    fpr = np.r_[0, fps] / n_neg
    # Integer trapezoid sums keep the area exact before the final division.
    tp_all = np.r_[0, tps]
    fp_all = np.r_[0, fps]
    area2 = int(((fp_all[1:] - fp_all[:-1]) * (tp_all[1:] + tp_all[:-1])).sum())
    auc = area2 / (2.0 * n_pos * n_neg)
    return [(float(a), float(b)) for a, b in zip(fpr, tpr)], auc


def accuracy(y_true, y_pred):
    return float(np.mean(np.asarray(y_true) == np.asarray(y_pred)))


def evaluate_predictions(y_true, proba, positive_label=1, training_time=0.0) -> MetricsReport:
    y_pred = (np.asarray(proba) >= 0.5).astype(np.int64)
    cm = confusion(y_true, y_pred, positive_label)
    acc, per_class = metrics(cm)
    k, degenerate = kappa(cm)
    roc, auc = roc_auc(y_true, proba)
    return MetricsReport(acc, per_class, cm, k, auc, roc, degenerate, training_time)


# -- cross-validation ---------------------------------------------------------

Trainer = Callable  # (X_train, y_train) -> object with predict_proba(X)


def kfold_cv(features, labels, k, seed, trainer: Trainer, n_jobs=1):
    """Stratified k-fold accuracies in fold order."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    folds = stratified_folds(y, k, seed, stage="cv")

    def run(f):
        tr, te = folds != f, folds == f
        model = trainer(X[tr], y[tr])
        pred = (np.asarray(model.predict_proba(X[te])) >= 0.5).astype(np.int64)
        return accuracy(y[te], pred)

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            return list(pool.map(run, range(k)))
    return [run(f) for f in range(k)]


class GridCellError(CkdError):
    def __init__(self, params, cause):
        self.params = params
        self.cause = cause
        super().__init__(f"grid cell {params} failed: {cause}")


def grid_cells(grid):
    """Cartesian product in sorted-key order, each key's values in listed order."""
    if not grid:
        raise ConfigError("grid must not be empty")
    keys = sorted(grid)
    for key in keys:
        if not list(grid[key]):
            raise ConfigError(f"grid entry {key!r} has no candidates")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(list(grid[k]) for k in keys))]


def grid_search(grid, trainer_family, features, labels, k=5, seed=0, n_jobs=1):
    """Exhaustive grid search by mean stratified CV accuracy.

    ``trainer_family(params)`` returns a trainer.  The best cell is the
    earliest one reaching the highest mean.  Returns ``(best_params, table)``
    where each table row is ``{"params", "fold_accuracies", "mean_accuracy"}``.
    """
    cells = grid_cells(grid)

    def evaluate_cell(params):
        try:
            folds = kfold_cv(features, labels, k, seed, trainer_family(params))
        except CkdError as exc:
            raise GridCellError(params, exc) from exc
        except (ValueError, ArithmeticError) as exc:
            raise GridCellError(params, exc) from exc
        return {"params": params, "fold_accuracies": folds, "mean_accuracy": float(np.mean(folds))}

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            table = list(pool.map(evaluate_cell, cells))
    else:
        table = [evaluate_cell(c) for c in cells]
    best = 0
    for i, row in enumerate(table):
        if row["mean_accuracy"] > table[best]["mean_accuracy"]:
            best = i
    return dict(table[best]["params"]), table
