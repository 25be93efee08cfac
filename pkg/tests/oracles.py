"""Independent reference computations used as test oracles.

Each one is written directly from its definition, with no code shared with
the package, and favors clarity over speed.
"""

import itertools
import math

import numpy as np


def central_difference(f, x, step=1e-5):
    """Numerical gradient of scalar ``f`` at array ``x`` (any shape)."""
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + step
        up = f(x)
        x[idx] = orig - step
        down = f(x)
        x[idx] = orig
        grad[idx] = (up - down) / (2 * step)
    return grad


def max_relative_error(analytic, numeric, floor=1e-8):
    a = np.ravel(np.asarray(analytic, dtype=float))
    n = np.ravel(np.asarray(numeric, dtype=float))
    return float(np.max(np.abs(a - n) / np.maximum(floor, np.maximum(np.abs(a), np.abs(n)))))


def pairwise_auc(labels, scores):
    """P(score_pos > score_neg) + P(tie)/2 by counting every pair."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y != 1]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (len(pos) * len(neg))


def kappa_from_counts(tp, fp, fn, tn):
    n = tp + fp + fn + tn
    po = (tp + tn) / n
    pe = ((tp + fp) / n) * ((tp + fn) / n) + ((fn + tn) / n) * ((fp + tn) / n)
    return (po - pe) / (1 - pe)


def best_gini_split(X, y):
    """Exhaustive weighted-Gini split over every (feature, midpoint)."""

    def gini(labels):
        if len(labels) == 0:
            return 0.0
        p = np.mean(labels)
        return 1.0 - p * p - (1 - p) * (1 - p)

    best = None
    n = len(y)
    for f in range(X.shape[1]):
        values = sorted(set(X[:, f].tolist()))
        for lo, hi in zip(values, values[1:]):
            thr = (lo + hi) / 2
            left = y[X[:, f] <= thr]
            right = y[X[:, f] > thr]
            score = (len(left) * gini(left) + len(right) * gini(right)) / n
            if best is None or score < best[2] - 1e-15:
                best = (f, thr, score)
    return best


def oblivious_tree_expectation(levels, leaf_values, x_bins, background_bins, known):
    """E[tree | features in ``known`` fixed to x] by recursion over the tree.

    ``levels`` is a list of (feature, border) pairs, level 0 first; the leaf
    index of a path sets bit ``l`` when level ``l`` went right.  At a level
    testing an unknown feature both children are visited, weighted by the
    share of background rows (among those reaching the node) that go each
    way; a node no background row reaches splits evenly.
    """

    def visit(level, leaf, rows):
        if level == len(levels):
            return leaf_values[leaf]
        f, b = levels[level]
        right_rows = [r for r in rows if background_bins[r][f] > b]
        left_rows = [r for r in rows if background_bins[r][f] <= b]
        if f in known:
            if x_bins[f] > b:
                return visit(level + 1, leaf | (1 << level), right_rows)
            return visit(level + 1, leaf, left_rows)
        if rows:
            w_right = len(right_rows) / len(rows)
        else:
            w_right = 0.5
        return (1 - w_right) * visit(level + 1, leaf, left_rows) + w_right * visit(
            level + 1, leaf | (1 << level), right_rows
        )

    return visit(0, 0, list(range(len(background_bins))))


def shapley_by_enumeration(value, n_players):
    """Shapley values of a set function ``value(frozenset)`` over ``range(n_players)``."""
    phi = [0.0] * n_players
    players = list(range(n_players))
    for i in players:
        others = [p for p in players if p != i]
        for size in range(len(others) + 1):
            weight = math.factorial(size) * math.factorial(n_players - size - 1) / math.factorial(n_players)
            for subset in itertools.combinations(others, size):
                s = frozenset(subset)
                phi[i] += weight * (value(s | {i}) - value(s))
    return phi
