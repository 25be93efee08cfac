import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ckdpipe.errors import ConfigError, SchemaError
from ckdpipe.resample import (
    SmoteConfig,
    SplitConfig,
    smote,
    smote_with_parents,
    split_indices,
    stratified_folds,
    stratified_split,
)


def uci_like_labels(seed=0):
    return np.random.default_rng(seed).permutation(np.r_[np.zeros(250, int), np.ones(150, int)])


def test_eighty_twenty_composition():
    y = uci_like_labels()
    s = stratified_split(np.arange(400.0)[:, None], y, SplitConfig(0.2, seed=5))
    assert s.y_test.size == 80 and s.y_train.size == 320
    assert (s.y_test == 0).sum() == 50 and (s.y_test == 1).sum() == 30


def test_split_is_partition():
    y = uci_like_labels(1)
    tr, te = split_indices(y, SplitConfig(0.3, seed=2))
    assert np.intersect1d(tr, te).size == 0
    assert np.array_equal(np.sort(np.r_[tr, te]), np.arange(400))


def test_split_same_seed_same_partition():
    y = uci_like_labels(2)
    a = split_indices(y, SplitConfig(0.2, seed=9))
    b = split_indices(y, SplitConfig(0.2, seed=9))
    assert all(np.array_equal(u, v) for u, v in zip(a, b))


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1])
def test_fraction_outside_open_interval(fraction):
    with pytest.raises(ConfigError):
        SplitConfig(fraction)


def test_fraction_leaving_empty_test_side():
    with pytest.raises(ConfigError):
        split_indices(np.r_[np.zeros(3, int), np.ones(20, int)], SplitConfig(0.1))


def test_tiny_class_rejected():
    with pytest.raises(SchemaError):
        split_indices(np.r_[0, np.ones(10, int)], SplitConfig(0.2))


def test_folds_partition_and_balance():
    y = np.r_[np.zeros(60, int), np.ones(40, int)]
    folds = stratified_folds(y, 5, seed=3)
    assert set(folds.tolist()) == set(range(5))
    for f in range(5):
        assert (y[folds == f] == 0).sum() == 12 and (y[folds == f] == 1).sum() == 8


def test_folds_class_smaller_than_k():
    with pytest.raises(SchemaError):
        stratified_folds(np.r_[np.zeros(3, int), np.ones(10, int)], 5, seed=0)


def test_smote_class_at_target_unchanged():
    X = np.arange(10.0).reshape(5, 2)
    y = np.array([0, 0, 0, 1, 1])
    Xo, yo, parents = smote_with_parents(X, y, SmoteConfig(target_per_class=3, k_neighbors=1))
    assert (yo == 0).sum() == 3 and (yo == 1).sum() == 3
    assert parents.shape == (1, 2) and set(parents[0]) == {3, 4}


def test_smote_segment_geometry():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [5.0, 5.0], [6.0, 7.0]])
    y = np.array([0, 0, 1, 1])
    Xo, yo = smote(X, y, SmoteConfig(target_per_class=3, k_neighbors=1, seed=4))
    t = Xo[4]
    assert yo[4] == 0 and t[0] == t[1] and 0.0 <= t[0] <= 1.0


def test_smote_errors():
    X = np.zeros((4, 1))
    y = np.array([0, 0, 1, 1])
    with pytest.raises(ConfigError):
        smote(X, y, SmoteConfig(target_per_class=1))
    with pytest.raises(ConfigError):
        smote(X, y, SmoteConfig(target_per_class=5, k_neighbors=2))


@settings(max_examples=25, deadline=None)
@given(st.integers(6, 40), st.integers(6, 40), st.integers(0, 2**32 - 1))
def test_smote_structure(n0, n1, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n0 + n1, 3))
    y = np.r_[np.zeros(n0, int), np.ones(n1, int)]
    target = max(n0, n1) + 7
    Xo, yo, parents = smote_with_parents(X, y, SmoteConfig(target, k_neighbors=5, seed=seed))
    assert (yo == 0).sum() == target and (yo == 1).sum() == target
    assert np.array_equal(Xo[: X.shape[0]], X)
    synth = Xo[X.shape[0]:]
    a, b = X[parents[:, 0]], X[parents[:, 1]]
    assert np.all(synth >= np.minimum(a, b) - 1e-12) and np.all(synth <= np.maximum(a, b) + 1e-12)
    assert np.all(y[parents[:, 0]] == y[parents[:, 1]])
    assert np.array_equal(yo[X.shape[0]:], y[parents[:, 0]])
