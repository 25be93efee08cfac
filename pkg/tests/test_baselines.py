import numpy as np
import pytest
from oracles import best_gini_split, central_difference, max_relative_error

from ckdpipe.baselines import (
    DecisionTree,
    Forest,
    LinearModel,
    MlpModel,
    gini_best_split,
    hard_labels,
    init_mlp,
    log_loss,
    logreg_loss_and_grad,
    mlp_loss_and_grads,
    predict_proba,
    train_forest,
    train_logreg,
    train_mlp,
)
from ckdpipe.errors import ConfigError, DimensionError, TrainingError
from ckdpipe.seeds import make_rng

X3 = np.array([[0.5, -1.2, 2.0], [1.5, 0.3, -0.7], [-0.4, 0.9, 0.1]])
Y3 = np.array([1.0, 0.0, 1.0])


def separable(n=40, seed=0, margin=0.5):
    """Two Gaussian features labeled by the sign of their sum, with a gap around the boundary."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(4 * n, 2))
    X = X[np.abs(X.sum(axis=1)) > margin][:n]
    return X, (X[:, 0] + X[:, 1] > 0).astype(float)


class TestLogreg:
    def test_gradient_matches_finite_differences(self):
        w, b, l2 = np.array([0.3, -0.2, 0.5]), 0.1, 0.05
        _, gw, gb = logreg_loss_and_grad(w, b, X3, Y3, l2)
        num_w = central_difference(lambda v: logreg_loss_and_grad(v, b, X3, Y3, l2)[0], w)
        num_b = central_difference(lambda v: logreg_loss_and_grad(w, v[0], X3, Y3, l2)[0], [b])
        assert max_relative_error(np.r_[gw, gb], np.r_[num_w, num_b]) <= 1e-5

    def test_separable_fits_perfectly(self):
        X, y = separable()
        m = train_logreg(X, y, l2=0.01, lr=0.5, epochs=500)
        assert np.mean(hard_labels(m.predict_proba(X)) == y) == 1.0

    def test_huge_penalty_shrinks_weights(self):
        X, y = separable()
        m = train_logreg(X, y, l2=1e6, lr=1e-7, epochs=50)
        assert np.linalg.norm(m.weights) <= 1e-3

    def test_loss_non_increasing_at_small_lr(self):
        X, y = separable(60, 3)
        h = train_logreg(X, y, l2=0.01, lr=0.01, epochs=200).loss_history
        assert all(a >= b - 1e-15 for a, b in zip(h, h[1:]))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reports_epoch(self):
        X = np.array([[1e200], [-1e200]])
        with pytest.raises(TrainingError, match="epoch"):
            train_logreg(X, np.array([1.0, 0.0]), lr=1e10, epochs=5)

    def test_zero_model_predicts_half(self):
        m = LinearModel(np.zeros(3), 0.0, 0.0)
        assert np.all(predict_proba(m, X3) == 0.5)

    def test_dimension_mismatch(self):
        m = LinearModel(np.zeros(3), 0.0, 0.0)
        with pytest.raises(DimensionError, match="3 features, got 2"):
            m.predict_proba(np.zeros((2, 2)))


class TestMlp:
    def test_gradients_match_finite_differences(self):
        model = init_mlp(3, 4, np.random.default_rng(1))
        model.b1 = np.array([0.1, -0.05, 0.2, 0.3])
        model.b2 = -0.2
        l2 = 0.01
        _, g = mlp_loss_and_grads(model, X3, Y3, l2)

        def loss_with(name):
            def f(v):
                params = {"W1": model.W1, "b1": model.b1, "w2": model.w2, "b2": model.b2}
                params[name] = v if name != "b2" else float(v[0])
                return mlp_loss_and_grads(MlpModel(**params), X3, Y3, l2)[0]

            return f

        worst = 0.0
        for name in ("W1", "b1", "w2"):
            worst = max(worst, max_relative_error(g[name], central_difference(loss_with(name), getattr(model, name))))
        worst = max(worst, max_relative_error([g["b2"]], central_difference(loss_with("b2"), [model.b2])))
        assert worst <= 1e-4

    def test_xor_learned_for_most_seeds(self):
        # standardized XOR corners
        X = np.array([[-1, -1], [-1, 1], [1, -1], [1, 1.0]])
        y = np.array([0, 1, 1, 0.0])
        solved = 0
        for seed in range(10):
            m = train_mlp(X, y, hidden=4, lr=0.1, epochs=2000, l2=0.0, seed=seed, batch_size=4)
            solved += np.mean(hard_labels(m.predict_proba(X)) == y) == 1.0
        assert solved >= 8

    def test_zero_epochs_is_initial_network(self):
        m = train_mlp(X3, Y3, hidden=5, epochs=0, seed=3)
        ref = init_mlp(3, 5, make_rng(3, "mlp-init"))
        assert np.array_equal(m.W1, ref.W1) and np.array_equal(m.w2, ref.w2)

    def test_zero_output_weights(self):
        m = MlpModel(np.ones((3, 2)), np.zeros(2), np.zeros(2), 0.7)
        assert np.allclose(m.predict_proba(X3), 1 / (1 + np.exp(-0.7)))

    def test_seeded_training_reproduces(self):
        X, y = separable()
        a = train_mlp(X, y, hidden=6, epochs=5, seed=11)
        b = train_mlp(X, y, hidden=6, epochs=5, seed=11)
        assert a.W1.tobytes() == b.W1.tobytes()


class TestForest:
    def test_stump_matches_exhaustive_gini(self):
        rng = np.random.default_rng(4)
        X = rng.integers(0, 6, size=(40, 4)).astype(float)
        y = ((X[:, 2] > 2) ^ (rng.random(40) < 0.15)).astype(float)
        f, thr, _ = gini_best_split(X, y, np.arange(4))
        of, othr, _ = best_gini_split(X, y)
        assert (f, thr) == (of, othr)
        forest = train_forest(X, y, n_trees=1, max_depth=1, max_features=4, bootstrap=False)
        tree = forest.trees[0]
        assert (tree.feature[0], tree.threshold[0]) == (of, othr)

    def test_pure_data_single_leaf(self):
        X = np.random.default_rng(0).normal(size=(20, 3))
        forest = train_forest(X, np.ones(20), n_trees=5, seed=1)
        assert all(t.feature.tolist() == [-1] for t in forest.trees)
        assert np.all(forest.predict_proba(X) == 1.0)

    def test_leaf_forest_predicts_one(self):
        leaf = DecisionTree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array([1.0]))
        assert np.all(Forest([leaf], 3).predict_proba(X3) == 1.0)

    @pytest.mark.parametrize("kw", [{"max_depth": 0}, {"min_leaf": 100}, {"n_trees": 0}])
    def test_degenerate_hyper(self, kw):
        X, y = separable()
        with pytest.raises(ConfigError):
            train_forest(X, y, **kw)

    def test_more_trees_lower_holdout_loss(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(400, 5))
        y = (X[:, 0] - X[:, 1] + rng.normal(scale=1.0, size=400) > 0).astype(float)
        tr, te = slice(0, 300), slice(300, 400)
        eps = 1e-6

        def holdout_loss(n):
            p = np.clip(train_forest(X[tr], y[tr], n_trees=n, seed=2).predict_proba(X[te]), eps, 1 - eps)
            return log_loss(y[te], np.log(p / (1 - p)))

        assert holdout_loss(100) <= holdout_loss(1)

    def test_tree_order_invariance(self):
        X, y = separable(80, 5)
        forest = train_forest(X, y, n_trees=15, seed=3)
        shuffled = Forest(forest.trees[::-1], forest.n_features)
        assert forest.predict_proba(X).tobytes() == shuffled.predict_proba(X).tobytes()

    def test_parallel_matches_sequential(self):
        X, y = separable(80, 6)
        a = train_forest(X, y, n_trees=12, seed=9, n_jobs=1).predict_proba(X)
        b = train_forest(X, y, n_trees=12, seed=9, n_jobs=4).predict_proba(X)
        assert a.tobytes() == b.tobytes()

    def test_probabilities_in_unit_interval(self):
        X, y = separable(80, 8)
        p = train_forest(X, y, n_trees=10, seed=0).predict_proba(X)
        assert np.all((p >= 0) & (p <= 1))


def test_threshold_half_maps_to_label_one():
    assert hard_labels([0.5, 0.4999, 0.9]).tolist() == [1, 0, 1]
