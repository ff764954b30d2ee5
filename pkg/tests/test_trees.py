import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exact_regression_tree_values
from roledet.trees import (
    AdaBoostConfig,
    ForestConfig,
    GbtConfig,
    compute_bin_edges,
    majority_vote,
    predict_adaboost,
    predict_forest,
    predict_gbt,
    samme_alpha,
    train_adaboost,
    train_forest,
    train_gbt,
)


def separable(n=90, seed=0):
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])
    y = np.repeat(np.arange(3), n // 3)
    X = centers[y] + rng.normal(scale=0.5, size=(n, 2))
    return X, y


class TestForest:
    def test_full_feature_scan_makes_identical_trees(self):
        X, y = separable()
        model = train_forest(X, y, ForestConfig(n_trees=4, features_per_split=2, seed=5))
        ref = model.trees[0].predict_value(X)
        for tree in model.trees[1:]:
            np.testing.assert_array_equal(tree.predict_value(X), ref)
        single = train_forest(X, y, ForestConfig(n_trees=1, features_per_split=2, seed=5))
        np.testing.assert_array_equal(predict_forest(model, X)[0], predict_forest(single, X)[0])

    def test_memorizes_separable_data(self):
        X, y = separable(seed=3)
        model = train_forest(X, y, ForestConfig(n_trees=7, seed=1))
        labels, _ = predict_forest(model, X)
        assert (labels == y).mean() == 1.0

    def test_vote_tie_breaks_low(self):
        votes = np.array([[0], [0], [1], [1], [2]])
        labels, shares = majority_vote(votes, 3)
        assert labels.tolist() == [0]
        np.testing.assert_allclose(shares[0], [0.4, 0.4, 0.2])

    def test_probabilities_are_vote_shares(self):
        X, y = separable(seed=2)
        model = train_forest(X, y, ForestConfig(n_trees=5, seed=2))
        _, probs = predict_forest(model, X)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)
        scaled = probs * 5
        np.testing.assert_allclose(scaled, np.round(scaled), atol=1e-12)

    def test_single_class_rejected(self):
        X = np.zeros((5, 2))
        with pytest.raises(ValueError, match="single class"):
            train_forest(X, np.zeros(5, dtype=int), ForestConfig(n_trees=1))

    def test_deterministic(self):
        X, y = separable(seed=4)
        a = train_forest(X, y, ForestConfig(n_trees=6, seed=9))
        b = train_forest(X, y, ForestConfig(n_trees=6, seed=9))
        np.testing.assert_array_equal(predict_forest(a, X)[1], predict_forest(b, X)[1])

    def test_bootstrap_changes_trees(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((60, 2))
        y = (X[:, 0] + rng.normal(scale=0.8, size=60) > 0).astype(int)
        queries = rng.uniform(-2, 2, size=(40, 2))
        off = train_forest(X, y, ForestConfig(n_trees=3, seed=0))
        on = train_forest(X, y, ForestConfig(n_trees=3, bootstrap=True, seed=0))
        assert not np.array_equal(predict_forest(off, queries)[1], predict_forest(on, queries)[1])


class TestAdaBoost:
    def test_alpha_formula(self):
        assert samme_alpha(0.5, 5) == pytest.approx(np.log(4))
        assert samme_alpha(0.25, 3) == pytest.approx(np.log(3) + np.log(2))

    def test_separable_by_one_stump(self):
        X = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0]])
        y = np.array([0, 0, 0, 1, 1, 1])
        model = train_adaboost(X, y, AdaBoostConfig(n_rounds=5))
        assert model.errors[0] == 0.0
        labels, _ = predict_adaboost(model, X)
        np.testing.assert_array_equal(labels, y)

    def test_weights_stay_distribution(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((40, 3))
        y = rng.integers(0, 3, 40)
        model = train_adaboost(X, y, AdaBoostConfig(n_rounds=8, record_weight_history=True))
        for w in model.weight_history:
            assert abs(w.sum() - 1.0) < 1e-9
            assert (w > 0).all()

    def test_recurrence_matches_independent_rederivation(self, data_dir):
        data = np.load(data_dir / "adaboost_fixture.npz")
        X, y = data["X"], data["y"]
        n_rounds = 10
        model = train_adaboost(
            X, y, AdaBoostConfig(n_rounds=n_rounds, record_weight_history=True)
        )
        assert len(model.stumps) == n_rounds
        K = model.n_classes
        w = np.full(len(y), 1.0 / len(y))
        for stump, alpha_m, err_m, w_m in zip(
            model.stumps, model.alphas, model.errors, model.weight_history
        ):
            pred = stump.predict_value(X).argmax(axis=1)
            miss = pred != y
            err = float(w[miss].sum())
            assert abs(err - err_m) < 1e-12
            clamped = min(max(err, 1e-10), 1 - 1e-10)
            alpha = np.log((1 - clamped) / clamped) + np.log(K - 1)
            assert abs(alpha - alpha_m) < 1e-9
            w = w * np.where(miss, np.exp(alpha), 1.0)
            w = w / w.sum()
            np.testing.assert_allclose(w, w_m, atol=1e-9)

    def test_chance_level_first_round_rejected(self):
        # constant features: the stump predicts one class, err = 2/3 >= 1 - 1/3
        X = np.ones((30, 2))
        y = np.repeat([0, 1, 2], 10)
        with pytest.raises(ValueError, match="chance"):
            train_adaboost(X, y, AdaBoostConfig(n_rounds=3))

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="single class"):
            train_adaboost(np.zeros((4, 1)), np.zeros(4, dtype=int), AdaBoostConfig())


class TestGbt:
    def test_origin_gradient_and_newton_leaf(self):
        # one depth-1 round at lr=1 from zero scores: leaf values must equal
        # -G/(H+reg) computed from p = 1/K by hand
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0, 0, 1, 1])
        reg = 1.0
        model = train_gbt(
            X, y, GbtConfig(n_rounds=1, max_depth=1, learning_rate=1.0, row_subsample=1.0, reg_lambda=reg)
        )
        K = 2
        p = 1.0 / K
        h_i = p * (1 - p)
        for c in range(K):
            tree = model.trees[0][c]
            assert tree.n_nodes == 3  # root split at the class boundary
            for side, rows in ((tree.left[0], [0, 1]), (tree.right[0], [2, 3])):
                G = sum(p - (1.0 if y[r] == c else 0.0) for r in rows)
                H = h_i * len(rows)
                assert tree.value[side, 0] == pytest.approx(-G / (H + reg), abs=1e-12)

    def test_constant_features_predict_priors(self):
        X = np.ones((200, 3))
        y = np.array([0] * 140 + [1] * 60)
        model = train_gbt(X, y, GbtConfig(n_rounds=60, row_subsample=1.0, seed=0))
        assert all(t.n_nodes == 1 for rnd in model.trees for t in rnd)
        _, probs = predict_gbt(model, X)
        np.testing.assert_allclose(probs[0], [0.7, 0.3], atol=1e-6)

    def test_histogram_split_matches_exact_oracle(self):
        rng = np.random.default_rng(31)
        levels = np.linspace(-2, 2, 40)
        X = levels[rng.integers(0, 40, size=(150, 3))]
        g = rng.standard_normal(150)
        h = rng.uniform(0.05, 1.0, 150)
        from roledet.trees import _grow_hist_tree, bin_features

        edges = compute_bin_edges(X, 256)
        binned = bin_features(X, edges)
        tree = _grow_hist_tree(binned, edges, g, h, np.arange(150), max_depth=3, reg=1.0)
        oracle = exact_regression_tree_values(X, g, h, max_depth=3, reg=1.0)
        np.testing.assert_allclose(tree.predict_value(X)[:, 0], oracle, atol=1e-12)

    def test_quantile_binning_when_many_distinct(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((2000, 1))
        edges = compute_bin_edges(X, 64)
        assert len(edges[0]) <= 63
        from roledet.trees import bin_features

        binned = bin_features(X, edges)
        assert binned.max() <= 63

    def test_training_loss_monotone_without_subsampling(self, data_dir):
        data = np.load(data_dir / "gbt_fixture.npz")
        model = train_gbt(
            data["X"], data["y"], GbtConfig(n_rounds=30, row_subsample=1.0, seed=1)
        )
        losses = np.array(model.train_loss)
        assert (np.diff(losses) <= 1e-12).all()

    def test_deterministic_with_subsampling(self, data_dir):
        data = np.load(data_dir / "gbt_fixture.npz")
        a = train_gbt(data["X"], data["y"], GbtConfig(n_rounds=5, seed=3))
        b = train_gbt(data["X"], data["y"], GbtConfig(n_rounds=5, seed=3))
        np.testing.assert_array_equal(
            predict_gbt(a, data["X"])[1], predict_gbt(b, data["X"])[1]
        )

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="single class"):
            train_gbt(np.zeros((4, 1)), np.zeros(4, dtype=int), GbtConfig())

    def test_probability_rows(self, data_dir):
        data = np.load(data_dir / "gbt_fixture.npz")
        model = train_gbt(data["X"], data["y"], GbtConfig(n_rounds=5, seed=2))
        _, probs = predict_gbt(model, data["X"])
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)


@given(st.integers(0, 2**31))
@settings(max_examples=15, deadline=None)
def test_forest_probability_rows_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((30, 3))
    y = rng.integers(0, 3, 30)
    if len(np.unique(y)) < 2:
        y[0] = (y[1] + 1) % 3
    model = train_forest(X, y, ForestConfig(n_trees=3, seed=seed))
    _, probs = predict_forest(model, X)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
