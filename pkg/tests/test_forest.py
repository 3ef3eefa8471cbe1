import numpy as np
import pytest

from regcompare.dataset import generate_synthetic
from regcompare.forest import (ForestConfig, ForestError, RandomForest, feature_importance,
                               forest_fit, forest_predict, oob_predictions, oob_score,
                               resolve_feature_subset)
from regcompare.metrics import r2_score
from regcompare.tree import tree_fit


def problem(seed, n=100, p=3):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = 2 * X[:, 0] + 0.1 * rng.standard_normal(n)
    return X, y


class TestConfig:
    @pytest.mark.parametrize("rule,p,m", [("sqrt", 3, 1), ("sqrt", 4, 2), ("sqrt", 1, 1),
                                          ("all", 3, 3), (2, 3, 2)])
    def test_subset_rule(self, rule, p, m):
        assert resolve_feature_subset(rule, p) == m

    def test_bad_subset(self):
        with pytest.raises(ForestError):
            resolve_feature_subset(4, 3)
        with pytest.raises(ForestError):
            ForestConfig(feature_subset="half")
        with pytest.raises(ForestError):
            ForestConfig(n_trees=0)


class TestFit:
    def test_no_bootstrap_all_features_is_cart(self):
        X, y = problem(0)
        f = forest_fit(X, y, ForestConfig(n_trees=5, feature_subset="all", bootstrap=False))
        single = tree_fit(X, y)
        assert all(t.same_structure(single) for t in f.trees)
        probe = np.random.default_rng(1).standard_normal((10, 3))
        # averaging identical trees can move the last bit
        np.testing.assert_allclose(f.predict(probe), single.predict(probe), rtol=1e-14)

    def test_single_tree_equals_tree_predict(self):
        X, y = problem(2)
        f = forest_fit(X, y, ForestConfig(n_trees=1, feature_subset="all", bootstrap=False))
        t = tree_fit(X, y)
        for x in X[:10]:
            assert forest_predict(f, x) == t.predict(x)[0]

    def test_deterministic(self):
        X, y = problem(1)
        cfg = ForestConfig(n_trees=20, seed=5)
        assert forest_fit(X, y, cfg).to_json() == forest_fit(X, y, cfg).to_json()

    def test_thread_count_invariant(self):
        X, y = problem(3)
        cfg = ForestConfig(n_trees=40, seed=11)
        a = forest_fit(X, y, cfg, n_jobs=1)
        b = forest_fit(X, y, cfg, n_jobs=8)
        assert a.to_json() == b.to_json()
        np.testing.assert_array_equal(a.in_bag_counts, b.in_bag_counts)

    def test_adding_trees_keeps_existing(self):
        X, y = problem(4)
        small = forest_fit(X, y, ForestConfig(n_trees=5, seed=2))
        big = forest_fit(X, y, ForestConfig(n_trees=10, seed=2))
        assert all(a.same_structure(b) for a, b in zip(small.trees, big.trees))

    def test_bootstrap_multiset_size(self):
        X, y = problem(5)
        f = forest_fit(X, y, ForestConfig(n_trees=10))
        assert len(f.trees) == 10
        assert np.all(f.in_bag_counts.sum(axis=1) == 100)

    def test_oob_fraction(self):
        X, y = problem(6)
        f = forest_fit(X, y, ForestConfig(n_trees=100))
        frac = np.mean([len(m) / 100 for m in f.oob_membership])
        assert 0.33 <= frac <= 0.41

    def test_errors(self):
        with pytest.raises(ForestError):
            forest_fit(np.empty((0, 2)), np.empty(0))
        with pytest.raises(ForestError):
            forest_fit(np.ones((1, 2)), np.ones(1))
        f = forest_fit(*problem(0), ForestConfig(n_trees=2))
        with pytest.raises(ForestError):
            f.predict(np.ones((1, 2)))


class TestPredict:
    def test_mean_of_two_trees(self):
        X = np.array([[0.0], [1.0]])
        t0 = tree_fit(X, np.array([0.0, 0.0]))
        t1 = tree_fit(X, np.array([10.0, 10.0]))
        f = RandomForest([t0, t1], np.ones((2, 2), dtype=int), ForestConfig(n_trees=2), ["x"], 2)
        assert forest_predict(f, [0.5]) == 5.0

    def test_within_training_range(self):
        X, y = problem(7)
        f = forest_fit(X, y, ForestConfig(n_trees=30))
        probe = np.random.default_rng(0).uniform(-10, 10, (500, 3))
        pred = f.predict(probe)
        assert pred.min() >= y.min() and pred.max() <= y.max()


class TestOob:
    def test_requires_bootstrap(self):
        X, y = problem(0)
        f = forest_fit(X, y, ForestConfig(n_trees=3, bootstrap=False))
        with pytest.raises(ForestError, match="OOB undefined"):
            oob_score(f, X, y)

    def test_single_tree_coverage(self):
        X, y = problem(1)
        f = forest_fit(X, y, ForestConfig(n_trees=1))
        rep = oob_score(f, X, y)
        assert rep.covered_rows == len(f.oob_membership[0])

    def test_membership_audit(self):
        X, y = problem(2, n=40)
        f = forest_fit(X, y, ForestConfig(n_trees=15, seed=9))
        pred, hits = oob_predictions(f, X)
        for i in range(40):
            used = [t for t, c in zip(f.trees, f.in_bag_counts) if c[i] == 0]
            assert hits[i] == len(used)
            if used:
                assert pred[i] == pytest.approx(np.mean([t.predict(X[i])[0] for t in used]))
            else:
                assert np.isnan(pred[i])

    def test_step_signal(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(0, 1, (200, 2))
        y = np.where(X[:, 0] > 0.5, 10.0, 0.0)
        f = forest_fit(X, y, ForestConfig(n_trees=50, feature_subset="all"))
        assert oob_score(f, X, y).oob_r2 >= 0.9

    def test_agrees_with_holdout(self):
        ds = generate_synthetic(124, 3)
        X = ds.matrix(["d99", "d98", "d97"])
        y = ds.column("d80")
        idx = np.random.default_rng(0).permutation(124)
        tr, te = idx[:100], idx[100:]
        f = forest_fit(X[tr], y[tr], ForestConfig(n_trees=100, feature_subset="all", seed=3))
        oob = oob_score(f, X[tr], y[tr]).oob_r2
        hold = r2_score(y[te], f.predict(X[te]))
        assert abs(oob - hold) <= 0.1


class TestImportance:
    def test_sums_to_one(self):
        X, y = problem(0)
        imp = feature_importance(forest_fit(X, y, ForestConfig(n_trees=20)))
        assert imp.importance.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(imp.importance >= 0)

    def test_signal_feature_dominates(self):
        X, y = problem(1, n=200)
        f = forest_fit(X, y, ForestConfig(n_trees=50, feature_subset="all"))
        imp = feature_importance(f)
        assert imp.importance[0] > 0.8
        # oracle: permuting x1 destroys the fit, permuting the others does not
        rng = np.random.default_rng(0)
        base = r2_score(y, f.predict(X))
        drops = []
        for j in range(3):
            Xp = X.copy()
            Xp[:, j] = rng.permutation(Xp[:, j])
            drops.append(base - r2_score(y, f.predict(Xp)))
        assert drops[0] > 1.0 and max(drops[1:]) < 0.05

    def test_single_split(self):
        X = np.column_stack([np.arange(10.0), np.zeros(10), np.ones(10)])
        y = (X[:, 0] > 4).astype(float)
        f = forest_fit(X, y, ForestConfig(n_trees=1, feature_subset="all", bootstrap=False))
        assert feature_importance(f).to_dict() == {"x1": 1.0, "x2": 0.0, "x3": 0.0}

    def test_no_splits_uniform(self):
        X = np.arange(10.0).reshape(-1, 2)
        f = forest_fit(X, np.ones(5), ForestConfig(n_trees=3))
        with pytest.warns(RuntimeWarning, match="uniform"):
            imp = feature_importance(f)
        np.testing.assert_allclose(imp.importance, [0.5, 0.5])

    def test_synthetic_ordering(self):
        names = ["d99", "d98", "d97"]
        table = []
        for seed in range(20):
            ds = generate_synthetic(124, seed)
            f = forest_fit(ds.matrix(names), ds.column("d80"),
                           ForestConfig(n_trees=100, feature_subset="all", seed=seed),
                           feature_names=names)
            table.append(feature_importance(f).importance)
        table = np.array(table)
        # d97 leads in every seed; d98 over d99 is the noisier call
        assert np.all(table[:, 2] > table[:, :2].max(axis=1))
        mean = table.mean(axis=0)
        assert mean[2] > mean[1] > mean[0]
        assert np.sum((table[:, 2] > table[:, 1]) & (table[:, 1] > table[:, 0])) >= 15
