import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from regcompare.tree import TreeConfig, TreeError, best_split, tree_fit, tree_predict


def sse(v):
    v = np.asarray(v, dtype=float)
    return float(np.sum((v - v.mean()) ** 2)) if v.size else 0.0


def naive_root(X, y, min_leaf=1):
    """Best (child SSE, feature, threshold) by trying every midpoint directly."""
    best = (sse(y), None, None)
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        for lo, hi in zip(vals[:-1], vals[1:]):
            t = 0.5 * (lo + hi)
            left = X[:, f] <= t
            if left.sum() < min_leaf or (~left).sum() < min_leaf:
                continue
            total = sse(y[left]) + sse(y[~left])
            if total < best[0] - 1e-12 * max(sse(y), 1e-300):
                best = (total, f, t)
    return best


def naive_greedy_sse(X, y, depth):
    """Training SSE of the greedy tree grown by naive enumeration."""
    if depth == 0 or y.size < 2 or np.ptp(y) == 0:
        return sse(y)
    total, f, t = naive_root(X, y)
    if f is None:
        return sse(y)
    left = X[:, f] <= t
    return naive_greedy_sse(X[left], y[left], depth - 1) + naive_greedy_sse(X[~left], y[~left], depth - 1)


STEP_X = np.array([[1.0], [2.0], [3.0], [4.0]])
STEP_Y = np.array([0.0, 0.0, 10.0, 10.0])


class TestStep:
    def test_single_split(self):
        t = tree_fit(STEP_X, STEP_Y)
        assert t.depth == 1 and t.leaf_count == 2
        assert t.threshold[0] == 2.5
        assert sorted(t.value[t.is_leaf]) == [0.0, 10.0]
        assert t.training_sse == 0.0

    def test_routing(self):
        t = tree_fit(STEP_X, STEP_Y)
        assert tree_predict(t, [2.0]) == 0.0
        assert tree_predict(t, [3.0]) == 10.0
        assert tree_predict(t, [2.4]) == 0.0
        assert tree_predict(t, [2.5]) == 0.0

    def test_constant_target(self):
        t = tree_fit(STEP_X, np.full(4, 7.5))
        assert t.depth == 0 and t.leaf_count == 1
        assert tree_predict(t, [100.0]) == 7.5

    def test_prediction_errors(self):
        t = tree_fit(STEP_X, STEP_Y)
        with pytest.raises(TreeError):
            tree_predict(t, [1.0, 2.0])
        with pytest.raises(TreeError):
            tree_predict(t, [np.nan])

    def test_empty(self):
        with pytest.raises(TreeError):
            tree_fit(np.empty((0, 1)), np.empty(0))

    def test_serialization(self):
        d = json.loads(json.dumps(tree_fit(STEP_X, STEP_Y, feature_names=["a"]).to_dict()))
        assert d["feature_name"] == "a" and d["threshold"] == 2.5
        assert d["left"] == {"value": 0.0, "count": 2, "sse": 0.0}


class TestGreedyOptimality:
    def test_eight_points_depth_two(self):
        rng = np.random.default_rng(8)
        X = rng.uniform(0, 1, (8, 2))
        y = rng.standard_normal(8)
        t = tree_fit(X, y, TreeConfig(max_depth=2))
        assert t.depth <= 2
        assert t.training_sse == pytest.approx(naive_greedy_sse(X, y, 2), rel=1e-12, abs=1e-14)

    @given(st.integers(0, 100_000), st.integers(2, 64), st.integers(1, 3))
    def test_root_matches_enumeration(self, seed, n, p):
        rng = np.random.default_rng(seed)
        X = np.round(rng.uniform(0, 5, (n, p)), 1)
        y = rng.standard_normal(n)
        t = tree_fit(X, y, TreeConfig(max_depth=1))
        total, f, thr = naive_root(X, y)
        if f is None:
            assert t.leaf_count == 1
            return
        assert t.training_sse == pytest.approx(total, rel=1e-9, abs=1e-12)
        assert t.training_sse <= total + 1e-9 * sse(y)

    def test_tie_break_lowest_feature_then_threshold(self):
        X = np.column_stack([np.arange(4.0), np.arange(4.0)])
        y = np.array([0.0, 1.0, 0.0, 1.0])
        s = best_split(X, y - 0, [0, 1])
        assert s.feature == 0
        # every cut on one feature is equally good here; smallest threshold wins
        X2 = np.array([[0.0], [1.0], [2.0], [3.0]])
        y2 = np.array([0.0, 1.0, 1.0, 0.0])
        s2 = best_split(X2, y2, [0])
        assert s2.threshold == 0.5


class TestStructure:
    @given(st.integers(0, 10_000), st.integers(1, 6), st.sampled_from([None, 1, 2, 4]))
    def test_bounds_and_monotone_sse(self, seed, leaf, depth):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((40, 2))
        y = X[:, 0] + rng.standard_normal(40)
        t = tree_fit(X, y, TreeConfig(max_depth=depth, min_samples_leaf=leaf))
        if depth is not None:
            assert t.depth <= depth
        assert t.count[t.is_leaf].min() >= leaf
        internal = np.flatnonzero(~t.is_leaf)
        for i in internal:
            assert t.sse[t.left[i]] + t.sse[t.right[i]] < t.sse[i]
        assert t.count[t.is_leaf].sum() == 40

    def test_leaf_values_are_means(self, rng):
        X = rng.standard_normal((50, 2))
        y = rng.standard_normal(50)
        t = tree_fit(X, y, TreeConfig(max_depth=3))
        leaves = t.leaf_index(X)
        for leaf in np.unique(leaves):
            assert t.value[leaf] == pytest.approx(y[leaves == leaf].mean())

    def test_min_samples_split(self, rng):
        X = rng.standard_normal((30, 1))
        t = tree_fit(X, rng.standard_normal(30), TreeConfig(min_samples_split=12))
        assert np.all(t.count[~t.is_leaf] >= 12)

    def test_perfect_fit_unrestricted(self, rng):
        X = np.column_stack([rng.permutation(60).astype(float), rng.standard_normal(60)])
        y = rng.standard_normal(60)
        t = tree_fit(X, y)
        np.testing.assert_array_equal(t.predict(X), y)
        assert t.training_sse == 0.0

    def test_deterministic(self, rng):
        X = rng.standard_normal((40, 3))
        y = rng.standard_normal(40)
        a = tree_fit(X, y, TreeConfig(seed=3), feature_subset_size=1)
        b = tree_fit(X, y, TreeConfig(seed=3), feature_subset_size=1)
        assert a.same_structure(b)
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())

    def test_unused_feature_monotone_invariance(self, rng):
        X = rng.standard_normal((40, 2))
        y = 3 * (X[:, 0] > 0) + 0.01 * rng.standard_normal(40)
        t = tree_fit(X, y, TreeConfig(max_depth=1))
        assert t.feature[0] == 0
        probe = rng.standard_normal((20, 2))
        warped = probe.copy()
        warped[:, 1] = np.exp(3 * warped[:, 1])
        np.testing.assert_array_equal(t.predict(probe), t.predict(warped))

    def test_bad_config(self):
        with pytest.raises(TreeError):
            TreeConfig(min_samples_split=1)
        with pytest.raises(TreeError):
            TreeConfig(min_samples_leaf=0)
        with pytest.raises(TreeError):
            TreeConfig(max_depth=-1)
