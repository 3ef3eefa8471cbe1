"""CART regression trees grown by greedy SSE-minimizing binary splits."""

import math
from dataclasses import dataclass, asdict

import numpy as np

from .seeding import STREAM_TREE, child_rng

LEAF = -1


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise TreeError("max_depth must be nonnegative or None")
        if self.min_samples_split < 2:
            raise TreeError("min_samples_split must be at least 2")
        if self.min_samples_leaf < 1:
            raise TreeError("min_samples_leaf must be at least 1")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    gain: float


def best_split(X, y, features, min_samples_leaf=1):
    """Best (feature, threshold) for one node, or None if no split lowers SSE.

    Thresholds are midpoints between consecutive distinct values. Ties keep
    the earliest feature in ``features`` and then the smallest threshold.
    """
    m = y.size
    yc = y - y.mean()
    node_sse = float(yc @ yc)
    tol = 1e-12 * node_sse
    best = None
    best_gain = 0.0
    for f in features:
        xs = X[:, f]
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        csum = np.cumsum(yc[order])[:-1]
        nl = np.arange(1, m)
        nr = m - nl
        valid = (xs[:-1] < xs[1:]) & (nl >= min_samples_leaf) & (nr >= min_samples_leaf)
        if not valid.any():
            continue
        # child SSE = node SSE - gain, because the centered sums cancel
        gain = np.where(valid, csum * csum * m / (nl * nr), -np.inf)
        top = gain.max()
        i = int(np.flatnonzero(gain >= top - tol)[0])
        if gain[i] > best_gain + tol:
            best_gain = float(gain[i])
            lo, hi = xs[i], xs[i + 1]
            thr = 0.5 * (lo + hi)
            if not lo <= thr < hi:
                thr = lo
            best = Split(int(f), float(thr), best_gain)
    return best


class RegressionTree:
    """A fitted tree stored as flat node arrays (node 0 is the root)."""

    def __init__(self, feature, threshold, left, right, value, count, sse, depth,
                 n_features, feature_names=None, config=None):
        self.feature = np.asarray(feature, dtype=int)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=int)
        self.right = np.asarray(right, dtype=int)
        self.value = np.asarray(value, dtype=float)
        self.count = np.asarray(count, dtype=int)
        self.sse = np.asarray(sse, dtype=float)
        self.node_depth = np.asarray(depth, dtype=int)
        self.n_features = n_features
        self.feature_names = list(feature_names) if feature_names is not None else [
            f"x{j + 1}" for j in range(n_features)]
        self.config = config or TreeConfig()
        for arr in (self.feature, self.threshold, self.left, self.right,
                    self.value, self.count, self.sse, self.node_depth):
            arr.flags.writeable = False

    @property
    def is_leaf(self):
        return self.feature == LEAF

    @property
    def depth(self):
        return int(self.node_depth.max())

    @property
    def leaf_count(self):
        return int(np.count_nonzero(self.is_leaf))

    @property
    def node_count(self):
        return self.feature.size

    @property
    def training_sse(self):
        return float(self.sse[self.is_leaf].sum())

    def leaf_index(self, X):
        X = _check_X(X, self.n_features)
        node = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        active = ~self.is_leaf[node]
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active[r] = ~self.is_leaf[node[r]]
        return node

    def predict(self, X):
        return self.value[self.leaf_index(X)]

    def impurity_decrease(self):
        """Per-feature total SSE decrease over the tree's splits (unnormalized)."""
        out = np.zeros(self.n_features)
        for i in np.flatnonzero(~self.is_leaf):
            out[self.feature[i]] += self.sse[i] - self.sse[self.left[i]] - self.sse[self.right[i]]
        return out

    def to_dict(self, node=0):
        if self.feature[node] == LEAF:
            return {"value": float(self.value[node]), "count": int(self.count[node]),
                    "sse": float(self.sse[node])}
        f = int(self.feature[node])
        return {"feature": f, "feature_name": self.feature_names[f],
                "threshold": float(self.threshold[node]),
                "count": int(self.count[node]), "sse": float(self.sse[node]),
                "left": self.to_dict(int(self.left[node])),
                "right": self.to_dict(int(self.right[node]))}

    @property
    def root(self):
        return self.to_dict()

    def same_structure(self, other):
        return (np.array_equal(self.feature, other.feature)
                and np.array_equal(self.threshold, other.threshold, equal_nan=True)
                and np.array_equal(self.left, other.left)
                and np.array_equal(self.right, other.right)
                and np.array_equal(self.value, other.value)
                and np.array_equal(self.count, other.count))


def _check_X(X, n_features):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise TreeError(f"expected {n_features} feature(s), got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise TreeError("features must be finite")
    return X


def _subset(rng, X_node, n_features, size):
    """Draw up to ``size`` features (in random order) that vary within the node."""
    picked = []
    for f in rng.permutation(n_features):
        xs = X_node[:, f]
        if xs.min() < xs.max():
            picked.append(int(f))
            if len(picked) == size:
                break
    return sorted(picked)


def tree_fit(X, y, cfg=None, feature_subset_size=None, feature_names=None, rng=None):
    """Grow a regression tree.

    Parameters
    ----------
    X : array-like, shape (n, p)
    y : array-like, shape (n,)
    cfg : TreeConfig
    feature_subset_size : int, optional
        Number of features examined at each node, drawn at random among
        those not constant in the node. ``None`` examines all of them.
    rng : numpy.random.Generator, optional
        Source for feature subsetting; derived from ``cfg.seed`` if omitted.
    """
    cfg = cfg or TreeConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if y.size == 0 or X.shape[0] == 0:
        raise TreeError("cannot fit a tree on empty data")
    if X.shape[0] != y.size:
        raise TreeError(f"X has {X.shape[0]} rows but y has {y.size}")
    p = X.shape[1]
    if p < 1:
        raise TreeError("need at least one feature")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise TreeError("training data must be finite")
    subset = None
    if feature_subset_size is not None and feature_subset_size < p:
        if feature_subset_size < 1:
            raise TreeError("feature_subset_size must be at least 1")
        subset = int(feature_subset_size)
        if rng is None:
            rng = child_rng(cfg.seed, STREAM_TREE)
    all_features = list(range(p))

    feature, threshold, left, right, value, count, sse, depth = ([] for _ in range(8))

    def new_node(idx, d):
        yn = y[idx]
        mean = float(yn.mean())
        feature.append(LEAF)
        threshold.append(math.nan)
        left.append(LEAF)
        right.append(LEAF)
        value.append(mean)
        count.append(idx.size)
        sse.append(float(np.sum((yn - mean) ** 2)))
        depth.append(d)
        return len(feature) - 1

    root = new_node(np.arange(y.size), 0)
    stack = [(root, np.arange(y.size))]
    while stack:
        node, idx = stack.pop()
        d = depth[node]
        if cfg.max_depth is not None and d >= cfg.max_depth:
            continue
        if idx.size < cfg.min_samples_split or idx.size < 2 * cfg.min_samples_leaf:
            continue
        yn = y[idx]
        if yn.min() == yn.max():
            continue
        Xn = X[idx]
        feats = all_features if subset is None else _subset(rng, Xn, p, subset)
        split = best_split(Xn, yn, feats, cfg.min_samples_leaf)
        if split is None:
            continue
        go_left = Xn[:, split.feature] <= split.threshold
        li, ri = idx[go_left], idx[~go_left]
        lnode = new_node(li, d + 1)
        rnode = new_node(ri, d + 1)
        feature[node] = split.feature
        threshold[node] = split.threshold
        left[node] = lnode
        right[node] = rnode
        # right pushed first so the left subtree is expanded first
        stack.append((rnode, ri))
        stack.append((lnode, li))
    return RegressionTree(feature, threshold, left, right, value, count, sse, depth,
                          p, feature_names, cfg)


def tree_predict(tree, x):
    """Prediction for a single feature vector."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != tree.n_features:
        raise TreeError(f"expected {tree.n_features} feature(s), got {x.size}")
    return float(tree.predict(x.reshape(1, -1))[0])
