"""Random-forest regression: bagged CART trees with per-node feature subsets."""

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .seeding import STREAM_FOREST, child_rng
from .tree import TreeConfig, TreeError, tree_fit


class ForestError(ValueError):
    pass


def resolve_feature_subset(rule, n_features):
    """Number of features examined per node for ``rule`` in {"sqrt", "all", int}."""
    if rule == "sqrt":
        return max(1, int(math.isqrt(n_features)))
    if rule == "all" or rule is None:
        return n_features
    m = int(rule)
    if not 1 <= m <= n_features:
        raise ForestError(f"feature subset {m} outside [1, {n_features}]")
    return m


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    feature_subset: object = "sqrt"
    tree_cfg: TreeConfig = field(default_factory=TreeConfig)
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ForestError("n_trees must be at least 1")
        if not (self.feature_subset in ("sqrt", "all")
                or (isinstance(self.feature_subset, (int, np.integer))
                    and not isinstance(self.feature_subset, bool))):
            raise ForestError(f"unknown feature_subset rule {self.feature_subset!r}")

    def to_dict(self):
        fs = self.feature_subset
        return {"n_trees": self.n_trees, "feature_subset": fs if isinstance(fs, str) else int(fs),
                "tree_cfg": self.tree_cfg.to_dict(), "bootstrap": self.bootstrap,
                "seed": self.seed}


@dataclass(eq=False)
class RandomForest:
    trees: list
    in_bag_counts: np.ndarray = field(repr=False)
    config: ForestConfig
    feature_names: list
    n_train: int

    @property
    def oob_membership(self):
        """Per-tree arrays of row indices that were out of bag."""
        return [np.flatnonzero(c == 0) for c in self.in_bag_counts]

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != len(self.feature_names):
            raise ForestError(
                f"expected {len(self.feature_names)} feature(s), got {X.shape[1]}")
        return np.mean([t.predict(X) for t in self.trees], axis=0)

    def to_dict(self):
        return {"config": self.config.to_dict(), "feature_names": list(self.feature_names),
                "n_train": self.n_train, "trees": [t.to_dict() for t in self.trees]}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _fit_one(X, y, cfg, m, names, i):
    n = y.size
    rng = child_rng(cfg.seed, STREAM_FOREST, i)
    if cfg.bootstrap:
        rows = rng.integers(0, n, size=n)
        counts = np.bincount(rows, minlength=n)
    else:
        rows = np.arange(n)
        counts = np.ones(n, dtype=int)
    subset = None if m >= X.shape[1] else m
    tree = tree_fit(X[rows], y[rows], cfg.tree_cfg, feature_subset_size=subset,
                    feature_names=names, rng=rng)
    return tree, counts


def forest_fit(X, y, cfg=None, feature_names=None, n_jobs=1):
    """Fit ``cfg.n_trees`` trees, each on its own bootstrap resample.

    Tree ``i`` draws its resample and feature subsets from a generator
    seeded by ``(cfg.seed, i)`` alone, so ``n_jobs`` changes only speed.
    """
    cfg = cfg or ForestConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if y.size == 0:
        raise ForestError("cannot fit a forest on empty data")
    if y.size < 2:
        raise ForestError("a forest needs at least two rows")
    if X.shape[0] != y.size:
        raise ForestError(f"X has {X.shape[0]} rows but y has {y.size}")
    p = X.shape[1]
    m = resolve_feature_subset(cfg.feature_subset, p)
    names = list(feature_names) if feature_names is not None else [f"x{j + 1}" for j in range(p)]
    try:
        if n_jobs == 1:
            results = [_fit_one(X, y, cfg, m, names, i) for i in range(cfg.n_trees)]
        else:
            with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                results = list(pool.map(lambda i: _fit_one(X, y, cfg, m, names, i), range(cfg.n_trees)))
    except TreeError as exc:
        raise ForestError(str(exc)) from exc
    trees = [t for t, _ in results]
    counts = np.array([c for _, c in results])
    return RandomForest(trees, counts, cfg, names, y.size)


def forest_predict(forest, x):
    """Mean of the per-tree predictions for a single feature vector."""
    x = np.asarray(x, dtype=float).reshape(-1)
    return float(forest.predict(x.reshape(1, -1))[0])


@dataclass(frozen=True)
class OobReport:
    oob_r2: float
    oob_rmse: float
    covered_rows: int
    predictions: np.ndarray = field(repr=False)

    def to_dict(self):
        return {"oob_r2": self.oob_r2, "oob_rmse": self.oob_rmse,
                "covered_rows": self.covered_rows}


def oob_predictions(forest, X):
    """Out-of-bag prediction per row (NaN where a row was in every bag)."""
    X = np.asarray(X, dtype=float)
    n = forest.n_train
    total = np.zeros(n)
    hits = np.zeros(n, dtype=int)
    for tree, counts in zip(forest.trees, forest.in_bag_counts):
        oob = counts == 0
        if oob.any():
            total[oob] += tree.predict(X[oob])
            hits[oob] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(hits > 0, total / np.maximum(hits, 1), np.nan), hits


def oob_score(forest, X, y):
    if not forest.config.bootstrap:
        raise ForestError("OOB undefined: forest was fit without bootstrap")
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != forest.n_train:
        raise ForestError("OOB scoring needs the training data the forest was fit on")
    pred, hits = oob_predictions(forest, X)
    covered = hits > 0
    if not covered.any():
        raise ForestError("no row was out of bag in any tree")
    yc, pc = y[covered], pred[covered]
    sse = float(np.sum((yc - pc) ** 2))
    sst = float(np.sum((yc - yc.mean()) ** 2))
    r2 = 1.0 - sse / sst if sst > 0 else math.nan
    return OobReport(r2, math.sqrt(sse / yc.size), int(covered.sum()), pred)


@dataclass(frozen=True)
class FeatureImportance:
    names: list
    importance: np.ndarray

    def as_pairs(self):
        return list(zip(self.names, map(float, self.importance)))

    def to_dict(self):
        return {name: float(v) for name, v in self.as_pairs()}


def feature_importance(forest):
    """Mean-decrease-in-impurity importances, normalized to sum to one.

    A forest whose trees never split gets uniform importances and a warning.
    """
    total = np.sum([t.impurity_decrease() for t in forest.trees], axis=0)
    total = np.maximum(total, 0.0)
    s = total.sum()
    if s <= 0:
        warnings.warn("no tree in the forest made a split; importances set uniform",
                      RuntimeWarning, stacklevel=2)
        imp = np.full(total.size, 1.0 / total.size)
    else:
        imp = total / s
    return FeatureImportance(list(forest.feature_names), imp)
