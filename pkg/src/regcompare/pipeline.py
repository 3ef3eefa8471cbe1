"""Four-model comparison: raw MLR, Box-Cox MLR, a single CART tree and a forest.

The pipeline profiles the data, fits both stepwise linear models with
k-fold cross-validation, fits the tree models on a seeded train/test split,
and assembles a side-by-side comparison with rule-derived flags.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import linreg, metrics
from .dataset import (DEFAULT_PROFILE, SYNTH_PREDICTORS, SYNTH_RESPONSE, Dataset, GeneratorProfile,
                      SplitSpec, correlation_matrix,
                      generate_synthetic, histogram, load_csv, split_indices, summarize)
from .forest import ForestConfig, feature_importance, forest_fit, oob_score
from .transform import (TransformError, TransformedColumn, boxcox_apply, boxcox_inverse,
                        search_lambda)
from .tree import TreeConfig, tree_fit

MODELS = ("MLR-raw", "MLR-transformed-stepwise", "DecisionTree", "RFR")
MODEL_SLUGS = {"MLR-raw": "mlr_raw", "MLR-transformed-stepwise": "mlr_transformed",
               "DecisionTree": "decision_tree", "RFR": "rfr"}
VIF_LIMIT = 10.0
OUTLIER_Z = 3.0
SKEW_BAND = 0.80
TRANSFORMED_SUFFIX = "_bc"


class PipelineError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    input: str = "synthetic"
    n_rows: int = 124
    seed: int = 0
    response: str = None
    predictors: list = None
    transform_map: dict = field(default_factory=dict)
    transform_default: str = "on"
    stepwise: linreg.StepwiseConfig = field(default_factory=linreg.StepwiseConfig)
    cv_folds: int = 10
    test_fraction: float = 0.2
    tree_cfg: TreeConfig = field(default_factory=TreeConfig)
    forest_cfg: ForestConfig = field(default_factory=lambda: ForestConfig(feature_subset="all"))
    overfit_gap: float = 3.0
    histogram_bins: int = None
    n_jobs: int = 1
    generator: GeneratorProfile = DEFAULT_PROFILE

    @property
    def split(self):
        return SplitSpec(self.test_fraction, self.seed)

    def transform_mode(self, column):
        mode = self.transform_map.get(column, self.transform_default)
        if mode not in ("on", "off", "auto"):
            raise ValueError(f"transform mode for {column!r} must be on/off/auto, got {mode!r}")
        return mode

    def to_dict(self):
        return {
            "input": self.input, "n_rows": self.n_rows, "seed": self.seed,
            "response": self.response, "predictors": self.predictors,
            "transform_map": dict(self.transform_map), "transform_default": self.transform_default,
            "alpha_enter": self.stepwise.alpha_enter, "alpha_remove": self.stepwise.alpha_remove,
            "cv_folds": self.cv_folds, "test_fraction": self.test_fraction,
            "tree": self.tree_cfg.to_dict(), "forest": self.forest_cfg.to_dict(),
            "overfit_gap": self.overfit_gap,
        }


def load_input(cfg):
    if cfg.input == "synthetic":
        return generate_synthetic(cfg.n_rows, cfg.seed, cfg.generator)
    return load_csv(cfg.input)


def resolve_columns(cfg, ds):
    response = cfg.response
    if response is None:
        response = SYNTH_RESPONSE if SYNTH_RESPONSE in ds else ds.names[-1]
    if response not in ds:
        raise ValueError(f"response column {response!r} not found")
    predictors = list(cfg.predictors) if cfg.predictors else (
        list(SYNTH_PREDICTORS) if all(p in ds for p in SYNTH_PREDICTORS)
        else [c for c in ds.names if c != response])
    if response in predictors:
        raise ValueError(f"response {response!r} is also listed as a predictor")
    for p in predictors:
        ds.column(p)
    if not predictors:
        raise ValueError("no predictor columns")
    return response, predictors


# -- profiling -------------------------------------------------------------

@dataclass
class Profile:
    summaries: dict
    histograms: dict
    correlation: object


def profile(ds, columns, bins=None):
    """Descriptive statistics, histograms and the predictor correlation matrix."""
    bins = bins or max(1, int(math.ceil(math.log2(ds.n))) + 1)
    summaries = {c: summarize(ds.column(c)) for c in columns}
    hists = {c: histogram(ds.column(c), bins) for c in columns}
    return Profile(summaries, hists, None)


# -- linear models ---------------------------------------------------------

@dataclass
class MlrResult:
    fit: linreg.OlsFit
    trace: linreg.StepwiseTrace
    cv: linreg.CvResult
    anova: linreg.AnovaTable
    residuals: linreg.ResidualDiagnostics
    candidates: list
    response: str
    entry_order: list
    raw_scale: dict = None


def entry_order_of(trace, final_terms):
    order = []
    for step in trace.steps:
        if step.entered:
            order = [t for t in order if t != step.entered] + [step.entered]
        if step.removed:
            order = [t for t in order if t != step.removed]
    return [t for t in order if t in final_terms] + [t for t in final_terms if t not in order]


def fit_mlr(ds, response, candidates, cfg):
    step_cfg = linreg.StepwiseConfig(cfg.stepwise.alpha_enter, cfg.stepwise.alpha_remove,
                                     cfg.stepwise.max_steps, list(candidates))
    fit, trace = linreg.stepwise_select(ds, response, step_cfg)
    order = entry_order_of(trace, fit.predictors)
    cv = linreg.kfold_cv(ds, response, fit.predictors, cfg.cv_folds, cfg.seed)
    table = linreg.anova(fit, order)
    diag = linreg.residual_diagnostics(fit)
    return MlrResult(fit, trace, cv, table, diag, list(candidates), response, order)


@dataclass
class TransformResult:
    dataset: Dataset
    params: dict
    searches: dict
    renamed: dict


def transform_columns(ds, columns, cfg):
    """Box-Cox the selected columns; transformed copies get a ``_bc`` suffix."""
    new_cols, params, searches, renamed = {}, {}, {}, {}
    for c in columns:
        mode = cfg.transform_mode(c)
        values = ds.column(c)
        if mode == "off":
            renamed[c] = c
            continue
        search = search_lambda(values)
        if mode == "auto" and abs(search.skew_before) <= SKEW_BAND:
            renamed[c] = c
            continue
        name = c + TRANSFORMED_SUFFIX
        tc = boxcox_apply(values, search.params.lmbda, search.params.shift, c)
        new_cols[name] = tc.values
        params[c] = tc.params
        searches[c] = search
        renamed[c] = name
    return TransformResult(ds.with_columns(new_cols), params, searches, renamed)


def raw_scale_metrics(mlr, tr, ds, response):
    """Metrics for a transformed-response model mapped back to the response's units."""
    if response not in tr.params:
        return None
    params = tr.params[response]
    out = {}
    y = ds.column(response)
    for label, pred in (("fitted", mlr.fit.fitted), ("cv", mlr.cv.predictions)):
        try:
            back = boxcox_inverse(TransformedColumn(np.asarray(pred), params, response))
        except TransformError as exc:
            out[label] = {"error": str(exc)}
            continue
        out[label] = metrics.evaluate(y, back).to_dict()
    return out


# -- tree models -----------------------------------------------------------

@dataclass
class TreeModelResult:
    name: str
    model: object
    train_rows: np.ndarray
    test_rows: np.ndarray
    train_pred: np.ndarray
    test_pred: np.ndarray
    train_eval: metrics.EvalResult
    test_eval: metrics.EvalResult
    extra: dict = field(default_factory=dict)


def _tree_cfg(cfg):
    t = cfg.tree_cfg
    return TreeConfig(t.max_depth, t.min_samples_split, t.min_samples_leaf, cfg.seed)


def fit_tree(ds, response, predictors, cfg):
    """Single unrestricted-by-default CART tree on the training split."""
    X = ds.matrix(predictors)
    y = ds.column(response)
    train, test = split_indices(ds.n, cfg.split)
    tree = tree_fit(X[train], y[train], _tree_cfg(cfg), feature_names=predictors)
    p_train, p_test = tree.predict(X[train]), tree.predict(X[test])
    return TreeModelResult(
        "DecisionTree", tree, train, test, p_train, p_test,
        metrics.evaluate(y[train], p_train), metrics.evaluate(y[test], p_test),
        {"depth": tree.depth, "leaf_count": tree.leaf_count})


def fit_forest(ds, response, predictors, cfg):
    """Random forest on the same training split as :func:`fit_tree`."""
    X = ds.matrix(predictors)
    y = ds.column(response)
    train, test = split_indices(ds.n, cfg.split)
    fc = cfg.forest_cfg
    fcfg = ForestConfig(fc.n_trees, fc.feature_subset, _tree_cfg(cfg), fc.bootstrap, cfg.seed)
    forest = forest_fit(X[train], y[train], fcfg, predictors, n_jobs=cfg.n_jobs)
    extra = {"importance": feature_importance(forest)}
    if fcfg.bootstrap:
        extra["oob"] = oob_score(forest, X[train], y[train])
    p_train, p_test = forest.predict(X[train]), forest.predict(X[test])
    return TreeModelResult(
        "RFR", forest, train, test, p_train, p_test,
        metrics.evaluate(y[train], p_train), metrics.evaluate(y[test], p_test), extra)


def fit_tree_models(ds, response, predictors, cfg):
    return fit_tree(ds, response, predictors, cfg), fit_forest(ds, response, predictors, cfg)


# -- comparison ------------------------------------------------------------

@dataclass
class ComparisonRow:
    model: str
    training_accuracy: float
    validation_accuracy: float
    validation_kind: str
    correlation: float
    correlation_train: float
    correlation_test: float
    max_vif: float
    max_abs_standardized_residual: float
    overfit_flag: bool = False
    multicollinearity_flag: bool = False
    outlier_flag: bool = False

    def to_dict(self):
        d = dict(self.__dict__)
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = None if math.isnan(v) else "inf"
        return d


def derive_flags(row, overfit_gap=3.0):
    """Set the three flags of ``row`` from its numeric fields."""
    max_vif = row.max_vif
    if isinstance(max_vif, str):
        max_vif = math.inf
    row.overfit_flag = bool(row.training_accuracy - row.validation_accuracy > overfit_gap)
    row.multicollinearity_flag = bool(max_vif is not None and max_vif > VIF_LIMIT)
    row.outlier_flag = bool(row.max_abs_standardized_residual is not None
                            and row.max_abs_standardized_residual > OUTLIER_Z)
    return row


@dataclass
class ComparisonReport:
    rows: list
    overfit_gap: float

    def row(self, model):
        for r in self.rows:
            if r.model == model:
                return r
        raise KeyError(model)

    def to_dict(self):
        return {"overfit_gap": self.overfit_gap, "rows": [r.to_dict() for r in self.rows]}


def _mlr_row(name, mlr):
    fit = mlr.fit
    max_vif = float(np.max(fit.vif)) if fit.k else math.nan
    corr = metrics.correlation(fit.y, fit.fitted) if fit.k else math.nan
    std = mlr.residuals.standardized
    return ComparisonRow(
        name, 100.0 * fit.r2_adj, 100.0 * mlr.cv.cv_r2,
        f"{mlr.cv.folds}-fold CV R-sq", corr, corr, math.nan, max_vif,
        float(np.max(np.abs(std))) if std.size else math.nan)


def holdout_z(actual, predicted):
    e = np.asarray(actual) - np.asarray(predicted)
    sd = np.std(e, ddof=1) if e.size > 1 else 0.0
    if sd == 0:
        return np.zeros_like(e)
    return (e - e.mean()) / sd


def _treelike_row(res, y_test):
    z = holdout_z(y_test, res.test_pred)
    return ComparisonRow(
        res.name, 100.0 * res.train_eval.r2, 100.0 * res.test_eval.r2, "test R-sq",
        res.test_eval.correlation, res.train_eval.correlation, res.test_eval.correlation,
        math.nan, float(np.max(np.abs(z))) if z.size else math.nan)


@dataclass
class PipelineResult:
    config: PipelineConfig
    dataset: Dataset
    response: str
    predictors: list
    profile: Profile
    transformed_profile: Profile
    transform: TransformResult
    mlr_raw: MlrResult
    mlr_transformed: MlrResult
    tree: TreeModelResult
    forest: TreeModelResult
    report: ComparisonReport


def run_stage(name, fn, *args):
    """Call ``fn(*args)``, re-raising data and numeric errors tagged with ``name``."""
    try:
        return fn(*args)
    except PipelineError:
        raise
    except (ValueError, ArithmeticError, OSError, np.linalg.LinAlgError) as exc:
        raise PipelineError(name, exc) from exc


def run_pipeline(cfg):
    """Run every stage and return the full result (nothing is written to disk)."""
    ds = run_stage("load", load_input, cfg)
    response, predictors = run_stage("columns", resolve_columns, cfg, ds)
    columns = predictors + [response]

    prof = run_stage("profile", profile, ds, columns, cfg.histogram_bins)
    prof.correlation = run_stage("profile", correlation_matrix, ds, predictors)

    mlr_raw = run_stage("mlr_raw", fit_mlr, ds, response, predictors, cfg)

    tr = run_stage("transform", transform_columns, ds, columns, cfg)
    t_predictors = [tr.renamed[p] for p in predictors]
    t_response = tr.renamed[response]
    t_prof = run_stage("transform", profile, tr.dataset, t_predictors + [t_response],
                    cfg.histogram_bins)
    t_prof.correlation = run_stage("transform", correlation_matrix, tr.dataset, t_predictors)
    mlr_t = run_stage("mlr_transformed", fit_mlr, tr.dataset, t_response, t_predictors, cfg)
    mlr_t.raw_scale = run_stage("mlr_transformed", raw_scale_metrics, mlr_t, tr, ds, response)

    tree_res, forest_res = run_stage("tree_models", fit_tree_models, ds, response, predictors, cfg)

    y_test = ds.column(response)[tree_res.test_rows]
    rows = [_mlr_row(MODELS[0], mlr_raw), _mlr_row(MODELS[1], mlr_t),
            _treelike_row(tree_res, y_test), _treelike_row(forest_res, y_test)]
    for r in rows:
        derive_flags(r, cfg.overfit_gap)
    report = ComparisonReport(rows, cfg.overfit_gap)
    return PipelineResult(cfg, ds, response, predictors, prof, t_prof, tr, mlr_raw, mlr_t,
                          tree_res, forest_res, report)
