"""Ordinary least squares with regression diagnostics and stepwise selection.

Fits go through a thin QR decomposition of the design matrix (intercept
column first). Everything downstream, such as standard errors, leverages,
PRESS and VIF, is derived from that factorization or from auxiliary fits.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import distributions as dist
from .dataset import skewness
from .seeding import STREAM_CV, child_rng

INTERCEPT = "Constant"
RANK_TOL = 1e-10
LEVERAGE_TOL = 1e-12


class LinregError(ValueError):
    pass


class RankDeficientError(LinregError):
    def __init__(self, column):
        super().__init__(f"design matrix is rank deficient: column {column!r} "
                         "is a linear combination of earlier columns")
        self.column = column


@dataclass(frozen=True, eq=False)
class OlsFit:
    term_names: list
    beta: np.ndarray
    se: np.ndarray
    t_stat: np.ndarray
    p_value: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    leverage: np.ndarray
    sse: float
    sst: float
    ssr: float
    s: float
    r2: float
    r2_adj: float
    press: float
    r2_pred: float
    vif: np.ndarray
    n: int
    k: int
    X: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)

    @property
    def predictors(self):
        return self.term_names[1:]

    @property
    def df_resid(self):
        return self.n - self.k - 1

    @property
    def mse(self):
        return self.sse / self.df_resid

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1) if self.k > 0 else X.reshape(-1, 0)
        if X.shape[1] != self.k:
            raise LinregError(f"expected {self.k} predictor column(s), got {X.shape[1]}")
        return self.beta[0] + X @ self.beta[1:]

    def coefficient_table(self):
        rows = []
        for j, name in enumerate(self.term_names):
            rows.append({
                "Term": name,
                "Coef": float(self.beta[j]),
                "SE Coef": float(self.se[j]),
                "95% CI": [float(self.ci_low[j]), float(self.ci_high[j])],
                "T-Value": float(self.t_stat[j]),
                "P-Value": float(self.p_value[j]),
                "VIF": None if j == 0 else _json_float(self.vif[j - 1]),
            })
        return rows

    def summary(self):
        return {"S": self.s, "R-sq": self.r2, "R-sq(adj)": self.r2_adj,
                "PRESS": self.press, "R-sq(pred)": self.r2_pred, "n": self.n, "k": self.k}


def _json_float(v):
    v = float(v)
    return v if math.isfinite(v) else ("inf" if v > 0 else "nan")


def _design(X, n):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(n, -1)
    return X, np.column_stack([np.ones(n), X])


def _qr_checked(A, names):
    q, r = np.linalg.qr(A)
    col_norm = np.linalg.norm(A, axis=0).max()
    diag = np.abs(np.diag(r))
    bad = np.flatnonzero(diag <= RANK_TOL * col_norm)
    if bad.size:
        raise RankDeficientError(names[bad[0]])
    return q, r


def ols_fit(X, y, names=None, with_vif=True):
    """Least-squares fit of ``y`` on ``X`` plus an intercept.

    Parameters
    ----------
    X : array-like, shape (n, k)
        Predictor matrix; ``k`` may be 0 for an intercept-only model.
    y : array-like, shape (n,)
    names : list of str, optional
        Predictor names (the intercept is added as ``"Constant"``).
    with_vif : bool
        Compute variance inflation factors (one auxiliary fit per predictor).

    Raises
    ------
    LinregError
        If ``n <= k + 1`` or a column is linearly dependent on earlier ones.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    n = y.size
    X, A = _design(X, n)
    if X.shape[0] != n:
        raise LinregError(f"X has {X.shape[0]} rows but y has {n}")
    k = X.shape[1]
    if names is None:
        names = [f"x{j + 1}" for j in range(k)]
    names = list(names)
    if len(names) != k:
        raise LinregError(f"{len(names)} names given for {k} predictors")
    if n <= k + 1:
        raise LinregError(f"need n > k + 1 observations (n={n}, k={k})")
    term_names = [INTERCEPT] + names
    q, r = _qr_checked(A, term_names)

    qty = q.T @ y
    beta = solve_triangular(r, qty)
    fitted = A @ beta
    resid = y - fitted
    sse = float(resid @ resid)
    ybar = y.mean()
    sst = float(np.sum((y - ybar) ** 2))
    ssr = float(np.sum((fitted - ybar) ** 2))
    df = n - k - 1
    s2 = sse / df
    r_inv = solve_triangular(r, np.eye(k + 1))
    se = np.sqrt(s2 * np.sum(r_inv ** 2, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stat = beta / se
    p_value = np.array([dist.t_two_sided_p(float(t), df) for t in t_stat])
    t_crit = dist.t_ppf(0.975, df)
    leverage = np.sum(q ** 2, axis=1)

    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = 1.0 - sse / sst if sst > 0 else math.nan
        r2_adj = 1.0 - (1.0 - r2) * (n - 1) / df if sst > 0 else math.nan
    if np.all(leverage < 1.0 - LEVERAGE_TOL):
        press = float(np.sum((resid / (1.0 - leverage)) ** 2))
        r2_pred = 1.0 - press / sst if sst > 0 else math.nan
    else:
        press = r2_pred = math.nan

    if k == 0:
        vifs = np.empty(0)
    elif not with_vif:
        vifs = np.full(k, math.nan)
    elif k == 1:
        vifs = np.ones(1)
    else:
        vifs = vif(X, names)

    X = X.copy()
    y = y.copy()
    for arr in (X, y):
        arr.flags.writeable = False
    return OlsFit(term_names, beta, se, t_stat, p_value, beta - t_crit * se, beta + t_crit * se,
                  resid, fitted, leverage, sse, sst, ssr, math.sqrt(s2), r2, r2_adj,
                  press, r2_pred, vifs, n, k, X, y)


def _lstsq_r2(X, y):
    A = np.column_stack([np.ones(len(y)), X])
    beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        return 1.0
    return 1.0 - float(np.sum((y - A @ beta) ** 2)) / sst


def vif(X, names=None):
    """Variance inflation factors, one auxiliary regression per predictor.

    A predictor that is an exact linear combination of the others gets
    ``inf`` and a warning instead of an exception.
    """
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    if names is None:
        names = [f"x{j + 1}" for j in range(k)]
    if k < 2:
        raise LinregError("VIF needs at least two predictors")
    out = np.empty(k)
    for j in range(k):
        others = np.delete(X, j, axis=1)
        xj = X[:, j]
        try:
            aux = ols_fit(others, xj, with_vif=False)
            r2 = aux.r2
        except RankDeficientError:
            # the other columns are collinear among themselves; their span still defines r2
            r2 = _lstsq_r2(others, xj)
        if not math.isfinite(r2) or r2 >= 1.0 - 1e-13:
            warnings.warn(f"predictor {names[j]!r} is perfectly collinear with the others; "
                          "VIF reported as inf", RuntimeWarning, stacklevel=2)
            out[j] = math.inf
        else:
            out[j] = 1.0 / (1.0 - r2)
    return out


def mallows_cp(fit, full_fit):
    """Mallows' Cp of ``fit`` relative to the MSE of the nesting ``full_fit``."""
    if not set(fit.predictors) <= set(full_fit.predictors):
        extra = sorted(set(fit.predictors) - set(full_fit.predictors))
        raise LinregError(f"subset model is not nested in the full model (extra terms: {extra})")
    if full_fit.n != fit.n:
        raise LinregError("models were fit on different observations")
    if full_fit.df_resid < 1:
        raise LinregError("full model has no error degrees of freedom")
    return fit.sse / full_fit.mse - fit.n + 2.0 * (fit.k + 1)


def _log_likelihood_core(fit, include_constant):
    if fit.sse <= 0:
        return -math.inf
    core = fit.n * math.log(fit.sse / fit.n)
    if include_constant:
        core += fit.n * (1.0 + math.log(2.0 * math.pi))
    return core


def aicc(fit, include_constant=False):
    """Small-sample AIC with ``p = k + 2`` parameters (coefficients and variance).

    ``include_constant`` adds ``n * (1 + ln 2*pi)``, the full Gaussian
    log-likelihood term some packages report; differences between models on
    the same data are unaffected.
    """
    p = fit.k + 2
    if fit.n <= p + 1:
        raise LinregError(f"AICc needs n > k + 3 (n={fit.n}, k={fit.k})")
    return (_log_likelihood_core(fit, include_constant)
            + 2.0 * p + 2.0 * p * (p + 1) / (fit.n - p - 1))


def bic(fit, include_constant=False):
    p = fit.k + 2
    return _log_likelihood_core(fit, include_constant) + p * math.log(fit.n)


def press_r2pred(fit):
    """PRESS and predicted R-squared from the hat-matrix diagonal."""
    h = fit.leverage
    bad = np.flatnonzero(h >= 1.0 - LEVERAGE_TOL)
    if bad.size:
        raise LinregError(f"row {bad[0]} has leverage 1; its deleted residual is undefined")
    press = float(np.sum((fit.residuals / (1.0 - h)) ** 2))
    return press, 1.0 - press / fit.sst


def durbin_watson(residuals):
    e = np.asarray(residuals, dtype=float)
    denom = float(e @ e)
    if denom == 0.0:
        return math.nan
    return float(np.sum(np.diff(e) ** 2) / denom)


@dataclass
class StepwiseConfig:
    alpha_enter: float = 0.15
    alpha_remove: float = 0.15
    max_steps: int = 50
    candidates: list = None

    def __post_init__(self):
        for name in ("alpha_enter", "alpha_remove"):
            a = getattr(self, name)
            if not 0.0 < a <= 1.0:
                raise LinregError(f"{name} must lie in (0, 1], got {a}")
        if self.max_steps < 1:
            raise LinregError("max_steps must be at least 1")


@dataclass
class StepwiseStep:
    entered: str
    removed: str
    terms: list
    coefs: dict
    p_values: dict
    s: float
    r2: float
    r2_adj: float
    mallows_cp: float
    aicc: float
    bic: float

    def to_dict(self):
        d = dict(self.__dict__)
        return {k: (_json_float(v) if isinstance(v, float) else v) for k, v in d.items()}


@dataclass
class StepwiseTrace:
    candidates: list
    alpha_enter: float
    alpha_remove: float
    steps: list = field(default_factory=list)

    def __len__(self):
        return len(self.steps)

    def to_dict(self):
        return {"candidates": self.candidates, "alpha_enter": self.alpha_enter,
                "alpha_remove": self.alpha_remove,
                "steps": [s.to_dict() for s in self.steps]}


def _try_fit(X, y, names):
    try:
        return ols_fit(X, y, names, with_vif=False)
    except LinregError:
        return None


def _safe(fn, *args):
    try:
        return float(fn(*args))
    except LinregError:
        return math.nan


def stepwise_select(ds, response, cfg=None):
    """Forward entry with backward removal, gated by entry/removal p-values.

    Each iteration enters the candidate with the smallest entry p-value below
    ``alpha_enter`` (ties: larger ``|t|``, then candidate order), then removes
    active terms whose p-value exceeds ``alpha_remove``, largest first, one per
    step, until none qualify.

    Returns
    -------
    (OlsFit, StepwiseTrace)
        The final model (intercept-only when nothing enters) and the trace.
    """
    cfg = cfg or StepwiseConfig()
    candidates = list(cfg.candidates) if cfg.candidates else [
        c for c in ds.names if c != response]
    if not candidates:
        raise LinregError("stepwise selection needs at least one candidate")
    if response in candidates:
        raise LinregError(f"response {response!r} is listed among the candidates")
    y = ds.column(response)
    cols = {c: ds.column(c) for c in candidates}
    n = y.size

    def design(terms):
        return np.column_stack([cols[t] for t in terms]) if terms else np.empty((n, 0))

    full = _try_fit(design(candidates), y, candidates)
    if full is not None and full.df_resid < 1:
        full = None
    trace = StepwiseTrace(candidates, cfg.alpha_enter, cfg.alpha_remove)
    active = []

    def record(fit, entered=None, removed=None):
        trace.steps.append(StepwiseStep(
            entered=entered, removed=removed, terms=list(active),
            coefs=dict(zip(fit.term_names, map(float, fit.beta))),
            p_values=dict(zip(fit.predictors, map(float, fit.p_value[1:]))),
            s=fit.s, r2=fit.r2, r2_adj=fit.r2_adj,
            mallows_cp=_safe(mallows_cp, fit, full) if full is not None else math.nan,
            aicc=_safe(aicc, fit), bic=_safe(bic, fit)))

    while len(trace.steps) < cfg.max_steps:
        best = None
        for order, cand in enumerate(candidates):
            if cand in active:
                continue
            terms = active + [cand]
            if n <= len(terms) + 1:
                continue
            fit = _try_fit(design(terms), y, terms)
            if fit is None:
                continue
            p, t = fit.p_value[-1], abs(fit.t_stat[-1])
            if not p < cfg.alpha_enter:
                continue
            key = (p, -t, order)
            if best is None or key < best[0]:
                best = (key, cand, fit)
        if best is None:
            break
        _, cand, fit = best
        active.append(cand)
        record(fit, entered=cand)

        while len(trace.steps) < cfg.max_steps and len(active) > 1:
            fit = ols_fit(design(active), y, active, with_vif=False)
            ps = fit.p_value[1:]
            worst = None
            for j, term in enumerate(active):
                if ps[j] > cfg.alpha_remove:
                    key = (ps[j], -abs(fit.t_stat[j + 1]), -candidates.index(term))
                    if worst is None or key > worst[0]:
                        worst = (key, term)
            if worst is None:
                break
            active.remove(worst[1])
            record(ols_fit(design(active), y, active, with_vif=False), removed=worst[1])

    final = ols_fit(design(active), y, active)
    return final, trace


@dataclass
class CvResult:
    folds: int
    per_fold_sse: np.ndarray
    cv_s: float
    cv_r2: float
    seed: int
    predictions: np.ndarray = field(repr=False)
    fold_of_row: np.ndarray = field(repr=False)

    def to_dict(self):
        return {"folds": self.folds, "per_fold_sse": self.per_fold_sse.tolist(),
                "cv_s": self.cv_s, "cv_r2": self.cv_r2, "seed": self.seed}


def fold_assignment(n, k, seed):
    """Seeded assignment of ``n`` rows to ``k`` folds whose sizes differ by at most 1."""
    if k < 2:
        raise LinregError("k-fold cross-validation needs k >= 2")
    if k > n:
        raise LinregError(f"cannot make {k} folds from {n} rows")
    perm = child_rng(seed, STREAM_CV).permutation(n)
    fold = np.empty(n, dtype=int)
    for i, chunk in enumerate(np.array_split(perm, k)):
        fold[chunk] = i
    return fold


def kfold_cv_arrays(X, y, k=10, seed=0):
    y = np.asarray(y, dtype=float).reshape(-1)
    n = y.size
    X, _ = _design(X, n)
    fold = fold_assignment(n, k, seed)
    preds = np.empty(n)
    sse = np.empty(k)
    for i in range(k):
        hold = fold == i
        try:
            fit = ols_fit(X[~hold], y[~hold], with_vif=False)
        except LinregError as exc:
            raise LinregError(f"fold {i} training set cannot be fit: {exc}") from exc
        preds[hold] = fit.predict(X[hold])
        sse[i] = np.sum((y[hold] - preds[hold]) ** 2)
    total = float(np.sum(sse))
    sst = float(np.sum((y - y.mean()) ** 2))
    cv_r2 = 1.0 - total / sst if sst > 0 else math.nan
    return CvResult(k, sse, math.sqrt(total / n), cv_r2, seed, preds, fold)


def kfold_cv(ds, response, terms, k=10, seed=0):
    """K-fold cross-validated S and R-squared for the model ``response ~ terms``.

    ``cv_s`` pools squared holdout errors over all rows before taking the
    root; ``cv_r2`` compares them with the total sum of squares.
    """
    return kfold_cv_arrays(ds.matrix(list(terms)), ds.column(response), k, seed)


@dataclass
class AnovaRow:
    source: str
    df: int
    seq_ss: float = math.nan
    contribution_pct: float = math.nan
    adj_ss: float = math.nan
    adj_ms: float = math.nan
    f_value: float = math.nan
    p_value: float = math.nan

    def to_dict(self):
        return {k: (_json_float(v) if isinstance(v, float) else v)
                for k, v in self.__dict__.items()}


@dataclass
class AnovaTable:
    rows: list

    def row(self, source):
        for r in self.rows:
            if r.source == source:
                return r
        raise KeyError(source)

    @property
    def term_rows(self):
        return [r for r in self.rows if r.source not in ("Regression", "Error", "Total")]

    def to_dict(self):
        return {"rows": [r.to_dict() for r in self.rows]}


def anova(fit, entry_order=None):
    """Sequential and adjusted sums of squares for each term of ``fit``."""
    entry_order = list(entry_order) if entry_order is not None else fit.predictors
    if sorted(entry_order) != sorted(fit.predictors):
        raise LinregError("entry_order must list exactly the model's predictors")
    index = {name: j for j, name in enumerate(fit.predictors)}
    X, y = fit.X, fit.y
    mse = fit.mse
    df_err = fit.df_resid

    def sse_of(terms):
        cols = [index[t] for t in terms]
        return ols_fit(X[:, cols], y, list(terms), with_vif=False).sse

    rows = []
    reg = AnovaRow("Regression", fit.k, fit.ssr, 100.0 * fit.ssr / fit.sst, fit.ssr)
    if fit.k:
        reg.adj_ms = fit.ssr / fit.k
        reg.f_value = reg.adj_ms / mse if mse > 0 else math.inf
        reg.p_value = dist.f_sf(reg.f_value, fit.k, df_err)
    rows.append(reg)
    prev = fit.sst
    for i, term in enumerate(entry_order):
        cur = sse_of(entry_order[:i + 1])
        seq = prev - cur
        prev = cur
        adj = sse_of([t for t in fit.predictors if t != term]) - fit.sse
        row = AnovaRow(term, 1, seq, 100.0 * seq / fit.sst, adj, adj)
        row.f_value = adj / mse if mse > 0 else math.inf
        row.p_value = dist.f_sf(row.f_value, 1, df_err)
        rows.append(row)
    rows.append(AnovaRow("Error", df_err, fit.sse, 100.0 * fit.sse / fit.sst,
                         fit.sse, mse))
    rows.append(AnovaRow("Total", fit.n - 1, fit.sst, 100.0))
    return AnovaTable(rows)


@dataclass
class ResidualDiagnostics:
    durbin_watson: float
    residual_skewness: float
    normal_plot_points: np.ndarray
    normal_plot_rows: np.ndarray
    fitted_vs_residual: np.ndarray
    standardized: np.ndarray
    flagged_outliers: list
    note: str = ""

    def to_dict(self):
        return {"durbin_watson": _json_float(self.durbin_watson),
                "residual_skewness": self.residual_skewness,
                "flagged_outliers": list(self.flagged_outliers), "note": self.note}


OUTLIER_Z = 3.0


def normal_scores(n):
    """Blom plotting positions mapped through the normal quantile function."""
    return np.array([dist.norm_ppf((i - 0.375) / (n + 0.25)) for i in range(1, n + 1)])


def residual_diagnostics(fit, order=None):
    """Durbin-Watson, normal-probability points and outlier flags for ``fit``.

    ``order`` gives the observation order used for Durbin-Watson (row
    order when omitted). Outliers are rows whose internally studentized
    residual exceeds 3 in absolute value.
    """
    if fit.n < 3:
        raise LinregError("residual diagnostics need n >= 3")
    e = fit.residuals
    order = np.arange(fit.n) if order is None else np.asarray(order, dtype=int)
    if sorted(order.tolist()) != list(range(fit.n)):
        raise LinregError("order must be a permutation of the observation indices")
    dw = durbin_watson(e[order])
    note = "" if math.isfinite(dw) else "residuals are identically zero; Durbin-Watson undefined"
    rank = np.argsort(e, kind="stable")
    points = np.column_stack([normal_scores(fit.n), e[rank]])
    if fit.s > 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            std = e / (fit.s * np.sqrt(1.0 - fit.leverage))
        flagged = [int(i) for i in np.flatnonzero(np.abs(std) > OUTLIER_Z)]
    else:
        std = np.zeros_like(e)
        flagged = []
    return ResidualDiagnostics(dw, skewness(e), points, rank,
                               np.column_stack([fit.fitted, e]), std, flagged, note)
