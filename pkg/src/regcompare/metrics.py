"""Goodness-of-fit measures: R-squared, RMSE, MAPE and Pearson correlation."""

import math
from dataclasses import dataclass, asdict

import numpy as np

from .dataset import pearson


class MetricError(ValueError):
    pass


def _pair(actual, predicted, min_len=1):
    a = np.asarray(actual, dtype=float).reshape(-1)
    p = np.asarray(predicted, dtype=float).reshape(-1)
    if a.size != p.size:
        raise MetricError(f"length mismatch: {a.size} actual vs {p.size} predicted")
    if a.size < min_len:
        raise MetricError(f"need at least {min_len} observation(s)")
    return a, p


def r2_score(actual, predicted):
    """Coefficient of determination, ``1 - SS_res / SS_tot``; may be negative."""
    a, p = _pair(actual, predicted, 2)
    d = a - a.mean()
    ss_tot = float(d @ d)
    if ss_tot == 0.0:
        raise MetricError("R-squared is undefined for a constant actual vector")
    r = a - p
    return 1.0 - float(r @ r) / ss_tot


def rmse(actual, predicted):
    a, p = _pair(actual, predicted)
    r = p - a
    return math.sqrt(float(r @ r) / a.size)


def mape(actual, predicted):
    """Mean absolute percentage error, in percent."""
    a, p = _pair(actual, predicted)
    zero = np.flatnonzero(a == 0)
    if zero.size:
        raise MetricError(f"MAPE is undefined: actual value at index {zero[0]} is zero")
    return float(np.mean(np.abs((a - p) / a))) * 100.0


def correlation(actual, predicted):
    a, p = _pair(actual, predicted, 2)
    return pearson(a, p)


@dataclass(frozen=True)
class EvalResult:
    r2: float
    rmse: float
    mape_pct: float
    correlation: float
    n: int

    def to_dict(self):
        return asdict(self)


def evaluate(actual, predicted):
    """All four measures at once; correlation is NaN for constant predictions."""
    a, p = _pair(actual, predicted, 2)
    try:
        corr = correlation(a, p)
    except ValueError:
        corr = math.nan
    try:
        mp = mape(a, p)
    except MetricError:
        mp = math.nan
    return EvalResult(r2_score(a, p), rmse(a, p), mp, corr, int(a.size))
