"""Box-Cox power transformation with profile-likelihood lambda search."""

import math
from dataclasses import dataclass

import numpy as np

from .dataset import skewness

LAMBDA_BOUNDS = (-5.0, 5.0)
LAMBDA_ZERO_TOL = 1e-12
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class TransformError(ValueError):
    pass


@dataclass(frozen=True)
class BoxCoxParams:
    lmbda: float
    shift: float = 0.0
    source_min: float = math.nan

    def to_dict(self):
        return {"lambda": self.lmbda, "shift": self.shift, "source_min": self.source_min}


@dataclass(frozen=True)
class TransformedColumn:
    values: np.ndarray
    params: BoxCoxParams
    original_name: str = ""

    def to_dict(self):
        return {"original_name": self.original_name, "lambda": self.params.lmbda,
                "shift": self.params.shift, "source_min": self.params.source_min,
                "values": self.values.tolist()}


def _boxcox(y, lmbda):
    if abs(lmbda) < LAMBDA_ZERO_TOL:
        return np.log(y)
    return np.expm1(lmbda * np.log(y)) / lmbda


def boxcox_apply(y, lmbda, shift=0.0, name=""):
    """Transform ``y + shift`` with the Box-Cox power ``lmbda``."""
    y = np.asarray(y, dtype=float).reshape(-1)
    shifted = y + shift
    bad = np.flatnonzero(~(shifted > 0))
    if bad.size:
        raise TransformError(
            f"Box-Cox needs strictly positive input; index {bad[0]} has "
            f"{shifted[bad[0]]!r} after shift {shift}")
    params = BoxCoxParams(float(lmbda), float(shift), float(y.min()))
    return TransformedColumn(_boxcox(shifted, lmbda), params, name)


def boxcox_inverse(t):
    values = np.asarray(t.values, dtype=float)
    lmbda = t.params.lmbda
    if abs(lmbda) < LAMBDA_ZERO_TOL:
        return np.exp(values) - t.params.shift
    base = lmbda * values + 1.0
    bad = np.flatnonzero(~(base > 0))
    if bad.size:
        raise TransformError(
            f"value at index {bad[0]} is outside the range of the Box-Cox "
            f"transform with lambda={lmbda}")
    return np.exp(np.log1p(lmbda * values) / lmbda) - t.params.shift


def auto_shift(y):
    """Additive shift making ``y`` strictly positive (0 when already positive)."""
    y = np.asarray(y, dtype=float)
    lo = float(y.min())
    if lo > 0:
        return 0.0
    span = float(y.max()) - lo
    shift = abs(lo) + 1e-6 * span
    if shift == 0.0:
        shift = 1e-6
    return shift


def boxcox_loglike(y, lmbda):
    """Profile log-likelihood of the Box-Cox model at ``lmbda`` (``y`` positive).

    Works on the log scale, with ``y`` normalized by its geometric mean, so
    lambda values near the +/-5 bounds do not overflow.
    """
    logy = np.log(y)
    n = logy.size
    centered = logy - logy.mean()
    if abs(lmbda) < LAMBDA_ZERO_TOL:
        var = np.mean(centered ** 2)
        log_var = math.log(var) if var > 0 else -math.inf
    else:
        # var((y^l - 1)/l) = gm^(2l) * var((y/gm)^l) / l^2
        powered = np.exp(lmbda * centered)
        var = np.var(powered)
        if var <= 0:
            return -math.inf
        log_var = 2.0 * lmbda * logy.mean() + math.log(var) - 2.0 * math.log(abs(lmbda))
    return -0.5 * n * log_var + (lmbda - 1.0) * logy.sum()


@dataclass(frozen=True)
class LambdaSearch:
    params: BoxCoxParams
    loglike: float
    skew_before: float
    skew_after: float


def boxcox_optimal_lambda(y, grid=(-5.0, 5.0, 101), tol=1e-4):
    """Maximize the Box-Cox profile log-likelihood over a grid, then refine.

    The coarse grid picks the best bracket; golden-section search narrows it
    to ``tol``. Ties on the grid go to the smaller ``|lambda|``.
    """
    return search_lambda(y, grid, tol).params


def search_lambda(y, grid=(-5.0, 5.0, 101), tol=1e-4):
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size < 3:
        raise TransformError("Box-Cox lambda search needs at least 3 values")
    if np.ptp(y) == 0:
        raise TransformError("no informative lambda: input is constant")
    shift = auto_shift(y)
    shifted = y + shift
    lo, hi, steps = grid
    lams = np.linspace(lo, hi, int(steps))
    ll = np.array([boxcox_loglike(shifted, lam) for lam in lams])
    best = ll.max()
    if not np.isfinite(best):
        raise TransformError("no informative lambda: likelihood is degenerate")
    tied = np.flatnonzero(ll >= best - 1e-12 * max(1.0, abs(best)))
    i = tied[np.argmin(np.abs(lams[tied]))]
    a = lams[max(i - 1, 0)]
    b = lams[min(i + 1, lams.size - 1)]

    def f(lam):
        return -boxcox_loglike(shifted, lam)

    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    lam = 0.5 * (a + b)
    lam_ll = -f(lam)
    if lam_ll < ll[i]:
        lam, lam_ll = float(lams[i]), float(ll[i])
    lam = float(min(max(lam, lo), hi))
    params = BoxCoxParams(lam, shift, float(y.min()))
    after = _boxcox(shifted, lam)
    return LambdaSearch(params, lam_ll, skewness(y), skewness(after))


def boxcox_fit_transform(y, name="", grid=(-5.0, 5.0, 101)):
    """Find the optimal lambda for ``y`` and return the transformed column."""
    params = boxcox_optimal_lambda(y, grid)
    return boxcox_apply(y, params.lmbda, params.shift, name)
