"""Tabular numeric data: ingestion, profiling, splitting and synthesis."""

import csv
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .seeding import STREAM_SPLIT, STREAM_SYNTH, child_rng


class DatasetError(ValueError):
    pass


class Dataset:
    """Immutable, column-oriented table of finite reals.

    Columns keep their insertion order. Arrays handed out by
    :meth:`column` are read-only views.
    """

    def __init__(self, columns):
        if not columns:
            raise DatasetError("dataset needs at least one column")
        cols = {}
        n = None
        for name, values in dict(columns).items():
            if not isinstance(name, str) or not name:
                raise DatasetError("column names must be nonempty strings")
            arr = np.array(values, dtype=float).reshape(-1)
            if n is None:
                n = arr.size
            elif arr.size != n:
                raise DatasetError(
                    f"column {name!r} has length {arr.size}, expected {n}")
            bad = np.flatnonzero(~np.isfinite(arr))
            if bad.size:
                raise DatasetError(
                    f"column {name!r} has a non-finite value at row {bad[0]}")
            arr.flags.writeable = False
            cols[name] = arr
        if len(cols) != len(dict(columns)):
            raise DatasetError("column names must be unique")
        if n == 0:
            raise DatasetError("empty dataset")
        self._columns = cols
        self._n = n

    @property
    def names(self):
        return list(self._columns)

    @property
    def n(self):
        return self._n

    def __len__(self):
        return self._n

    def __contains__(self, name):
        return name in self._columns

    def __eq__(self, other):
        if not isinstance(other, Dataset) or self.names != other.names:
            return False
        return all(np.array_equal(self._columns[k], other._columns[k]) for k in self.names)

    def __repr__(self):
        return f"Dataset(n={self._n}, columns={self.names})"

    def column(self, name):
        try:
            return self._columns[name]
        except KeyError:
            raise DatasetError(f"unknown column {name!r}") from None

    def matrix(self, names):
        """Stack the named columns into an ``(n, len(names))`` array."""
        if not names:
            return np.empty((self._n, 0))
        return np.column_stack([self.column(name) for name in names])

    def take(self, rows):
        rows = np.asarray(rows, dtype=int)
        return Dataset({k: v[rows] for k, v in self._columns.items()})

    def with_columns(self, new_columns):
        merged = dict(self._columns)
        merged.update(new_columns)
        return Dataset(merged)

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.names)
            for row in self.matrix(self.names):
                writer.writerow([repr(float(v)) for v in row])


def load_csv(path):
    """Read a headered, comma-separated file of finite reals."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise DatasetError("empty dataset")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DatasetError("empty dataset")
    values = [[] for _ in header]
    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise DatasetError(
                f"row {i}: expected {len(header)} cells, found {len(row)}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DatasetError(
                    f"row {i}, column {header[j]!r}: cannot parse {cell!r}") from None
            if not math.isfinite(v):
                raise DatasetError(
                    f"row {i}, column {header[j]!r}: non-finite value {cell!r}")
            values[j].append(v)
    if len(set(header)) != len(header):
        raise DatasetError("duplicate column names in header")
    return Dataset(dict(zip(header, values)))


@dataclass(frozen=True)
class SummaryStats:
    n: int
    mean: float
    std_dev: float
    min: float
    q1: float
    median: float
    q3: float
    max: float
    skewness: float

    def to_dict(self):
        return asdict(self)


def skewness(x):
    """Adjusted Fisher-Pearson sample skewness; 0 for n < 3 or zero variance."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 3:
        return 0.0
    d = x - x.mean()
    scale = np.max(np.abs(d))
    if scale == 0.0 or scale <= 4 * np.finfo(float).eps * np.max(np.abs(x)):
        return 0.0
    # skewness is scale-free; normalizing avoids under/overflow in the powers
    d = d / scale
    m2 = np.mean(d * d)
    g1 = np.mean(d ** 3) / m2 ** 1.5
    return float(g1 * math.sqrt(n * (n - 1)) / (n - 2))


def summarize(column):
    x = np.asarray(column, dtype=float).reshape(-1)
    if x.size == 0:
        raise DatasetError("cannot summarize an empty vector")
    q1, med, q3 = np.percentile(x, [25, 50, 75], method="linear")
    std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    if np.all(x == x[0]):
        std = 0.0
    return SummaryStats(
        n=int(x.size), mean=float(x.mean()), std_dev=std,
        min=float(x.min()), q1=float(q1), median=float(med), q3=float(q3),
        max=float(x.max()), skewness=skewness(x) if std > 0 else 0.0)


def pearson(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DatasetError("pearson needs two vectors of equal length")
    if x.size < 2:
        raise DatasetError("pearson needs at least two observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DatasetError("correlation is undefined for a constant input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class CorrelationMatrix:
    names: list
    r: np.ndarray

    def to_dict(self):
        return {"names": list(self.names), "r": self.r.tolist()}


def correlation_matrix(ds, names):
    names = list(names)
    k = len(names)
    cols = [ds.column(nm) for nm in names]
    r = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            try:
                r[i, j] = r[j, i] = pearson(cols[i], cols[j])
            except DatasetError:
                const = names[i] if np.ptp(cols[i]) == 0 else names[j]
                raise DatasetError(f"column {const!r} is constant") from None
    for i in range(k):
        if np.ptp(cols[i]) == 0:
            raise DatasetError(f"column {names[i]!r} is constant")
    return CorrelationMatrix(names, r)


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray

    def to_dict(self):
        return {"bin_edges": self.bin_edges.tolist(), "counts": self.counts.tolist()}


def histogram(column, bins):
    """Equal-width histogram over [min, max]; the maximum lands in the last bin.

    A constant column gives one zero-width bin holding every value.
    """
    x = np.asarray(column, dtype=float).reshape(-1)
    if x.size == 0:
        raise DatasetError("cannot histogram an empty vector")
    if int(bins) < 1:
        raise DatasetError("bins must be a positive integer")
    bins = int(bins)
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return Histogram(np.array([lo, hi]), np.array([x.size]))
    edges = lo + (hi - lo) * np.arange(bins + 1) / bins
    edges[-1] = hi
    idx = np.floor((x - lo) / (hi - lo) * bins).astype(int)
    idx = np.clip(idx, 0, bins - 1)
    # floor can disagree with the stored edges by one ulp
    idx = np.where((idx > 0) & (x < edges[idx]), idx - 1, idx)
    idx = np.where((idx < bins - 1) & (x >= edges[np.minimum(idx + 1, bins)]), idx + 1, idx)
    return Histogram(edges, np.bincount(idx, minlength=bins))


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    seed: int = 0


def split_indices(n, spec):
    f = spec.test_fraction
    if not 0.0 < f < 1.0:
        raise DatasetError(f"test_fraction must lie in (0, 1), got {f}")
    n_train = math.ceil(round(n * (1.0 - f), 9))
    if n_train < 2:
        raise DatasetError(f"training split would hold {n_train} row(s); need at least 2")
    perm = child_rng(spec.seed, STREAM_SPLIT).permutation(n)
    return perm[:n_train], perm[n_train:]


def train_test_split(ds, spec):
    train, test = split_indices(ds.n, spec)
    return ds.take(train), ds.take(test)


@dataclass(frozen=True)
class GeneratorProfile:
    """Shape parameters of the synthetic d-value generator.

    All columns hang off one latent standard normal ``z``:

    * ``d97 = s97 * exp(sigma97 * (z + jitter97 * u97))``, a near-noiseless
      log-normal proxy of ``z``;
    * ``d98 = s98 * (exp(sigma98 * z) + floor98 * exp(spread98 * u98))``, whose
      additive noise floor swamps the low end but not the right tail, so it
      tracks ``d97`` closely on the raw scale and much less after a log;
    * ``d99 = s99 * exp(sigma99 * (rho99 * z + sqrt(1 - rho99**2) * u99))``;
    * ``d80 = s80 * exp(slope * z + jump * logistic(steep * (z - jump_at)) + noise * e)``.

    The jump in the response is what no power transform can straighten out.
    """

    scales: tuple = (6.0e-3, 4.2e-3, 3.4e-3)
    sigma99: float = 0.85
    rho99: float = 0.90
    sigma98: float = 1.0
    floor98: float = 0.5
    spread98: float = 0.5
    sigma97: float = 0.75
    jitter97: float = 0.02
    response_scale: float = 4.0e-3
    slope: float = -0.3
    jump: float = 0.3
    steep: float = 20.0
    jump_at: float = 0.0
    noise: float = 0.03


DEFAULT_PROFILE = GeneratorProfile()
SYNTH_PREDICTORS = ("d99", "d98", "d97")
SYNTH_RESPONSE = "d80"


def generate_synthetic(n_rows, seed, profile=DEFAULT_PROFILE):
    """Skewed, collinear stand-in for the battery d-value table.

    Columns are d99, d98, d97 (predictors) and d80 (response), on the
    1e-3 to 1e-2 scale. Output depends only on ``(n_rows, seed, profile)``.
    """
    if n_rows < 10:
        raise DatasetError("synthetic datasets need at least 10 rows")
    p = profile
    rng = child_rng(seed, STREAM_SYNTH)
    z = rng.standard_normal(n_rows)
    u99, u98, u97 = rng.standard_normal((3, n_rows))
    e = rng.standard_normal(n_rows)
    s99, s98, s97 = p.scales
    d99 = s99 * np.exp(p.sigma99 * (p.rho99 * z + math.sqrt(1.0 - p.rho99 ** 2) * u99))
    d98 = s98 * (np.exp(p.sigma98 * z) + p.floor98 * np.exp(p.spread98 * u98))
    d97 = s97 * np.exp(p.sigma97 * (z + p.jitter97 * u97))
    step = 1.0 / (1.0 + np.exp(-p.steep * (z - p.jump_at)))
    d80 = p.response_scale * np.exp(p.slope * z + p.jump * step + p.noise * e)
    return Dataset({"d99": d99, "d98": d98, "d97": d97, "d80": d80})
