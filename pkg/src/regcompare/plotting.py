"""Report figures rendered straight to image files.

Figures are built on :class:`matplotlib.figure.Figure` with the Agg canvas,
so nothing touches pyplot's global state and rendering is safe to call
from worker threads.
"""

import math
from pathlib import Path

import numpy as np
import matplotlib as mpl
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
WIDTH_IN = 6.4

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
    "path.simplify": False,
    "svg.hashsalt": "regcompare",
}

# PNG metadata otherwise carries the matplotlib version string
_PNG_META = {"Software": None}


def size(scale=1.0, aspect=GOLDEN):
    w = WIDTH_IN * scale
    return (w, w * aspect)


def _new(nrows=1, ncols=1, scale=1.0, aspect=GOLDEN):
    fig = Figure(figsize=size(scale, aspect))
    FigureCanvasAgg(fig)
    axes = fig.subplots(nrows, ncols, squeeze=False)
    return fig, axes


def _save(fig, path):
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_PNG_META)
    return path


def histograms(prof, path, title=""):
    """One panel per column, bars from the precomputed bin edges."""
    names = list(prof.histograms)
    ncols = min(2, len(names))
    nrows = math.ceil(len(names) / ncols)
    with mpl.rc_context(STYLE):
        fig, axes = _new(nrows, ncols, aspect=0.35 * nrows)
        for ax, name in zip(axes.flat, names):
            h = prof.histograms[name]
            edges = h.bin_edges
            widths = np.diff(edges)
            if widths.size == 1 and widths[0] == 0:
                widths = np.array([max(abs(edges[0]) * 1e-3, 1e-12)])
            ax.bar(edges[:-1], h.counts, width=widths, align="edge",
                   color="0.7", edgecolor="0.2", linewidth=0.5)
            ax.set_title(f"{name}  (skew {prof.summaries[name].skewness:.2f})")
            ax.set_ylabel("count")
        for ax in list(axes.flat)[len(names):]:
            ax.set_visible(False)
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def predicted_vs_actual(actual, predicted, path, title="", label="predicted"):
    """Row-ordered series of actual and predicted values, as line plots."""
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    with mpl.rc_context(STYLE):
        fig, axes = _new()
        ax = axes[0, 0]
        idx = np.arange(1, actual.size + 1)
        ax.plot(idx, actual, "-o", ms=2.5, lw=0.8, color="k", label="actual")
        ax.plot(idx, predicted, "--s", ms=2.5, lw=0.8, color="tab:red", label=label)
        ax.set_xlabel("observation")
        ax.set_ylabel("value")
        ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def residual_panels(diag, path, title=""):
    """Normal plot, residual vs fit, histogram and residual vs order."""
    points = diag.normal_plot_points
    fitted, resid = diag.fitted_vs_residual[:, 0], diag.fitted_vs_residual[:, 1]
    with mpl.rc_context(STYLE):
        fig, axes = _new(2, 2, aspect=0.75)
        ax = axes[0, 0]
        ax.plot(points[:, 1], points[:, 0], "o", ms=2.5, color="tab:blue")
        lo, hi = points[:, 1].min(), points[:, 1].max()
        sd = np.std(resid, ddof=1) if resid.size > 1 else 0.0
        if sd > 0:
            ax.plot([lo, hi], [lo / sd, hi / sd], "-", lw=0.8, color="tab:red")
        ax.set_xlabel("residual")
        ax.set_ylabel("normal score")
        ax.set_title("Normal probability plot")

        ax = axes[0, 1]
        ax.plot(fitted, resid, "o", ms=2.5, color="tab:blue")
        ax.axhline(0.0, color="0.4", lw=0.8)
        ax.set_xlabel("fitted value")
        ax.set_ylabel("residual")
        ax.set_title("Versus fits")

        ax = axes[1, 0]
        bins = max(1, int(math.ceil(math.log2(resid.size))) + 1)
        ax.hist(resid, bins=bins, color="0.7", edgecolor="0.2", linewidth=0.5)
        ax.set_xlabel("residual")
        ax.set_ylabel("frequency")
        ax.set_title("Histogram")

        ax = axes[1, 1]
        ax.plot(np.arange(1, resid.size + 1), resid, "-o", ms=2, lw=0.6, color="tab:blue")
        ax.axhline(0.0, color="0.4", lw=0.8)
        ax.set_xlabel("observation order")
        ax.set_ylabel("residual")
        ax.set_title("Versus order")
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def importance_bars(importance, path, title="Feature importance"):
    pairs = sorted(importance.as_pairs(), key=lambda p: p[1])
    with mpl.rc_context(STYLE):
        fig, axes = _new(aspect=0.45)
        ax = axes[0, 0]
        ax.barh([p[0] for p in pairs], [p[1] for p in pairs], color="tab:green")
        ax.set_xlabel("normalized impurity decrease")
        ax.set_title(title)
        return _save(fig, path)


def accuracy_comparison(report, path):
    """Grouped bars of training and validation accuracy per model."""
    rows = report.rows
    x = np.arange(len(rows))
    with mpl.rc_context(STYLE):
        fig, axes = _new(aspect=0.5)
        ax = axes[0, 0]
        ax.bar(x - 0.2, [r.training_accuracy for r in rows], 0.4, label="training",
               color="0.55")
        ax.bar(x + 0.2, [r.validation_accuracy for r in rows], 0.4, label="validation",
               color="tab:blue")
        ax.set_xticks(x, [r.model for r in rows])
        ax.set_ylabel("accuracy (R-sq, %)")
        low = min(min(r.training_accuracy, r.validation_accuracy) for r in rows)
        ax.set_ylim(max(0.0, math.floor(low / 10.0) * 10.0 - 10.0), 100.0)
        ax.legend(frameon=False, loc="upper left")
        return _save(fig, path)


def lambda_profile(y, search, path, name="", grid=(-5.0, 5.0, 201)):
    """Box-Cox profile log-likelihood with the chosen lambda marked."""
    from .transform import boxcox_loglike

    shifted = np.asarray(y, dtype=float) + search.params.shift
    lams = np.linspace(*grid[:2], int(grid[2]))
    ll = np.array([boxcox_loglike(shifted, lam) for lam in lams])
    with mpl.rc_context(STYLE):
        fig, axes = _new(aspect=0.5)
        ax = axes[0, 0]
        ax.plot(lams, ll, "-", lw=1.0, color="k")
        ax.axvline(search.params.lmbda, color="tab:red", lw=0.8, ls="--")
        ax.set_xlabel("lambda")
        ax.set_ylabel("profile log-likelihood")
        ax.set_title(f"{name}: lambda = {search.params.lmbda:.4f}" if name
                     else f"lambda = {search.params.lmbda:.4f}")
        return _save(fig, path)
