"""Serialization of pipeline results: JSON, markdown and plot-data CSV files.

Every writer produces stable file names and byte-identical content for
identical inputs, so output directories can be diffed between runs.
"""

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import linreg
from .pipeline import MODEL_SLUGS, MODELS


class ReportError(OSError):
    pass


# -- primitives ------------------------------------------------------------

def jsonable(obj):
    """Recursively convert numpy types; non-finite floats become null or "inf"."""
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(obj):
    return json.dumps(jsonable(obj), indent=2, allow_nan=False) + "\n"


def ensure_dir(path):
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create output directory {path}: {exc}") from exc
    if not path.is_dir():
        raise ReportError(f"output path {path} is not a directory")
    return path


def write_text(path, text):
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    return path


def write_json(path, obj):
    return write_text(path, dumps(obj))


def write_csv(path, header, rows):
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                            for v in row])
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    return path


def fmt(v, spec=".4g"):
    if v is None:
        return "*"
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "*"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, spec)


def md_table(header, rows):
    lines = ["| " + " | ".join(header) + " |",
             "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


# -- profile and transform ---------------------------------------------------

def profile_dict(prof):
    return {
        "summaries": {k: v.to_dict() for k, v in prof.summaries.items()},
        "histograms": {k: v.to_dict() for k, v in prof.histograms.items()},
        "correlation": prof.correlation.to_dict() if prof.correlation is not None else None,
    }


def profile_markdown(prof, title="Descriptive statistics"):
    cols = ["n", "mean", "std_dev", "min", "q1", "median", "q3", "max", "skewness"]
    rows = []
    for name, s in prof.summaries.items():
        d = s.to_dict()
        rows.append([name] + [str(d["n"])] + [fmt(d[c]) for c in cols[1:]])
    out = [f"## {title}\n", md_table(["Variable"] + cols, rows)]
    if prof.correlation is not None:
        names = prof.correlation.names
        r = prof.correlation.r
        out.append("\n### Correlation (Pearson)\n")
        out.append(md_table([""] + names,
                            [[a] + [fmt(r[i, j], ".3f") for j in range(len(names))]
                             for i, a in enumerate(names)]))
    return "\n".join(out)


def transform_dict(tr):
    out = {}
    for col, search in tr.searches.items():
        out[col] = {"column": tr.renamed[col], "params": search.params.to_dict(),
                    "loglike": search.loglike, "skew_before": search.skew_before,
                    "skew_after": search.skew_after}
    untouched = [c for c, new in tr.renamed.items() if c == new]
    return {"transformed": out, "untransformed": untouched}


def transform_markdown(tr):
    rows = [[col, tr.renamed[col], fmt(s.params.lmbda, ".4f"), fmt(s.params.shift),
             fmt(s.skew_before, ".3f"), fmt(s.skew_after, ".3f")]
            for col, s in tr.searches.items()]
    text = "## Box-Cox transformation\n\n" + md_table(
        ["Column", "New column", "lambda", "shift", "skew before", "skew after"], rows)
    untouched = [c for c, new in tr.renamed.items() if c == new]
    if untouched:
        text += "\nLeft untransformed: " + ", ".join(untouched) + "\n"
    return text


# -- linear models -----------------------------------------------------------

def fitted_equation(fit, response, digits=6):
    parts = [fmt(fit.beta[0], f".{digits}g")]
    for name, b in zip(fit.predictors, fit.beta[1:]):
        sign = "-" if b < 0 else "+"
        parts.append(f"{sign} {fmt(abs(b), f'.{digits}g')} {name}")
    return f"{response} = " + " ".join(parts)


def mlr_dict(mlr, title):
    fit = mlr.fit
    summary = fit.summary()
    if fit.n > fit.k + 3:
        summary["AICc"] = linreg.aicc(fit)
        summary["AICc (with constant)"] = linreg.aicc(fit, include_constant=True)
    summary["BIC"] = linreg.bic(fit)
    summary["BIC (with constant)"] = linreg.bic(fit, include_constant=True)
    out = {
        "model": title, "response": mlr.response, "candidates": mlr.candidates,
        "equation": fitted_equation(fit, mlr.response),
        "stepwise": mlr.trace.to_dict(), "summary": summary,
        "coefficients": fit.coefficient_table(), "anova": mlr.anova.to_dict(),
        "cross_validation": mlr.cv.to_dict(), "residuals": mlr.residuals.to_dict(),
    }
    if mlr.raw_scale is not None:
        out["raw_scale"] = mlr.raw_scale
    return out


def stepwise_markdown(trace):
    """Step-by-column layout: coefficients and p-values, then fit statistics."""
    steps = trace.steps
    if not steps:
        return "No candidate met the entry threshold; the model is intercept-only.\n"
    header = [""] + [f"Step {i + 1}" for i in range(len(steps))]
    rows = [["Constant"] + [fmt(s.coefs.get(linreg.INTERCEPT)) for s in steps]]
    for cand in trace.candidates:
        if not any(cand in s.terms for s in steps):
            continue
        rows.append([cand] + [fmt(s.coefs.get(cand)) if cand in s.terms else "" for s in steps])
        rows.append(["  P-value"] + [fmt(s.p_values.get(cand), ".3f") if cand in s.terms
                                     else "" for s in steps])
    rows.append(["S"] + [fmt(s.s) for s in steps])
    rows.append(["R-sq"] + [fmt(100 * s.r2, ".2f") + "%" for s in steps])
    rows.append(["R-sq(adj)"] + [fmt(100 * s.r2_adj, ".2f") + "%" for s in steps])
    rows.append(["Mallows' Cp"] + [fmt(s.mallows_cp, ".2f") for s in steps])
    rows.append(["AICc"] + [fmt(s.aicc, ".2f") for s in steps])
    rows.append(["BIC"] + [fmt(s.bic, ".2f") for s in steps])
    note = (f"\nalpha to enter = {trace.alpha_enter}, "
            f"alpha to remove = {trace.alpha_remove}\n")
    return md_table(header, rows) + note


def mlr_markdown(mlr, title):
    fit = mlr.fit
    d = mlr_dict(mlr, title)
    out = [f"## {title}\n", f"Candidates: {', '.join(mlr.candidates)}\n",
           "### Stepwise selection of terms\n", stepwise_markdown(mlr.trace),
           "### Model summary\n"]
    shown = {k: v for k, v in d["summary"].items() if k not in ("n", "k")}
    out.append(md_table(list(shown), [[fmt(100 * v, ".2f") + "%" if k.startswith("R-sq")
                                       else fmt(v, ".6g") for k, v in shown.items()]]))
    out.append("\n### Coefficients\n")
    rows = []
    for r in fit.coefficient_table():
        lo, hi = r["95% CI"]
        rows.append([r["Term"], fmt(r["Coef"], ".6g"), fmt(r["SE Coef"]),
                     f"({fmt(lo)}, {fmt(hi)})", fmt(r["T-Value"], ".2f"),
                     fmt(r["P-Value"], ".3f"), fmt(r["VIF"], ".2f") if r["VIF"] is not None else ""])
    out.append(md_table(["Term", "Coef", "SE Coef", "95% CI", "T-Value", "P-Value", "VIF"],
                        rows))
    out.append("\n### Regression equation\n\n" + d["equation"] + "\n")
    out.append("\n### Analysis of variance\n")
    arows = [[r.source, str(r.df), fmt(r.seq_ss), fmt(r.contribution_pct, ".2f"),
              fmt(r.adj_ss), fmt(r.adj_ms), fmt(r.f_value, ".2f"), fmt(r.p_value, ".3f")]
             for r in mlr.anova.rows]
    out.append(md_table(["Source", "DF", "Seq SS", "Contribution %", "Adj SS", "Adj MS",
                         "F-Value", "P-Value"], arows))
    cv = mlr.cv
    out.append(f"\n### {cv.folds}-fold cross-validation\n\n"
               f"S = {fmt(cv.cv_s)}, R-sq(CV) = {fmt(100 * cv.cv_r2, '.2f')}%\n")
    rd = mlr.residuals
    out.append(f"\n### Residuals\n\nDurbin-Watson = {fmt(rd.durbin_watson, '.4f')}, "
               f"skewness = {fmt(rd.residual_skewness, '.3f')}, "
               f"|standardized residual| > {linreg.OUTLIER_Z:g}: "
               f"{len(rd.flagged_outliers)} row(s)"
               + (f" {rd.flagged_outliers}" if rd.flagged_outliers else "") + "\n")
    if rd.note:
        out.append(rd.note + "\n")
    if mlr.raw_scale:
        out.append("\n### Back-transformed to the response's original units\n")
        rows = [[label, fmt(m.get("r2")), fmt(m.get("rmse")), fmt(m.get("mape_pct"), ".3f"),
                 fmt(m.get("correlation"), ".4f")] if "error" not in m
                else [label, m["error"], "", "", ""]
                for label, m in mlr.raw_scale.items()]
        out.append(md_table(["Predictions", "R-sq", "RMSE", "MAPE %", "Correlation"], rows))
    return "\n".join(out)


# -- tree models -------------------------------------------------------------

def tree_model_dict(res, include_model=True):
    out = {"model": res.name, "n_train": int(res.train_rows.size),
           "n_test": int(res.test_rows.size),
           "train": res.train_eval.to_dict(), "test": res.test_eval.to_dict()}
    for k, v in res.extra.items():
        out[k] = v
    if include_model and res.name == "DecisionTree":
        out["tree"] = res.model.to_dict()
    if res.name == "RFR":
        out["config"] = res.model.config.to_dict()
    return out


def tree_model_markdown(res):
    out = [f"## {res.name}\n",
           f"Training rows: {res.train_rows.size}, test rows: {res.test_rows.size}\n"]
    rows = []
    for label, ev in (("Training", res.train_eval), ("Test", res.test_eval)):
        rows.append([label, fmt(ev.r2, ".4f"), fmt(ev.rmse), fmt(ev.mape_pct, ".3f"),
                     fmt(ev.correlation, ".4f")])
    out.append(md_table(["Set", "R-sq", "RMSE", "MAPE %", "Correlation"], rows))
    if "depth" in res.extra:
        out.append(f"\nDepth {res.extra['depth']}, {res.extra['leaf_count']} leaves\n")
    if "oob" in res.extra:
        o = res.extra["oob"]
        out.append(f"\nOut-of-bag: R-sq = {fmt(o.oob_r2, '.4f')}, RMSE = {fmt(o.oob_rmse)}, "
                   f"rows covered = {o.covered_rows}\n")
    if "importance" in res.extra:
        out.append("\n### Feature importance\n")
        pairs = sorted(res.extra["importance"].as_pairs(), key=lambda p: -p[1])
        out.append(md_table(["Feature", "Importance"], [[n, fmt(v, ".4f")] for n, v in pairs]))
    return "\n".join(out)


# -- comparison --------------------------------------------------------------

def comparison_markdown(report):
    rows = []
    for r in report.rows:
        corr = (fmt(r.correlation, ".4f") if r.validation_kind != "test R-sq"
                else f"{fmt(r.correlation_train, '.4f')} / {fmt(r.correlation_test, '.4f')}")
        rows.append([r.model, fmt(r.training_accuracy, ".2f"), fmt(r.validation_accuracy, ".2f"),
                     r.validation_kind, corr, fmt(r.max_vif, ".2f"),
                     "yes" if r.overfit_flag else "no",
                     "yes" if r.multicollinearity_flag else "no",
                     "yes" if r.outlier_flag else "no"])
    text = "## Performance comparison\n\n" + md_table(
        ["Model", "Training accuracy %", "Validation accuracy %", "Validation",
         "Correlation (train / test)", "Max VIF", "Overfit", "Multicollinearity", "Outliers"],
        rows)
    text += (f"\nAccuracy is R-sq in percent. Linear models: training = R-sq(adj), "
             f"validation = k-fold CV R-sq. Tree models: training and held-out test R-sq. "
             f"Overfit means training exceeds validation by more than "
             f"{report.overfit_gap:g} points; multicollinearity means a VIF above 10; "
             f"outliers means a standardized residual beyond 3.\n")
    return text


# -- plot data ---------------------------------------------------------------

def emit_plot_data(result, out_dir):
    """Write the plot-data CSV files and return their paths."""
    out = ensure_dir(out_dir)
    paths = []
    for name, mlr in ((MODELS[0], result.mlr_raw), (MODELS[1], result.mlr_transformed)):
        fit = mlr.fit
        paths.append(write_csv(out / f"predicted_vs_actual_{MODEL_SLUGS[name]}.csv",
                               ["actual", "predicted"], zip(fit.y, fit.fitted)))
    y = result.dataset.column(result.response)
    for res in (result.tree, result.forest):
        slug = MODEL_SLUGS[res.name]
        paths.append(write_csv(out / f"predicted_vs_actual_{slug}.csv", ["actual", "predicted"],
                               zip(y[res.test_rows], res.test_pred)))
        paths.append(write_csv(out / f"predicted_vs_actual_{slug}_train.csv",
                               ["actual", "predicted"], zip(y[res.train_rows], res.train_pred)))
    paths.append(write_residuals(result.mlr_transformed, out / "residuals_mlr2.csv"))
    imp = result.forest.extra["importance"]
    paths.append(write_csv(out / "importance_rfr.csv", ["feature", "importance"],
                           imp.as_pairs()))
    return paths


def write_residuals(mlr, path):
    """Residuals sorted ascending, so the normal-score column strictly increases."""
    diag = mlr.residuals
    fit = mlr.fit
    rank = diag.normal_plot_rows
    q = diag.normal_plot_points[:, 0]
    rows = [(int(i) + 1, fit.fitted[i], fit.residuals[i], qi) for i, qi in zip(rank, q)]
    return write_csv(path, ["order", "fitted", "residual", "theoretical_quantile"], rows)


# -- figures -----------------------------------------------------------------

def render_figures(result, out_dir):
    from . import plotting

    out = ensure_dir(out_dir)
    paths = [plotting.histograms(result.profile, out / "histograms_raw.png", "Raw data"),
             plotting.histograms(result.transformed_profile, out / "histograms_transformed.png",
                                 "After Box-Cox")]
    for col, search in result.transform.searches.items():
        paths.append(plotting.lambda_profile(result.dataset.column(col), search,
                                             out / f"boxcox_lambda_{col}.png", col))
    for name, mlr in ((MODELS[0], result.mlr_raw), (MODELS[1], result.mlr_transformed)):
        slug = MODEL_SLUGS[name]
        paths.append(plotting.predicted_vs_actual(mlr.fit.y, mlr.fit.fitted,
                                                  out / f"predicted_vs_actual_{slug}.png",
                                                  name, "fitted"))
        paths.append(plotting.residual_panels(mlr.residuals, out / f"residuals_{slug}.png",
                                              f"Residual plots: {name}"))
    y = result.dataset.column(result.response)
    for res in (result.tree, result.forest):
        paths.append(plotting.predicted_vs_actual(
            y[res.test_rows], res.test_pred,
            out / f"predicted_vs_actual_{MODEL_SLUGS[res.name]}.png", f"{res.name} (test set)"))
    paths.append(plotting.importance_bars(result.forest.extra["importance"],
                                          out / "importance_rfr.png"))
    paths.append(plotting.accuracy_comparison(result.report, out / "accuracy_comparison.png"))
    return paths


# -- full report -------------------------------------------------------------

def write_full_report(result, out_dir, figures=True):
    """Everything for one pipeline run: JSON, markdown, CSV and (optionally) figures."""
    out = ensure_dir(out_dir)
    written = [write_json(out / "config.json", result.config.to_dict()),
               write_json(out / "profile.json",
                          {"raw": profile_dict(result.profile),
                           "transformed": profile_dict(result.transformed_profile)}),
               write_json(out / "transform.json", transform_dict(result.transform))]
    md = ["# Regression model comparison\n",
          f"Response: {result.response}; predictors: {', '.join(result.predictors)}; "
          f"rows: {result.dataset.n}\n",
          comparison_markdown(result.report),
          profile_markdown(result.profile, "Descriptive statistics (raw)"),
          transform_markdown(result.transform),
          profile_markdown(result.transformed_profile, "Descriptive statistics (transformed)")]
    for name, mlr in ((MODELS[0], result.mlr_raw), (MODELS[1], result.mlr_transformed)):
        slug = MODEL_SLUGS[name]
        written.append(write_json(out / f"{slug}.json", mlr_dict(mlr, name)))
        text = mlr_markdown(mlr, name)
        written.append(write_text(out / f"{slug}.md", text))
        md.append(text)
    for res in (result.tree, result.forest):
        slug = MODEL_SLUGS[res.name]
        written.append(write_json(out / f"{slug}.json", tree_model_dict(res)))
        text = tree_model_markdown(res)
        written.append(write_text(out / f"{slug}.md", text))
        md.append(text)
    written.append(write_json(out / "comparison.json", result.report.to_dict()))
    written.append(write_text(out / "comparison.md", comparison_markdown(result.report)))
    written.append(write_text(out / "report.md", "\n".join(md)))
    written += emit_plot_data(result, out)
    if figures:
        written += render_figures(result, out / "figures")
    return written
