"""Command-line driver: ``regcompare <command> [options]``.

Commands
--------
synth        write a synthetic d-value table to CSV
profile      descriptive statistics, histograms and the correlation matrix
transform    Box-Cox lambda search and the transformed table
fit-mlr      stepwise linear models on raw and/or transformed columns
fit-tree     a single CART regression tree on the training split
fit-forest   a random forest on the same split
compare      every stage above plus the four-model comparison

Option values come from built-in defaults, then ``--config`` (a flat JSON
object whose keys are the long flag names), then the command line.
"""

import argparse
import json
import sys
from pathlib import Path

from . import __version__, report
from .dataset import Dataset
from .forest import ForestConfig
from .linreg import StepwiseConfig
from .pipeline import (MODEL_SLUGS, MODELS, PipelineConfig, PipelineError, correlation_matrix,
                       fit_forest, fit_mlr, fit_tree, load_input, profile, raw_scale_metrics,
                       resolve_columns, run_pipeline, run_stage, transform_columns)
from .tree import TreeConfig

DEFAULTS = {
    "input": "synthetic",
    "rows": 124,
    "seed": 0,
    "response": None,
    "predictors": None,
    "out": "regcompare-out",
    "folds": 10,
    "test_fraction": 0.2,
    "trees": 100,
    "max_depth": None,
    "min_samples_split": 2,
    "min_samples_leaf": 1,
    "alpha_enter": 0.15,
    "alpha_remove": 0.15,
    "feature_subset": "all",
    "overfit_gap": 3.0,
    "transform": [],
    "transform_default": "on",
    "jobs": 1,
    "no_figures": False,
}


class ConfigError(ValueError):
    pass


def feature_subset_arg(text):
    text = str(text).strip().lower()
    if text in ("sqrt", "all"):
        return text
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected 'sqrt', 'all' or a positive integer, got {text!r}") from None
    if k < 1:
        raise argparse.ArgumentTypeError("feature subset size must be at least 1")
    return k


def predictors_arg(text):
    cols = [c.strip() for c in str(text).split(",") if c.strip()]
    if not cols:
        raise argparse.ArgumentTypeError("empty predictor list")
    return cols


def transform_arg(text):
    col, sep, mode = str(text).partition("=")
    if not sep or not col or mode not in ("on", "off", "auto"):
        raise argparse.ArgumentTypeError(f"expected COLUMN=on|off|auto, got {text!r}")
    return col, mode


def _common_parser():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("data")
    g.add_argument("--config", metavar="FILE", help="flat JSON file of option defaults")
    g.add_argument("--input", help='CSV file with a header row, or "synthetic"')
    g.add_argument("--rows", type=int, help="rows to generate for synthetic input (default 124)")
    g.add_argument("--seed", type=int, help="master seed for generation, splits, CV and forests")
    g.add_argument("--response", help="response column (default d80, else the last column)")
    g.add_argument("--predictors", type=predictors_arg, metavar="A,B,...",
                   help="comma-separated predictor columns (default: all others)")
    g.add_argument("--out", metavar="DIR", help="output directory")
    g = p.add_argument_group("models")
    g.add_argument("--folds", type=int, help="cross-validation folds (default 10)")
    g.add_argument("--test-fraction", type=float, help="held-out share for tree models (0.2)")
    g.add_argument("--trees", type=int, help="forest size (default 100)")
    g.add_argument("--max-depth", type=int, help="tree depth limit (default: none)")
    g.add_argument("--min-samples-split", type=int)
    g.add_argument("--min-samples-leaf", type=int)
    g.add_argument("--alpha-enter", type=float, help="stepwise entry threshold (0.15)")
    g.add_argument("--alpha-remove", type=float, help="stepwise removal threshold (0.15)")
    g.add_argument("--feature-subset", type=feature_subset_arg, metavar="{sqrt|all|K}",
                   help="features tried per forest node (default all)")
    g.add_argument("--transform", type=transform_arg, action="append", metavar="COL=MODE",
                   help="per-column Box-Cox mode: on, off or auto (repeatable)")
    g.add_argument("--transform-default", choices=("on", "off", "auto"),
                   help="Box-Cox mode for columns without --transform (default on)")
    g = p.add_argument_group("output")
    g.add_argument("--overfit-gap", type=float,
                   help="training minus validation accuracy, in points, that flags overfit")
    g.add_argument("--jobs", type=int, help="worker threads for forest fitting")
    g.add_argument("--no-figures", action="store_const", const=True,
                   help="skip the PNG figures")
    return p


def build_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="regcompare",
        description="Compare raw MLR, Box-Cox stepwise MLR, CART and random forest "
                    "regression on a tabular dataset.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)
    sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    sub.add_parser("profile", parents=[common], help="summaries, histograms, correlations")
    sub.add_parser("transform", parents=[common], help="Box-Cox transform the columns")
    p = sub.add_parser("fit-mlr", parents=[common], help="stepwise linear regression")
    p.add_argument("--model", choices=("raw", "transformed", "both"), default="both")
    sub.add_parser("fit-tree", parents=[common], help="single regression tree")
    p = sub.add_parser("fit-forest", parents=[common], help="random forest regression")
    p.add_argument("--save-model", action="store_true",
                   help="also write every tree to rfr_model.json")
    sub.add_parser("compare", parents=[common], help="full four-model comparison")
    return parser


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    out = {}
    for key, value in data.items():
        k = key.replace("-", "_")
        if k not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(value, (dict, list)) and k not in ("predictors", "transform"):
            raise ConfigError(f"config key {key!r} must be a scalar")
        out[k] = value
    return out


def _config_value(key, value):
    """Coerce a config-file value the way argparse would coerce the flag."""
    if value is None:
        return None
    try:
        if key == "predictors":
            return list(value) if isinstance(value, list) else predictors_arg(value)
        if key == "transform":
            if isinstance(value, dict):
                return [transform_arg(f"{c}={m}") for c, m in value.items()]
            return [transform_arg(v) for v in value]
        if key == "feature_subset":
            return feature_subset_arg(value)
    except argparse.ArgumentTypeError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from None
    if key == "no_figures":
        return bool(value)
    default = DEFAULTS[key]
    if isinstance(default, bool) or default is None:
        return value
    try:
        return type(default)(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r}: cannot use {value!r}") from None


def resolve_options(args):
    """Merge defaults, config file and explicit flags into one dict."""
    opts = dict(DEFAULTS)
    if args.config:
        for k, v in load_config(args.config).items():
            opts[k] = _config_value(k, v)
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None:
            opts[k] = v
    return opts


def pipeline_config(opts):
    try:
        tree_cfg = TreeConfig(opts["max_depth"], opts["min_samples_split"],
                              opts["min_samples_leaf"], opts["seed"])
        forest_cfg = ForestConfig(opts["trees"], opts["feature_subset"], tree_cfg,
                                  seed=opts["seed"])
        stepwise = StepwiseConfig(opts["alpha_enter"], opts["alpha_remove"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if opts["folds"] < 2:
        raise ConfigError("--folds must be at least 2")
    if opts["jobs"] < 1:
        raise ConfigError("--jobs must be at least 1")
    if opts["rows"] < 10:
        raise ConfigError("--rows must be at least 10")
    if not 0.0 < opts["test_fraction"] < 1.0:
        raise ConfigError("--test-fraction must lie strictly between 0 and 1")
    return PipelineConfig(
        input=opts["input"], n_rows=opts["rows"], seed=opts["seed"],
        response=opts["response"], predictors=opts["predictors"],
        transform_map=dict(opts["transform"]), transform_default=opts["transform_default"],
        stepwise=stepwise, cv_folds=opts["folds"], test_fraction=opts["test_fraction"],
        tree_cfg=tree_cfg, forest_cfg=forest_cfg, overfit_gap=opts["overfit_gap"],
        n_jobs=opts["jobs"])


# -- commands ----------------------------------------------------------------

def _prepare(cfg):
    ds = run_stage("load", load_input, cfg)
    response, predictors = run_stage("columns", resolve_columns, cfg, ds)
    return ds, response, predictors


def cmd_synth(cfg, opts, args, out):
    if cfg.input != "synthetic":
        raise ConfigError("synth generates data; drop --input")
    ds = run_stage("load", load_input, cfg)
    path = out / "synthetic.csv"
    ds.to_csv(path)
    return [path]


def cmd_profile(cfg, opts, args, out):
    ds, response, predictors = _prepare(cfg)
    prof = run_stage("profile", profile, ds, predictors + [response])
    prof.correlation = run_stage("profile", correlation_matrix, ds, predictors)
    paths = [report.write_json(out / "profile.json", report.profile_dict(prof)),
             report.write_text(out / "profile.md", report.profile_markdown(prof))]
    if not opts["no_figures"]:
        from . import plotting
        paths.append(plotting.histograms(prof, report.ensure_dir(out / "figures")
                                         / "histograms_raw.png"))
    print(report.profile_markdown(prof))
    return paths


def cmd_transform(cfg, opts, args, out):
    ds, response, predictors = _prepare(cfg)
    tr = run_stage("transform", transform_columns, ds, predictors + [response], cfg)
    cols = [tr.renamed[c] for c in predictors + [response]]
    Dataset({c: tr.dataset.column(c) for c in cols}).to_csv(out / "transformed.csv")
    paths = [out / "transformed.csv",
             report.write_json(out / "transform.json", report.transform_dict(tr)),
             report.write_text(out / "transform.md", report.transform_markdown(tr))]
    if not opts["no_figures"]:
        from . import plotting
        fig_dir = report.ensure_dir(out / "figures")
        for col, search in tr.searches.items():
            paths.append(plotting.lambda_profile(ds.column(col), search,
                                                 fig_dir / f"boxcox_lambda_{col}.png", col))
    print(report.transform_markdown(tr))
    return paths


def cmd_fit_mlr(cfg, opts, args, out):
    ds, response, predictors = _prepare(cfg)
    paths = []
    todo = []
    if args.model in ("raw", "both"):
        todo.append((MODELS[0], run_stage("mlr_raw", fit_mlr, ds, response, predictors, cfg)))
    if args.model in ("transformed", "both"):
        tr = run_stage("transform", transform_columns, ds, predictors + [response], cfg)
        t_pred = [tr.renamed[p] for p in predictors]
        mlr = run_stage("mlr_transformed", fit_mlr, tr.dataset, tr.renamed[response], t_pred, cfg)
        mlr.raw_scale = run_stage("mlr_transformed", raw_scale_metrics, mlr, tr, ds, response)
        todo.append((MODELS[1], mlr))
        paths.append(report.write_residuals(mlr, out / "residuals_mlr2.csv"))
    for name, mlr in todo:
        slug = MODEL_SLUGS[name]
        paths.append(report.write_json(out / f"{slug}.json", report.mlr_dict(mlr, name)))
        text = report.mlr_markdown(mlr, name)
        paths.append(report.write_text(out / f"{slug}.md", text))
        paths.append(report.write_csv(out / f"predicted_vs_actual_{slug}.csv",
                                      ["actual", "predicted"], zip(mlr.fit.y, mlr.fit.fitted)))
        if not opts["no_figures"]:
            from . import plotting
            fig_dir = report.ensure_dir(out / "figures")
            paths.append(plotting.residual_panels(mlr.residuals, fig_dir / f"residuals_{slug}.png",
                                                  f"Residual plots: {name}"))
        print(text)
    return paths


def _tree_like(res, ds, response, out, opts):
    slug = MODEL_SLUGS[res.name]
    y = ds.column(response)
    paths = [report.write_json(out / f"{slug}.json", report.tree_model_dict(res)),
             report.write_text(out / f"{slug}.md", report.tree_model_markdown(res)),
             report.write_csv(out / f"predicted_vs_actual_{slug}.csv", ["actual", "predicted"],
                              zip(y[res.test_rows], res.test_pred)),
             report.write_csv(out / f"predicted_vs_actual_{slug}_train.csv",
                              ["actual", "predicted"], zip(y[res.train_rows], res.train_pred))]
    if not opts["no_figures"]:
        from . import plotting
        fig_dir = report.ensure_dir(out / "figures")
        paths.append(plotting.predicted_vs_actual(y[res.test_rows], res.test_pred,
                                                  fig_dir / f"predicted_vs_actual_{slug}.png",
                                                  f"{res.name} (test set)"))
    print(report.tree_model_markdown(res))
    return paths


def cmd_fit_tree(cfg, opts, args, out):
    ds, response, predictors = _prepare(cfg)
    res = run_stage("tree", fit_tree, ds, response, predictors, cfg)
    return _tree_like(res, ds, response, out, opts)


def cmd_fit_forest(cfg, opts, args, out):
    ds, response, predictors = _prepare(cfg)
    res = run_stage("forest", fit_forest, ds, response, predictors, cfg)
    paths = _tree_like(res, ds, response, out, opts)
    imp = res.extra["importance"]
    paths.append(report.write_csv(out / "importance_rfr.csv", ["feature", "importance"],
                                  imp.as_pairs()))
    if not opts["no_figures"]:
        from . import plotting
        paths.append(plotting.importance_bars(imp, out / "figures" / "importance_rfr.png"))
    if args.save_model:
        paths.append(report.write_text(out / "rfr_model.json", res.model.to_json() + "\n"))
    return paths


def cmd_compare(cfg, opts, args, out):
    result = run_pipeline(cfg)
    paths = report.write_full_report(result, out, figures=not opts["no_figures"])
    print(report.comparison_markdown(result.report))
    return paths


COMMANDS = {
    "synth": cmd_synth, "profile": cmd_profile, "transform": cmd_transform,
    "fit-mlr": cmd_fit_mlr, "fit-tree": cmd_fit_tree, "fit-forest": cmd_fit_forest,
    "compare": cmd_compare,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve_options(args)
        cfg = pipeline_config(opts)
    except ConfigError as exc:
        parser.error(str(exc))
    try:
        out = report.ensure_dir(Path(opts["out"]))
        paths = COMMANDS[args.command](cfg, opts, args, out)
    except PipelineError as exc:
        print(f"regcompare: error: {exc}", file=sys.stderr)
        return 1
    except report.ReportError as exc:
        print(f"regcompare: error: stage 'report' failed: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        parser.error(str(exc))
    print(f"wrote {len(paths)} file(s) under {out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
