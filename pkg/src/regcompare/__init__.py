"""Regression toolkit comparing linear, Box-Cox linear, tree and forest models."""

__version__ = "0.1.0"

from .dataset import Dataset, generate_synthetic, load_csv, summarize
from .forest import ForestConfig, RandomForest, forest_fit
from .linreg import OlsFit, ols_fit, stepwise_select
from .metrics import evaluate
from .pipeline import PipelineConfig, run_pipeline
from .transform import boxcox_apply, boxcox_inverse, boxcox_optimal_lambda
from .tree import RegressionTree, TreeConfig, tree_fit

__all__ = [
    "Dataset", "generate_synthetic", "load_csv", "summarize",
    "ForestConfig", "RandomForest", "forest_fit",
    "OlsFit", "ols_fit", "stepwise_select", "evaluate",
    "PipelineConfig", "run_pipeline",
    "boxcox_apply", "boxcox_inverse", "boxcox_optimal_lambda",
    "RegressionTree", "TreeConfig", "tree_fit",
]
