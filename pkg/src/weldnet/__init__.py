"""Block-wise neural regression for weld bead parameter estimation."""

from .baselines import (
    McrParams,
    OptimizerState,
    linear_predict,
    mcr_fit,
    normal_equation_fit,
    optimizer_step,
    optimizer_train,
    plain_ann_train,
)
from .block import (
    BlockMetaParams,
    RegressionBlock,
    StepResult,
    TrainingTrace,
    backprop_step,
    compute_nu,
    cost,
    forward,
    init_block,
    select_tau,
    sigmoid,
    train,
    weighted_estimate,
)
from .dataset import (
    Dataset,
    ScalerParams,
    append_bias,
    bead_surfaces,
    combine,
    load_csv,
    polynomial_expand,
    save_csv,
    split,
    standardize,
    synthesize_weld,
)
from .metrics import (
    MetricsReport,
    confidence_interval,
    kendall,
    pe,
    pearson,
    rmse,
    spearman,
    zscore,
)
from .model import (
    AggregateModel,
    load,
    predict,
    resize_hidden,
    save,
    train_all,
)
from .search import SearchSpace, evaluate_point, grid_search

__all__ = [name for name in dir() if not name.startswith("_")]
