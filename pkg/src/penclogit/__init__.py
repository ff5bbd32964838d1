"""Elastic-net penalized conditional logistic regression for matched
case-control data, with exact likelihood recursions, strong-rule screened
paths, stratum-level cross-validation and a simulation harness."""

from .cv import (
    CVResult,
    FoldAssignment,
    ThresholdSet,
    average_roc,
    cross_validate,
    make_folds,
    predict,
    roc_auc,
    roc_points,
    stratum_thresholds,
)
from .data import Dataset, ScalingInfo, Stratum, build_dataset, standardize
from .exceptions import (
    ConvergenceError,
    DegenerateDataError,
    EmptyDatasetError,
    FormatError,
    NumericError,
    ParameterError,
    PenclogitError,
)
from .likelihood import (
    brute_force_model,
    deviance,
    log_cond_likelihood,
    norm_const,
    norm_const_derivs,
    score,
    score_hessian,
    stratum_loglik,
)
from .path import GridSpec, PathSolution, fit_path, kkt_check, lambda_max, make_grid, strong_set
from .simulate import SimConfig, SimTruth, simulate
from .solver import PenaltyConfig, cd_epoch, newton_solve, soft_threshold

__version__ = "0.1.0"
