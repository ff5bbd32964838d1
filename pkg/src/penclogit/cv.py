"""Stratum-level cross-validation, threshold prediction and ROC summaries.

Cross-validation leaves out whole strata.  The score of fold ``i`` at
``lambda`` is the summed log conditional likelihood of its strata under the
coefficients fitted without them; the curve reported is its negation
averaged over folds, so smaller is better.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset, ScalingInfo
from .exceptions import ConvergenceError, ParameterError, PenclogitError
from .likelihood import stratum_loglik
from .path import GridSpec, PathSolution, fit_path
from .solver import PenaltyConfig

__all__ = [
    "FoldAssignment",
    "CVResult",
    "ThresholdSet",
    "make_folds",
    "cross_validate",
    "stratum_thresholds",
    "predict",
    "roc_points",
    "average_roc",
    "roc_auc",
]


@dataclass(frozen=True)
class FoldAssignment:
    nfolds: int
    fold_of_stratum: np.ndarray
    seed: int

    def members(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of_stratum == i)


def make_folds(ds: Dataset, nfolds: int, seed: int = 0) -> FoldAssignment:
    """Shuffle strata with ``seed`` and deal them round-robin into folds."""
    if not 2 <= nfolds <= ds.K:
        raise ParameterError(f"need 2 <= nfolds <= K={ds.K}, got {nfolds}")
    order = np.random.default_rng(seed).permutation(ds.K)
    fold = np.empty(ds.K, dtype=int)
    fold[order] = np.arange(ds.K) % nfolds
    return FoldAssignment(nfolds, fold, seed)


@dataclass(frozen=True)
class CVResult:
    lambdas: np.ndarray
    cv_mean: np.ndarray
    cv_se: np.ndarray
    per_fold: np.ndarray  # (folds used, nlambda) held-out log-likelihood
    folds_used: np.ndarray
    idx_min: int
    idx_1se: int
    path: PathSolution  # fit on all strata, defines the grid

    @property
    def lambda_min(self) -> float:
        return float(self.lambdas[self.idx_min])

    @property
    def lambda_1se(self) -> float:
        return float(self.lambdas[self.idx_1se])


def _select(cv_mean, cv_se):
    idx_min = int(np.argmin(cv_mean))
    bound = cv_mean[idx_min] + cv_se[idx_min]
    # grid is decreasing: the first qualifying index is the largest lambda
    idx_1se = int(np.flatnonzero(cv_mean <= bound)[0])
    return idx_min, idx_1se


def cross_validate(
    ds: Dataset,
    alpha: float,
    spec: GridSpec | None,
    folds: FoldAssignment,
    *,
    scaling: ScalingInfo | None = None,
    cfg: PenaltyConfig | None = None,
    threads: int = 1,
) -> CVResult:
    """K-fold cross-validation over a grid fixed by the full-data path.

    Fold paths reuse that grid and run to its end (no deviance cut-off) so
    every fold has a fit at every lambda.  A fold whose fit fails is dropped
    with a warning; fewer than two surviving folds is an error.
    """
    if folds.fold_of_stratum.size != ds.K:
        raise ParameterError("fold assignment does not match the dataset")
    master = fit_path(ds, alpha, spec, scaling=scaling, cfg=cfg)
    grid = master.lambdas

    def run(i):
        held = folds.members(i)
        train = np.flatnonzero(folds.fold_of_stratum != i)
        try:
            fp = fit_path(
                ds.subset(train), alpha, lambdas=grid, scaling=scaling,
                cfg=cfg, early_stop=None,
            )
            test = ds.subset(held)
            return np.array([stratum_loglik(test, b).sum() for b in fp.betas])
        except PenclogitError as err:
            warnings.warn(f"fold {i} dropped: {err}", stacklevel=2)
            return None

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, range(folds.nfolds)))
    else:
        results = [run(i) for i in range(folds.nfolds)]

    used = np.array([i for i, r in enumerate(results) if r is not None], dtype=int)
    if used.size < 2:
        raise ConvergenceError(f"only {used.size} fold(s) produced a path")
    per_fold = np.vstack([results[i] for i in used])
    loss = -per_fold
    cv_mean = loss.mean(axis=0)
    cv_se = loss.std(axis=0, ddof=1) / np.sqrt(used.size)
    idx_min, idx_1se = _select(cv_mean, cv_se)
    return CVResult(grid.copy(), cv_mean, cv_se, per_fold, used, idx_min, idx_1se, master)


@dataclass(frozen=True)
class ThresholdSet:
    """Per-stratum cut-offs on the linear predictor scale.

    ``degenerate`` marks strata whose linear predictors were all equal;
    they abstain from committee votes.
    """

    t: np.ndarray
    errors: np.ndarray
    degenerate: np.ndarray


def _best_threshold(eta, m):
    """Observed value of ``eta`` minimising misclassifications of the rule
    "case iff eta > t"; ties go to the smallest threshold."""
    is_case = np.zeros(eta.size, dtype=bool)
    is_case[:m] = True
    cand = np.unique(eta)
    # errors(t) = cases with eta <= t + controls with eta > t
    case_le = np.searchsorted(np.sort(eta[is_case]), cand, side="right")
    ctrl_gt = (~is_case).sum() - np.searchsorted(np.sort(eta[~is_case]), cand, side="right")
    err = case_le + ctrl_gt
    best = int(np.argmin(err))
    return cand[best], int(err[best])


def stratum_thresholds(ds: Dataset, beta) -> ThresholdSet:
    beta = np.asarray(beta, dtype=float)
    t = np.empty(ds.K)
    errors = np.empty(ds.K, dtype=int)
    degenerate = np.zeros(ds.K, dtype=bool)
    for k, st in enumerate(ds.strata):
        eta = st.X @ beta
        if np.all(eta == eta[0]):
            t[k] = eta[0]
            errors[k] = min(st.m, st.n - st.m)
            degenerate[k] = True
        else:
            t[k], errors[k] = _best_threshold(eta, st.m)
    return ThresholdSet(t, errors, degenerate)


def predict(newX, beta, thr: ThresholdSet, method: str = "mean") -> np.ndarray:
    """Case (1) / control (0) labels for new rows.

    ``mean`` compares each linear predictor with the average threshold.
    ``committee`` lets every non-degenerate stratum vote and takes the
    majority; a tied vote predicts control.
    """
    if thr.t.size == 0:
        raise ParameterError("empty threshold set")
    eta = np.atleast_2d(np.asarray(newX, dtype=float)) @ np.asarray(beta, dtype=float)
    if method == "mean":
        return (eta > thr.t.mean()).astype(int)
    if method == "committee":
        t = thr.t[~thr.degenerate]
        votes = (eta[:, None] > t[None, :]).sum(axis=1)
        return (2 * votes > t.size).astype(int)
    raise ParameterError(f"unknown prediction method {method!r}")


def roc_points(path, true_support) -> tuple[np.ndarray, np.ndarray]:
    """Per-lambda sensitivity and specificity of the selected support.

    ``path`` is a :class:`PathSolution` or a ``(nlambda, p)`` coefficient
    array.  Specificity is NaN when every predictor is truly active.
    """
    betas = path.betas if isinstance(path, PathSolution) else np.atleast_2d(path)
    p = betas.shape[1]
    truth = np.zeros(p, dtype=bool)
    truth[np.asarray(list(true_support), dtype=int)] = True
    if not truth.any():
        raise ParameterError("sensitivity is undefined for an empty true support")
    detected = betas != 0
    sens = (detected & truth).sum(axis=1) / truth.sum()
    n_zero = (~truth).sum()
    if n_zero:
        spec = (~detected & ~truth).sum(axis=1) / n_zero
    else:
        spec = np.full(betas.shape[0], np.nan)
    return sens, spec


def average_roc(curves) -> tuple[np.ndarray, np.ndarray]:
    """Pool ``(sens, spec)`` curves and average specificity at each unique
    sensitivity value."""
    sens = np.concatenate([np.asarray(c[0]) for c in curves])
    spec = np.concatenate([np.asarray(c[1]) for c in curves])
    levels = np.unique(sens)
    return levels, np.array([np.nanmean(spec[sens == v]) for v in levels])


def roc_auc(sens, spec) -> float:
    """Area under a specificity-vs-sensitivity curve, anchored at (0, 1)
    and (1, 0)."""
    x = np.concatenate([[0.0], sens, [1.0]])
    y = np.concatenate([[1.0], spec, [0.0]])
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))
