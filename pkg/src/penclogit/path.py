"""Regularization paths with warm starts and sequential strong-rule screening."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, ScalingInfo
from .exceptions import ConvergenceError, DegenerateDataError, ParameterError
from .likelihood import log_cond_likelihood, null_deviance, score
from .solver import PenaltyConfig, newton_solve

__all__ = [
    "GridSpec",
    "PathSolution",
    "lambda_max",
    "make_grid",
    "strong_set",
    "kkt_check",
    "fit_path",
]

log = logging.getLogger(__name__)

GRID_KINDS = ("logarithmic", "linear", "hybrid")
_ALIASES = {"log": "logarithmic", "lin": "linear"}


@dataclass(frozen=True)
class GridSpec:
    """How to lay out the decreasing lambda grid.

    ``logarithmic`` and ``linear`` run from ``lambda_max`` to
    ``epsilon * lambda_max`` in ``nlambda - 1`` equal ratios or equal gaps.

    ``hybrid`` starts with ``linear_steps`` linear jumps and finishes with
    logarithmic ones.  With ``hybrid_rule="jumps"`` (default) each jump has
    the size it would have in the pure grid of the same kind, so the grid
    stops short of ``epsilon * lambda_max`` (about ``0.032 * lambda_max`` for
    90/10).  With ``hybrid_rule="split"`` the linear part ends at
    ``split * lambda_max`` and the logarithmic part stretches to reach
    ``epsilon * lambda_max`` exactly.
    """

    kind: str = "hybrid"
    nlambda: int = 100
    epsilon: float = 1e-5
    linear_steps: int = 90
    hybrid_rule: str = "jumps"
    split: float = 0.1

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in GRID_KINDS:
            raise ParameterError(f"grid kind must be one of {GRID_KINDS}, got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.nlambda < 2:
            raise ParameterError("nlambda must be >= 2")
        if not 0.0 < self.epsilon < 1.0:
            raise ParameterError("epsilon must lie in (0, 1)")
        if kind == "hybrid":
            if self.hybrid_rule not in ("jumps", "split"):
                raise ParameterError(f"unknown hybrid rule {self.hybrid_rule!r}")
            if not 0 < self.linear_steps < self.nlambda - 1:
                raise ParameterError("hybrid grid needs 0 < linear_steps < nlambda - 1")
            if not self.epsilon < self.split < 1.0:
                raise ParameterError("hybrid split must lie in (epsilon, 1)")


def make_grid(spec: GridSpec, lmax: float) -> np.ndarray:
    """Decreasing grid of ``spec.nlambda`` values starting at ``lmax``."""
    if lmax <= 0:
        raise ParameterError("lambda_max must be positive")
    lmin = spec.epsilon * lmax
    gaps = spec.nlambda - 1
    if spec.kind == "logarithmic":
        grid = np.geomspace(lmax, lmin, spec.nlambda)
        grid[-1] = lmin
    elif spec.kind == "linear":
        grid = np.linspace(lmax, lmin, spec.nlambda)
        grid[-1] = lmin
    elif spec.hybrid_rule == "split":
        lsplit = spec.split * lmax
        head = np.linspace(lmax, lsplit, spec.linear_steps + 1)
        tail = np.geomspace(lsplit, lmin, spec.nlambda - spec.linear_steps)
        grid = np.concatenate([head, tail[1:]])
        grid[-1] = lmin
    else:
        step = (lmax - lmin) / gaps
        ratio = spec.epsilon ** (1.0 / gaps)
        head = lmax - step * np.arange(spec.linear_steps + 1)
        tail = head[-1] * ratio ** np.arange(1, gaps - spec.linear_steps + 1)
        grid = np.concatenate([head, tail])
    grid[0] = lmax
    return grid


def lambda_max(ds: Dataset, alpha: float, s0: np.ndarray | None = None) -> float:
    """Smallest lambda at which the all-zero model is optimal: ``max|s(0)|/alpha``."""
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")
    if s0 is None:
        s0 = score(ds, np.zeros(ds.p))
    top = float(np.max(np.abs(s0)))
    if top == 0.0:
        raise DegenerateDataError("score at zero vanishes: no predictor carries signal")
    return top / alpha


def strong_set(s_prev, lam_k, lam_prev, alpha, active_prev=()) -> np.ndarray:
    """Sequential strong rule: keep ``j`` with ``|s_j| > alpha (2 lam_k - lam_prev)``.

    Previously active coordinates are always kept.  A non-positive
    threshold keeps everything.
    """
    s_prev = np.asarray(s_prev, dtype=float)
    thr = alpha * (2.0 * lam_k - lam_prev)
    if thr <= 0:
        return np.arange(s_prev.size)
    keep = np.abs(s_prev) > thr
    keep[np.asarray(list(active_prev), dtype=int)] = True
    return np.flatnonzero(keep)


def kkt_check(s, beta, lam, alpha, tol=1e-4) -> np.ndarray:
    """Coordinates violating stationarity of the penalized objective.

    Zero coefficients need ``|s_j| <= lam*alpha*(1+tol)``; nonzero ones need
    ``|s_j - lam(1-alpha) b_j - lam*alpha*sign(b_j)| <= lam*alpha*tol``.
    """
    s = np.asarray(s, dtype=float)
    beta = np.asarray(beta, dtype=float)
    la = lam * alpha
    zero = beta == 0
    bad_zero = zero & (np.abs(s) > la * (1.0 + tol))
    resid = s - lam * (1.0 - alpha) * beta - la * np.sign(beta)
    bad_nz = ~zero & (np.abs(resid) > la * tol)
    return np.flatnonzero(bad_zero | bad_nz)


@dataclass(frozen=True)
class PathSolution:
    """Fitted path.  ``betas`` are on the fitting (standardized) scale."""

    lambdas: np.ndarray
    betas: np.ndarray  # (nlam, p)
    df: np.ndarray
    dev_explained: np.ndarray
    strong_sizes: np.ndarray  # initial strong set
    working_sizes: np.ndarray  # after KKT repair
    kkt_violations: np.ndarray  # screening misses found by the audit
    kkt_final: np.ndarray  # violations left after repair
    strong_misses: np.ndarray  # active coefficients outside the initial strong set
    converged: np.ndarray
    scaling: ScalingInfo
    alpha: float
    names: tuple[str, ...] = field(default=())
    null_deviance: float = float("nan")
    early_stopped: bool = False

    def __len__(self) -> int:
        return self.lambdas.size

    def original_betas(self) -> np.ndarray:
        return self.scaling.to_original(self.betas)

    def active(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.betas[k])


def fit_path(
    ds: Dataset,
    alpha: float = 1.0,
    spec: GridSpec | None = None,
    *,
    lambdas=None,
    scaling: ScalingInfo | None = None,
    screening: bool = True,
    early_stop: float | None = 0.99,
    cfg: PenaltyConfig | None = None,
    kkt_tol: float = 1e-4,
    max_repairs: int = 10,
) -> PathSolution:
    """Solve along a decreasing lambda grid, warm-starting each solve.

    Parameters
    ----------
    ds : Dataset
        Usually the output of :func:`~penclogit.data.standardize`.
    alpha : float
        Elastic-net mixing, ``1`` is the lasso.
    spec : GridSpec, optional
        Grid layout; ignored when ``lambdas`` is given.
    lambdas : array, optional
        Explicit decreasing grid (e.g. shared across CV folds).
    scaling : ScalingInfo, optional
        Columns it flags as excluded are never fitted.
    screening : bool
        Use the sequential strong rule; ``False`` solves over every
        coordinate at every lambda.
    early_stop : float or None
        Stop once the fraction of null deviance explained reaches this.
    """
    spec = spec or GridSpec()
    cfg = replace(cfg or PenaltyConfig(), alpha=alpha)
    p = ds.p
    scaling = scaling or ScalingInfo.identity(p)
    allowed = ~scaling.excluded

    beta = np.zeros(p)
    s = score(ds, beta, cfg.method)
    s[~allowed] = 0.0
    if lambdas is None:
        grid = make_grid(spec, lambda_max(ds, alpha, s))
    else:
        grid = np.asarray(lambdas, dtype=float)
        if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) >= 0) or grid[-1] <= 0:
            raise ParameterError("lambdas must be a positive, strictly decreasing sequence")
    D0 = null_deviance(ds)

    keys = ("beta", "df", "dev", "strong", "working", "viol", "final", "miss", "conv")
    rec = {k: [] for k in keys}
    ever = np.zeros(p, dtype=bool)
    lam_prev = None
    stopped = False
    allowed_idx = np.flatnonzero(allowed)

    for k, lam in enumerate(grid):
        step_cfg = cfg.at(lam)
        if not screening:
            work = allowed_idx.copy()
        elif lam_prev is None:
            # first grid point: screen against itself (threshold = alpha*lam)
            work = strong_set(s, lam, lam, alpha, np.flatnonzero(ever))
        else:
            work = strong_set(s, lam, lam_prev, alpha, np.flatnonzero(ever))
        work = work[allowed[work]]
        strong = work

        n_viol = 0
        viol = np.array([], dtype=int)
        for _ in range(max_repairs + 1):
            try:
                res = newton_solve(ds, step_cfg, beta, work)
                beta_new, s_new, loglik = res.beta, res.score, res.loglik
                converged = res.inner_converged
            except ConvergenceError as err:
                log.warning("%s", err)
                converged = False
                beta_new, s_new, loglik = err.beta, err.score, None
                if s_new is None:
                    s_new = score(ds, beta_new, cfg.method)
            s_new = s_new.copy()
            s_new[~allowed] = 0.0
            beta, s = beta_new, s_new
            viol = kkt_check(s, beta, lam, alpha, kkt_tol)
            if viol.size == 0:
                break
            outside = np.setdiff1d(viol, work)
            n_viol += outside.size
            if outside.size:
                work = np.union1d(work, outside)
            else:
                # all violators already free: tighten and polish
                step_cfg = replace(
                    step_cfg,
                    inner_tol=step_cfg.inner_tol * 0.01,
                    outer_tol=step_cfg.outer_tol * 0.01,
                )

        ever |= beta != 0
        if loglik is None:
            loglik = log_cond_likelihood(ds, beta)
        frac = (D0 + 2.0 * loglik) / D0
        rec["beta"].append(beta.copy())
        rec["df"].append(int(np.count_nonzero(beta)))
        rec["dev"].append(frac)
        rec["strong"].append(strong.size)
        rec["working"].append(work.size)
        rec["viol"].append(n_viol)
        rec["final"].append(viol.size)
        rec["miss"].append(np.setdiff1d(np.flatnonzero(beta), strong).size)
        rec["conv"].append(converged and viol.size == 0)
        lam_prev = lam
        if early_stop is not None and frac >= early_stop:
            stopped = k < grid.size - 1
            break

    n = len(rec["beta"])
    return PathSolution(
        lambdas=grid[:n].copy(),
        betas=np.array(rec["beta"]).reshape(n, p),
        df=np.array(rec["df"]),
        dev_explained=np.array(rec["dev"]),
        strong_sizes=np.array(rec["strong"]),
        working_sizes=np.array(rec["working"]),
        kkt_violations=np.array(rec["viol"]),
        kkt_final=np.array(rec["final"]),
        strong_misses=np.array(rec["miss"]),
        converged=np.array(rec["conv"]),
        scaling=scaling,
        alpha=alpha,
        names=ds.names,
        null_deviance=D0,
        early_stopped=stopped,
    )
