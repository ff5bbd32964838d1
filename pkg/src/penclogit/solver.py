"""Penalized Newton iterations with a cyclic coordinate descent inner loop.

At a fixed ``lambda`` the objective is

    -l(beta) + lambda * (alpha * |beta|_1 + (1 - alpha) / 2 * |beta|_2^2).

Each outer step expands ``l`` to second order at the current point and
minimizes the penalized quadratic one coordinate at a time with
soft-thresholding updates.  If an outer step raises the exact objective it
is shrunk toward the expansion point by halving.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .data import Dataset
from .exceptions import ConvergenceError, ParameterError
from .likelihood import QuadraticModel, score_hessian

__all__ = [
    "PenaltyConfig",
    "soft_threshold",
    "penalty",
    "objective",
    "cd_epoch",
    "newton_solve",
    "SolveResult",
]

DAMPING = (1.0, 0.5, 0.25, 0.125)


@dataclass(frozen=True)
class PenaltyConfig:
    alpha: float = 1.0
    lam: float = 0.0
    inner_tol: float = 1e-7
    outer_tol: float = 1e-6
    obj_rtol: float = 1e-13
    max_inner: int = 10_000
    max_outer: int = 35
    method: str = "coords"

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.lam < 0:
            raise ParameterError(f"lambda must be >= 0, got {self.lam}")
        if self.inner_tol <= 0 or self.outer_tol <= 0:
            raise ParameterError("tolerances must be positive")
        if self.max_inner < 1 or self.max_outer < 1:
            raise ParameterError("iteration caps must be >= 1")

    def at(self, lam: float) -> "PenaltyConfig":
        return replace(self, lam=float(lam))


def soft_threshold(x, t):
    """``sign(x) * max(|x| - t, 0)``."""
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def penalty(beta, alpha: float) -> float:
    beta = np.asarray(beta)
    return float(alpha * np.abs(beta).sum() + 0.5 * (1.0 - alpha) * (beta @ beta))


def objective(loglik: float, beta, cfg: PenaltyConfig) -> float:
    return -loglik + cfg.lam * penalty(beta, cfg.alpha)


@njit(cache=True, nogil=True)
def _cd_sweeps(H, r, b, thr, denom, tol, max_sweeps):
    """Cyclic soft-threshold sweeps; updates ``r`` and ``b`` in place.

    Returns the number of sweeps used, or -1 when ``max_sweeps`` ran out.
    """
    c = b.shape[0]
    for sweep in range(max_sweeps):
        max_delta = 0.0
        for a in range(c):
            old = b[a]
            z = r[a] + H[a, a] * old
            if denom[a] > 0.0:
                mag = abs(z) - thr
                new = 0.0
                if mag > 0.0:
                    new = (mag if z > 0.0 else -mag) / denom[a]
            else:
                new = 0.0
            delta = new - old
            if delta != 0.0:
                b[a] = new
                for l in range(c):
                    r[l] -= H[l, a] * delta
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if max_delta <= tol:
            return sweep + 1
    return -1


def cd_epoch(q: QuadraticModel, cfg: PenaltyConfig, beta_tilde, working_set) -> np.ndarray:
    """Minimize the penalized quadratic model over ``working_set``.

    Coordinates are visited in ascending order, repeatedly, until a full
    sweep moves no coordinate by more than ``cfg.inner_tol``.  Coordinates
    outside the working set keep their ``beta_tilde`` values.

    The quantity ``r = s - H (beta_hat - beta_tilde)`` is kept up to date
    after every coordinate move, so each update costs ``O(|working_set|)``.
    """
    beta_tilde = np.asarray(beta_tilde, dtype=float)
    beta = beta_tilde.copy()
    ws = np.asarray(sorted(set(int(j) for j in working_set)), dtype=int)
    if ws.size == 0:
        return beta
    pos = np.searchsorted(q.hess_idx, ws)
    if np.any(pos >= q.hess_idx.size) or np.any(q.hess_idx[np.minimum(pos, q.hess_idx.size - 1)] != ws):
        raise ParameterError("working set must be covered by the Hessian block")

    H = np.ascontiguousarray(q.H[np.ix_(pos, pos)])
    r = q.s[ws].copy()
    b = beta[ws].copy()
    denom = np.diag(H) + cfg.lam * (1.0 - cfg.alpha)
    sweeps = _cd_sweeps(H, r, b, cfg.lam * cfg.alpha, denom, cfg.inner_tol, cfg.max_inner)
    beta[ws] = b
    if sweeps > 0:
        return beta
    raise ConvergenceError(
        f"coordinate descent did not converge in {cfg.max_inner} sweeps", beta=beta
    )


@dataclass(frozen=True)
class SolveResult:
    beta: np.ndarray
    score: np.ndarray
    loglik: float
    objective: float
    n_outer: int
    n_damped: int
    inner_converged: bool = True


def newton_solve(ds: Dataset, cfg: PenaltyConfig, warm, working_set) -> SolveResult:
    """Minimize the penalized objective at ``cfg.lam`` over ``working_set``.

    Returns the solution together with the full score there, which the path
    driver uses for its optimality audit.  Stops when no coefficient moves
    by more than ``outer_tol`` in an outer step, or when the objective stalls
    to relative precision ``obj_rtol``.  An inner loop that runs out of
    sweeps still proposes its last iterate (subject to the descent check);
    ``inner_converged`` reports whether the final step was a full solve.

    Raises
    ------
    ConvergenceError
        After ``max_outer`` steps, or when no damped step reduces the
        objective.  ``beta``/``score`` on the exception hold the last
        accepted iterate.
    """
    ws = np.asarray(sorted(set(int(j) for j in working_set)), dtype=int)
    beta = np.array(warm, dtype=float, copy=True)
    q = score_hessian(ds, beta, ws, cfg.method)
    obj = objective(q.loglik, beta, cfg)
    if ws.size == 0:
        return SolveResult(beta, q.s, q.loglik, obj, 0, 0)

    n_damped = 0
    for it in range(1, cfg.max_outer + 1):
        try:
            target = cd_epoch(q, cfg, beta, ws)
            inner_ok = True
        except ConvergenceError as err:
            target, inner_ok = err.beta, False
        step = target - beta
        slack = 1e-10 * max(1.0, abs(obj))
        for gamma in DAMPING:
            trial = beta + gamma * step if gamma != 1.0 else target
            q_new = score_hessian(ds, trial, ws, cfg.method)
            obj_new = objective(q_new.loglik, trial, cfg)
            if obj_new <= obj + slack:
                break
        else:
            raise ConvergenceError(
                f"lambda={cfg.lam:.6g}: objective increased after {len(DAMPING)} damped steps",
                beta=beta,
                score=q.s,
            )
        if gamma != 1.0:
            n_damped += 1
        moved = float(np.max(np.abs(trial - beta)))
        stalled = abs(obj - obj_new) <= cfg.obj_rtol * max(1.0, abs(obj))
        beta, q, obj = trial, q_new, obj_new
        if moved <= cfg.outer_tol or stalled:
            return SolveResult(beta, q.s, q.loglik, obj, it, n_damped, inner_ok)
    raise ConvergenceError(
        f"lambda={cfg.lam:.6g}: no convergence in {cfg.max_outer} outer steps",
        beta=beta,
        score=q.s,
    )
