"""Exact conditional log-likelihood, score and Hessian.

The normalizing constant of a stratum with ``n`` rows and ``m`` cases,

    B(m, n) = sum over size-m subsets u of exp(beta' sum_{i in u} x_i),

is evaluated with Gail's recursion

    B(m, n) = B(m, n-1) + exp(beta' x_n) B(m-1, n-1),
    B(0, n) = 1,  B(m, n) = 0 for m > n,

and its first and second derivatives follow by differentiating both sides.
The recursion runs column by column (over ``n``) and is vectorized over
matrix rows, over derivative coordinates and over strata that share
``(n, m)``.

Overflow protection: every table cell ``(r, n')`` is stored divided by
``exp(sigma(r, n'))``, where ``sigma(r, n')`` is the sum of the ``r``
largest linear predictors among the first ``n'`` rows (the log of the
largest term in the cell).  ``sigma`` obeys the same recursion with
``(+, *)`` replaced by ``(max, +)``, and each scaled update multiplies by
two factors in ``[0, 1]``, so no cell overflows and the final cell is at
least 1.  ``log B`` is reported as ``log B_scaled + sigma(m, n)``; the
ratios ``Bdot / B`` and ``Bddot / B`` are unaffected.  With ``m = 1`` this
is the familiar max-shift.

Two equivalent routes produce the score and Hessian:

* ``"coords"`` (default) differentiates with respect to the coefficients
  directly: first-derivative tables for all ``p`` coordinates and
  second-derivative tables for the requested block only (upper triangle),
  in a compiled kernel restricted to the ``O(m (n - m))`` band of cells
  that can reach ``(m, n)``.
* ``"obs"`` differentiates with respect to the ``n`` linear predictors of
  the stratum, which yields the inclusion probabilities ``pi`` and their
  second moments, then maps through the design:
  ``Bdot/B = X' pi`` and ``Bddot/B = X' E[z z'] X``.

The ``"obs"`` route shares no code with the compiled kernel and serves as a
cross-check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .data import Dataset, Stratum, StratumGroup
from .exceptions import NumericError, ParameterError

__all__ = [
    "RecursionWorkspace",
    "QuadraticModel",
    "BruteForceResult",
    "norm_const",
    "norm_const_derivs",
    "score_hessian",
    "score",
    "log_cond_likelihood",
    "stratum_loglik",
    "deviance",
    "null_deviance",
    "brute_force_model",
]

BRUTE_FORCE_LIMIT = 10**6


def _rescale(sig, eta_i):
    """Scale update for one new row: the new log-scales and the factors
    applied to the "skip" and "take" terms.  Both factors lie in [0, 1]."""
    old = sig[:, 1:]
    take = eta_i[:, None] + sig[:, :-1]
    new = np.maximum(old, take)
    reach = np.isfinite(new)
    safe = np.where(reach, new, 0.0)
    f_skip = np.where(reach & np.isfinite(old), np.exp(old - safe), 0.0)
    f_take = np.where(reach, np.exp(take - safe), 0.0)
    return new, f_skip, f_take


def _gail(eta, Z, m, pair_idx=None, keep_tables=False):
    """Run the scaled recursion over whole table columns (numpy).

    Parameters
    ----------
    eta : (G, n) array
        Linear predictors.
    Z : (G, n, d) array or None
        Regressors for first derivatives; ``None`` skips derivatives.
    m : int
    pair_idx : int array, optional
        Positions in ``range(d)`` whose pairwise second derivatives are
        wanted.
    keep_tables : bool
        Also return every column of every table (for inspection).

    Returns
    -------
    B : (G,), D : (G, d) or None, S : (G, c, c) or None, sigma : (G,), tables
        Values at ``(m, n)`` on the scale ``exp(sigma)``.
    """
    G, n = eta.shape
    B = np.zeros((G, m + 1))
    B[:, 0] = 1.0
    sig = np.full((G, m + 1), -np.inf)
    sig[:, 0] = 0.0
    D = S = None
    if Z is not None:
        D = np.zeros((G, m + 1, Z.shape[2]))
        if pair_idx is not None:
            c = len(pair_idx)
            S = np.zeros((G, m + 1, c, c))
    tables = None
    if keep_tables:
        tables = {"B": [B.copy()], "D": [None if D is None else D.copy()],
                  "S": [None if S is None else S.copy()], "sigma": [sig.copy()]}

    for i in range(n):
        new, fs, ft = _rescale(sig, eta[:, i])
        Bp = B[:, :-1]
        if Z is not None:
            x = Z[:, i, :]
            if S is not None:
                xc = x[:, pair_idx]
                Dc = D[:, :-1, pair_idx]
                cross = xc[:, None, :, None] * Dc[:, :, None, :]
                S[:, 1:] = fs[:, :, None, None] * S[:, 1:] + ft[:, :, None, None] * (
                    S[:, :-1]
                    + cross
                    + cross.transpose(0, 1, 3, 2)
                    + (xc[:, :, None] * xc[:, None, :])[:, None] * Bp[:, :, None, None]
                )
            D[:, 1:] = fs[:, :, None] * D[:, 1:] + ft[:, :, None] * (
                D[:, :-1] + x[:, None, :] * Bp[:, :, None]
            )
        B[:, 1:] = fs * B[:, 1:] + ft * Bp
        sig[:, 1:] = new
        if keep_tables:
            tables["B"].append(B.copy())
            tables["D"].append(None if D is None else D.copy())
            tables["S"].append(None if S is None else S.copy())
            tables["sigma"].append(sig.copy())

    return (
        B[:, m],
        None if D is None else D[:, m],
        None if S is None else S[:, m],
        sig[:, m],
        tables,
    )


@njit(cache=True, nogil=True)
def _gail_coords(eta, Z, m, pair_idx):
    """Banded scaled recursion for ``B``, ``Bdot`` over all ``d`` regressors
    and the upper triangle of ``Bddot`` over ``pair_idx``.

    Only table rows that can still reach ``(m, n)`` are updated, so a
    stratum costs ``O(m (n - m))`` cells.  Rows are swept in descending
    order so each update reads the previous column's values in place.
    """
    G, n = eta.shape
    d = Z.shape[2]
    c = pair_idx.shape[0]
    Bout = np.empty(G)
    Dout = np.empty((G, d))
    Sout = np.empty((G, c, c))
    sig_out = np.empty(G)
    for g in range(G):
        B = np.zeros(m + 1)
        B[0] = 1.0
        sig = np.full(m + 1, -np.inf)
        sig[0] = 0.0
        D = np.zeros((m + 1, d))
        S = np.zeros((m + 1, c, c))
        xc = np.empty(c)
        T = np.empty(c)
        for i in range(n):
            e = eta[g, i]
            lo = max(1, m - (n - i - 1))
            hi = min(m, i + 1)
            for a in range(c):
                xc[a] = Z[g, i, pair_idx[a]]
            for r in range(hi, lo - 1, -1):
                take = e + sig[r - 1]
                if take >= sig[r]:
                    # new row carries the largest term: rescale the old cell
                    fs = np.exp(sig[r] - take) if r <= i else 0.0
                    ft = 1.0
                    sig[r] = take
                else:
                    fs = 1.0
                    ft = np.exp(take - sig[r])
                Bp = B[r - 1]
                # x Dc' + Dc x' + x x' Bp == x T' + T x' with T = Dc + x Bp / 2
                for a in range(c):
                    T[a] = D[r - 1, pair_idx[a]] + 0.5 * xc[a] * Bp
                for a in range(c):
                    xa = xc[a]
                    Ta = T[a]
                    Sr = S[r, a]
                    Sq = S[r - 1, a]
                    if fs == 1.0:
                        for b in range(a, c):
                            Sr[b] += ft * (Sq[b] + xa * T[b] + Ta * xc[b])
                    else:
                        for b in range(a, c):
                            Sr[b] = fs * Sr[b] + (Sq[b] + xa * T[b] + Ta * xc[b])
                if fs == 1.0:
                    for j in range(d):
                        D[r, j] += ft * (D[r - 1, j] + Z[g, i, j] * Bp)
                    B[r] += ft * Bp
                else:
                    for j in range(d):
                        D[r, j] = fs * D[r, j] + (D[r - 1, j] + Z[g, i, j] * Bp)
                    B[r] = fs * B[r] + Bp
        Bout[g] = B[m]
        sig_out[g] = sig[m]
        for j in range(d):
            Dout[g, j] = D[m, j]
        for a in range(c):
            for b in range(a, c):
                Sout[g, a, b] = S[m, a, b]
                Sout[g, b, a] = S[m, a, b]
    return Bout, Dout, Sout, sig_out


def _linear_predictors(X, beta, labels):
    """``X @ beta`` using only the nonzero coefficients."""
    nz = np.flatnonzero(beta)
    if nz.size:
        eta = X[..., nz] @ beta[nz]
    else:
        eta = np.zeros(X.shape[:-1])
    if not np.all(np.isfinite(eta)):
        bad = [labels[g] for g in np.flatnonzero(~np.isfinite(eta).all(axis=-1))]
        raise NumericError(f"non-finite linear predictor in strata {bad}")
    return eta


def _check_B(B, labels):
    bad = ~(np.isfinite(B) & (B > 0))
    if bad.any():
        raise NumericError(
            f"normalizing constant under/overflow in strata {[labels[g] for g in np.flatnonzero(bad)]}"
        )


@dataclass(frozen=True)
class RecursionWorkspace:
    """Full recursion tables for one stratum.

    ``B[mm, nn] * exp(log_scale[mm, nn])`` is the constant for the first
    ``nn`` rows with ``mm`` cases.  ``Bdot[j]`` and ``Bddot[a, b]`` share
    the layout and the scale, for the requested coordinates ``coords``
    (``Bddot`` indexes positions in ``coords``).
    """

    B: np.ndarray  # (m+1, n+1)
    Bdot: np.ndarray | None  # (d, m+1, n+1)
    Bddot: np.ndarray | None  # (d, d, m+1, n+1)
    coords: np.ndarray
    log_scale: np.ndarray  # (m+1, n+1), -inf where m > n
    m: int
    n: int

    @property
    def log_B(self) -> float:
        return math.log(self.B[self.m, self.n]) + self.log_scale[self.m, self.n]

    @property
    def mean(self) -> np.ndarray:
        """``Bdot / B`` at ``(m, n)``: expected case-set sum."""
        return self.Bdot[:, self.m, self.n] / self.B[self.m, self.n]

    @property
    def second_moment(self) -> np.ndarray:
        return self.Bddot[:, :, self.m, self.n] / self.B[self.m, self.n]


def norm_const(st: Stratum, beta) -> float:
    """``log B(m, n)`` for one stratum."""
    beta = np.asarray(beta, dtype=float)
    eta = _linear_predictors(st.X, beta, [st.id])[None, :]
    B, _, _, sig, _ = _gail(eta, None, st.m)
    _check_B(B, [st.id])
    return float(np.log(B[0]) + sig[0])


def norm_const_derivs(st: Stratum, beta, coords=None, want_second=True) -> RecursionWorkspace:
    """Recursion tables of ``B`` and its derivatives for one stratum."""
    beta = np.asarray(beta, dtype=float)
    coords = np.arange(st.p) if coords is None else np.asarray(sorted(set(coords)), dtype=int)
    eta = _linear_predictors(st.X, beta, [st.id])[None, :]
    Z = st.X[None][:, :, coords]
    pairs = np.arange(len(coords)) if want_second else None
    B, _, _, _, tab = _gail(eta, Z, st.m, pairs, keep_tables=True)
    _check_B(B, [st.id])
    Btab = np.stack([col[0] for col in tab["B"]], axis=-1)
    Dtab = np.stack([col[0] for col in tab["D"]], axis=-1).transpose(1, 0, 2)
    Stab = None
    if want_second:
        Stab = np.stack([col[0] for col in tab["S"]], axis=-1).transpose(1, 2, 0, 3)
    sig = np.stack([col[0] for col in tab["sigma"]], axis=-1)
    return RecursionWorkspace(Btab, Dtab, Stab, coords, sig, st.m, st.n)


@dataclass(frozen=True)
class QuadraticModel:
    """Second-order expansion of ``l`` at ``beta``.

    ``s`` is the full score.  ``H`` is the negative Hessian restricted to
    ``hess_idx`` (rows/columns in that order).
    """

    beta: np.ndarray
    s: np.ndarray
    hess_idx: np.ndarray
    H: np.ndarray
    loglik: float

    @property
    def hdiag(self) -> np.ndarray:
        return np.diag(self.H).copy()


def _group_terms(grp: StratumGroup, beta, hess_idx, method, labels):
    """Summed log-lik, score and Hessian block over one group of strata."""
    X, m, n = grp.X, grp.m, grp.n
    eta = _linear_predictors(X, beta, labels)
    if method == "coords":
        pairs = hess_idx if hess_idx is not None else np.empty(0, dtype=np.int64)
        B, D, S, sig = _gail_coords(eta, np.ascontiguousarray(X), m, pairs.astype(np.int64))
        _check_B(B, labels)
        mu = D / B[:, None]
        H = None
        if hess_idx is not None:
            mc = mu[:, hess_idx]
            Hg = S / B[:, None, None] - mc[:, :, None] * mc[:, None, :]
            H = Hg.sum(axis=0)
    elif method == "obs":
        G = X.shape[0]
        eye = np.broadcast_to(np.eye(n), (G, n, n))
        pairs = np.arange(n) if hess_idx is not None else None
        B, D, S, sig, _ = _gail(eta, eye, m, pairs)
        _check_B(B, labels)
        pi = D / B[:, None]
        mu = np.einsum("gi,gij->gj", pi, X)
        H = None
        if hess_idx is not None:
            cov = S / B[:, None, None] - pi[:, :, None] * pi[:, None, :]
            Xc = X[:, :, hess_idx]
            H = np.einsum("gia,gij,gjb->ab", Xc, cov, Xc, optimize=True)
    else:
        raise ParameterError(f"unknown method {method!r}")

    loglik = float(np.sum((eta[:, :m].sum(axis=1) - sig) - np.log(B)))
    s = (grp.case_sum - mu).sum(axis=0)
    return loglik, s, H


def _labels(ds, grp):
    return [ds.strata[k].id for k in grp.index]


def score_hessian(ds: Dataset, beta, hess_set=(), method: str = "coords") -> QuadraticModel:
    """Log-likelihood, full score and negative Hessian block at ``beta``.

    Parameters
    ----------
    ds : Dataset
    beta : (p,) array
    hess_set : iterable of int
        Coordinates for the Hessian block; empty means score only.
    method : {"coords", "obs"}
    """
    beta = np.asarray(beta, dtype=float)
    hess_idx = np.asarray(sorted(set(int(j) for j in hess_set)), dtype=int)
    want_h = hess_idx.size > 0
    loglik = 0.0
    s = np.zeros(ds.p)
    H = np.zeros((hess_idx.size, hess_idx.size))
    for grp in ds.groups:
        lg, sg, Hg = _group_terms(
            grp, beta, hess_idx if want_h else None, method, _labels(ds, grp)
        )
        loglik += lg
        s += sg
        if want_h:
            H += Hg
    if want_h:
        H = 0.5 * (H + H.T)
    return QuadraticModel(beta.copy(), s, hess_idx, H, loglik)


def score(ds: Dataset, beta, method: str = "coords") -> np.ndarray:
    return score_hessian(ds, beta, (), method).s


def stratum_loglik(ds: Dataset, beta) -> np.ndarray:
    """Per-stratum log conditional probabilities, in stratum order."""
    beta = np.asarray(beta, dtype=float)
    out = np.empty(ds.K)
    for grp in ds.groups:
        labels = _labels(ds, grp)
        eta = _linear_predictors(grp.X, beta, labels)
        B, _, _, sig, _ = _gail(eta, None, grp.m)
        _check_B(B, labels)
        out[grp.index] = (eta[:, : grp.m].sum(axis=1) - sig) - np.log(B)
    return out


def log_cond_likelihood(ds: Dataset, beta) -> float:
    return float(stratum_loglik(ds, beta).sum())


def null_deviance(ds: Dataset) -> float:
    """``-2 l(0) = 2 sum_k log C(n_k, m_k)``."""
    return 2.0 * sum(math.log(math.comb(st.n, st.m)) for st in ds.strata)


def deviance(ds: Dataset, beta) -> tuple[float, float, float]:
    """Deviance, null deviance and fraction of null deviance explained.

    The saturated log-likelihood is 0, so ``D = -2 l(beta)``.
    """
    D = -2.0 * log_cond_likelihood(ds, beta)
    D0 = null_deviance(ds)
    return D, D0, (D0 - D) / D0


@dataclass(frozen=True)
class BruteForceResult:
    subsets: list[tuple[int, ...]]
    prob: np.ndarray  # p_u per subset
    log_B: float
    B: float
    Bdot: np.ndarray
    Bddot: np.ndarray
    mean: np.ndarray  # sum_u p_u S_u
    cov: np.ndarray  # sum_u p_u (S_u - mean)(S_u - mean)'


def brute_force_model(st: Stratum, beta, limit: int = BRUTE_FORCE_LIMIT) -> BruteForceResult:
    """Enumerate every size-``m`` subset of the stratum.

    Independent of the recursion; used as a correctness oracle.  Refuses
    when ``C(n, m)`` exceeds ``limit``.
    """
    total = math.comb(st.n, st.m)
    if total > limit:
        raise ParameterError(f"C({st.n}, {st.m}) = {total} subsets exceeds limit {limit}")
    beta = np.asarray(beta, dtype=float)
    subsets = list(itertools.combinations(range(st.n), st.m))
    sums = np.array([st.X[list(u)].sum(axis=0) for u in subsets])
    a = sums @ beta
    amax = a.max()
    e = np.exp(a - amax)
    Z = e.sum()
    prob = e / Z
    mean = prob @ sums
    centered = sums - mean
    cov = (centered * prob[:, None]).T @ centered
    raw = np.exp(a)
    return BruteForceResult(
        subsets=subsets,
        prob=prob,
        log_B=float(amax + math.log(Z)),
        B=float(raw.sum()),
        Bdot=raw @ sums,
        Bddot=(sums * raw[:, None]).T @ sums,
        mean=mean,
        cov=cov,
    )
