"""Synthetic matched case-control data.

Each component (regressors, support, signs, intercepts, case sampling)
draws from its own child stream of ``numpy.random.SeedSequence(seed)``, so
changing one part of the design leaves the other draws untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, Stratum
from .exceptions import ParameterError

__all__ = ["SimConfig", "SimTruth", "simulate", "weighted_sample", "PRESETS"]

STREAMS = ("X", "support", "signs", "intercepts", "sampling")


@dataclass(frozen=True)
class SimConfig:
    K: int = 10
    n: int = 10
    m: int = 5
    p: int = 200
    q: int | None = None
    coef_magnitude: float = 2.0
    support_rule: str = "quarter"
    intercept_sd: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.K < 1 or not 1 <= self.m < self.n or self.p < 1:
            raise ParameterError(f"invalid design K={self.K}, n={self.n}, m={self.m}, p={self.p}")
        if self.support_rule not in ("quarter", "tenth", "explicit"):
            raise ParameterError(f"unknown support rule {self.support_rule!r}")
        if self.support_rule == "explicit" and self.q is None:
            raise ParameterError("explicit support rule needs q")
        if self.intercept_sd < 0:
            raise ParameterError("intercept_sd must be >= 0")
        if not 0 <= self.n_support <= self.p:
            raise ParameterError(f"q={self.n_support} must lie in [0, p]")

    @property
    def n_support(self) -> int:
        if self.support_rule == "quarter":
            return self.p // 4
        if self.support_rule == "tenth":
            return self.p // 10
        return int(self.q)


# screening/timing studies: q = p//4, no intercepts; selection study: q = p//10, sd-2 intercepts
PRESETS = {
    "screening": dict(support_rule="quarter", intercept_sd=0.0),
    "selection": dict(support_rule="tenth", intercept_sd=2.0),
}


@dataclass(frozen=True)
class SimTruth:
    beta: np.ndarray
    intercepts: np.ndarray
    support: np.ndarray


def weighted_sample(rng: np.random.Generator, weights, m: int) -> np.ndarray:
    """Draw ``m`` distinct indices one at a time, each with probability
    proportional to the weights of the indices not yet drawn."""
    w = np.array(weights, dtype=float)
    if m > w.size:
        raise ParameterError("cannot draw more indices than available")
    chosen = []
    for _ in range(m):
        total = w.sum()
        if total <= 0:
            # every remaining weight underflowed: fall back to uniform
            cand = np.flatnonzero(~np.isin(np.arange(w.size), chosen))
            idx = int(cand[rng.integers(cand.size)])
        else:
            u = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(w), u, side="right"))
            idx = min(idx, w.size - 1)
            while w[idx] == 0:  # guard against landing on a removed entry
                idx -= 1
        chosen.append(idx)
        w[idx] = 0.0
    return np.array(chosen)


def simulate(cfg: SimConfig) -> tuple[Dataset, SimTruth]:
    """Generate a dataset from the stratified logistic model.

    Regressors are iid N(0, 1).  ``q`` coefficients chosen uniformly
    without replacement get magnitude ``coef_magnitude`` and a random sign.
    Within stratum ``k`` the ``m`` cases are drawn without replacement with
    weights ``sigmoid(b0_k + beta'x)`` and moved to the top of the stratum.
    """
    rngs = dict(zip(STREAMS, (np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(len(STREAMS)))))
    K, n, m, p = cfg.K, cfg.n, cfg.m, cfg.p
    q = cfg.n_support

    X = rngs["X"].standard_normal((K, n, p))
    support = np.sort(rngs["support"].choice(p, size=q, replace=False)) if q else np.array([], dtype=int)
    signs = rngs["signs"].choice(np.array([-1.0, 1.0]), size=q)
    beta = np.zeros(p)
    beta[support] = cfg.coef_magnitude * signs
    intercepts = (
        rngs["intercepts"].normal(0.0, cfg.intercept_sd, size=K)
        if cfg.intercept_sd > 0
        else np.zeros(K)
    )

    strata = []
    for k in range(K):
        eta = intercepts[k] + X[k] @ beta
        prob = 0.5 * (1.0 + np.tanh(0.5 * eta))  # overflow-free sigmoid
        cases = np.sort(weighted_sample(rngs["sampling"], prob, m))
        controls = np.setdiff1d(np.arange(n), cases)
        strata.append(Stratum(str(k + 1), m, X[k][np.concatenate([cases, controls])]))
    names = tuple(f"x{j + 1}" for j in range(p))
    return Dataset(tuple(strata), names), SimTruth(beta, intercepts, support)
