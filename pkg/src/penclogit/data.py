"""Stratified case-control data: containers, ingestion and standardization.

Every stratum stores its regressor rows with the cases first: rows
``0..m-1`` are cases and rows ``m..n-1`` are controls.  All likelihood code
relies on that ordering, so it is enforced at construction time.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Iterable, Sequence

import numpy as np

from .exceptions import EmptyDatasetError, FormatError

__all__ = [
    "DegenerateStratumWarning",
    "Stratum",
    "Dataset",
    "ScalingInfo",
    "StratumGroup",
    "build_dataset",
    "standardize",
]


class DegenerateStratumWarning(UserWarning):
    """A stratum with no cases or no controls was dropped."""


@dataclass(frozen=True, eq=False)
class Stratum:
    """One matched set: ``X`` is ``(n, p)`` with the ``m`` cases on top."""

    id: Hashable
    m: int
    X: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float, copy=True)
        if X.ndim != 2:
            raise FormatError(f"stratum {self.id!r}: X must be 2-d")
        n = X.shape[0]
        if not 1 <= self.m < n:
            raise FormatError(
                f"stratum {self.id!r}: need 1 <= m < n, got m={self.m}, n={n}"
            )
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "m", int(self.m))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def cases(self) -> np.ndarray:
        return self.X[: self.m]

    @property
    def controls(self) -> np.ndarray:
        return self.X[self.m :]


@dataclass(frozen=True)
class StratumGroup:
    """Strata sharing ``(n, m)``, stacked for vectorized recursions."""

    index: np.ndarray  # positions in Dataset.strata
    n: int
    m: int
    X: np.ndarray  # (G, n, p)
    case_sum: np.ndarray  # (G, p)


@dataclass(frozen=True, eq=False)
class Dataset:
    strata: tuple[Stratum, ...]
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        strata = tuple(self.strata)
        if not strata:
            raise EmptyDatasetError("dataset has no strata")
        p = strata[0].p
        for st in strata:
            if st.p != p:
                raise FormatError(
                    f"stratum {st.id!r} has {st.p} predictors, expected {p}"
                )
        names = tuple(self.names) if self.names else tuple(f"x{j + 1}" for j in range(p))
        if len(names) != p:
            raise FormatError(f"{len(names)} names given for {p} predictors")
        object.__setattr__(self, "strata", strata)
        object.__setattr__(self, "names", names)

    @property
    def K(self) -> int:
        return len(self.strata)

    @property
    def p(self) -> int:
        return self.strata[0].p

    @property
    def N(self) -> int:
        return sum(st.n for st in self.strata)

    @cached_property
    def groups(self) -> tuple[StratumGroup, ...]:
        """Strata bucketed by ``(n, m)`` in order of first appearance."""
        buckets: dict[tuple[int, int], list[int]] = {}
        for k, st in enumerate(self.strata):
            buckets.setdefault((st.n, st.m), []).append(k)
        out = []
        for (n, m), idx in buckets.items():
            X = np.stack([self.strata[k].X for k in idx])
            X.setflags(write=False)
            case_sum = X[:, :m, :].sum(axis=1)
            case_sum.setflags(write=False)
            out.append(StratumGroup(np.asarray(idx), n, m, X, case_sum))
        return tuple(out)

    def stacked(self) -> np.ndarray:
        """All rows as one ``(N, p)`` matrix in stratum order."""
        return np.vstack([st.X for st in self.strata])

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(tuple(self.strata[k] for k in indices), self.names)

    def with_X(self, X: np.ndarray) -> "Dataset":
        """Same strata layout, rows replaced by ``X`` (``(N, p)``)."""
        out, start = [], 0
        for st in self.strata:
            out.append(Stratum(st.id, st.m, X[start : start + st.n]))
            start += st.n
        return Dataset(tuple(out), self.names)


@dataclass(frozen=True)
class ScalingInfo:
    """Column centering/scaling applied before fitting.

    ``excluded`` flags zero-variance predictors; they are zeroed in the
    fitted data and their coefficients are reported as exactly 0.
    """

    center: np.ndarray
    scale: np.ndarray
    excluded: np.ndarray

    @classmethod
    def identity(cls, p: int) -> "ScalingInfo":
        return cls(np.zeros(p), np.ones(p), np.zeros(p, dtype=bool))

    def to_original(self, beta: np.ndarray) -> np.ndarray:
        """Map coefficients from the fitting scale back to the input scale."""
        beta = np.asarray(beta, dtype=float)
        out = beta / self.scale
        out[..., self.excluded] = 0.0
        return out


def build_dataset(
    rows: Iterable[tuple[Hashable, int, Sequence[float]]],
    names: Sequence[str] | None = None,
) -> Dataset:
    """Group ``(stratum, case_flag, x)`` rows into a :class:`Dataset`.

    Strata keep first-appearance order.  Within a stratum the cases are
    placed before the controls, each group keeping input order.  Strata
    with no cases or no controls contribute a constant factor to the
    conditional likelihood and are dropped with a
    :class:`DegenerateStratumWarning`.
    """
    order: list[Hashable] = []
    cases: dict[Hashable, list] = {}
    controls: dict[Hashable, list] = {}
    p = None
    for i, (sid, flag, x) in enumerate(rows):
        x = [float(v) for v in x]
        if p is None:
            p = len(x)
        elif len(x) != p:
            raise FormatError(f"row {i + 1}: expected {p} predictors, got {len(x)}")
        if flag not in (0, 1, True, False):
            raise FormatError(f"row {i + 1}: case flag must be 0 or 1, got {flag!r}")
        if sid not in cases:
            order.append(sid)
            cases[sid] = []
            controls[sid] = []
        (cases if flag else controls)[sid].append(x)
    if p is None:
        raise EmptyDatasetError("no rows supplied")

    strata = []
    for sid in order:
        m, c = len(cases[sid]), len(controls[sid])
        if m == 0 or c == 0:
            warnings.warn(
                f"stratum {sid!r} dropped: {m} cases, {c} controls",
                DegenerateStratumWarning,
                stacklevel=2,
            )
            continue
        X = np.array(cases[sid] + controls[sid], dtype=float).reshape(m + c, p)
        strata.append(Stratum(sid, m, X))
    if not strata:
        raise EmptyDatasetError("every stratum is degenerate (no cases or no controls)")
    return Dataset(tuple(strata), tuple(names) if names is not None else ())


def standardize(
    ds: Dataset, columns: Sequence[int] | None = None, *, var_tol: float = 1e-12
) -> tuple[Dataset, ScalingInfo]:
    """Center and scale predictors to mean 0, population sd 1 over all rows.

    Parameters
    ----------
    ds : Dataset
    columns : sequence of int, optional
        Predictors to transform; the rest are left untouched (center 0,
        scale 1).  Defaults to every predictor.
    var_tol : float
        A column whose sd is at most ``var_tol * (1 + |mean|)`` counts as
        constant.  Constant columns are flagged in ``excluded`` and zeroed,
        whether or not they were selected for scaling.

    Returns
    -------
    (Dataset, ScalingInfo)
    """
    X = ds.stacked()
    p = ds.p
    selected = np.zeros(p, dtype=bool)
    selected[list(range(p)) if columns is None else list(columns)] = True

    mean = X.mean(axis=0)
    sd = X.std(axis=0)  # population convention (divide by N)
    excluded = sd <= var_tol * (1.0 + np.abs(mean))

    center = np.where(selected | excluded, mean, 0.0)
    scale = np.where(selected & ~excluded, sd, 1.0)
    Z = (X - center) / scale
    Z[:, excluded] = 0.0
    if excluded.any():
        bad = [ds.names[j] for j in np.flatnonzero(excluded)]
        warnings.warn(f"zero-variance predictors excluded: {bad}", stacklevel=2)
    return ds.with_X(Z), ScalingInfo(center, scale, excluded)
