"""Timing and screening benchmarks on simulated data.

Each cell pairs a simulation design with a grid.  Repetition ``r`` of a
cell simulates with ``seed + r``, standardizes, and times ``fit_path``
alone with a monotonic wall clock.  The compiled kernels are warmed up
before the first timed fit.
"""

from __future__ import annotations

import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import standardize
from .exceptions import ParameterError, PenclogitError
from .path import GridSpec, fit_path
from .simulate import SimConfig, simulate
from .solver import PenaltyConfig

__all__ = ["BenchCell", "BenchRecord", "bench", "warmup", "preset_cells", "PRESET_NAMES"]


@dataclass(frozen=True)
class BenchCell:
    label: str
    sim: SimConfig
    grid: GridSpec = GridSpec()
    alpha: float = 1.0

    @property
    def grid_label(self) -> str:
        g = self.grid
        if g.kind == "hybrid":
            return f"hybrid{g.linear_steps}/{g.nlambda - 1 - g.linear_steps}"
        return g.kind


@dataclass
class BenchRecord:
    label: str
    grid_label: str
    sim: SimConfig
    grid: GridSpec
    times: list[float] = field(default_factory=list)
    strong_sizes: list[np.ndarray] = field(default_factory=list)
    violations: list[np.ndarray] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return len(self.errors)

    @property
    def mean_time(self) -> float:
        return statistics.fmean(self.times) if self.times else float("nan")

    @property
    def median_time(self) -> float:
        return statistics.median(self.times) if self.times else float("nan")

    @property
    def mean_steps(self) -> float:
        return statistics.fmean(s.size for s in self.strong_sizes) if self.strong_sizes else float("nan")

    @property
    def mean_strong(self) -> float:
        if not self.strong_sizes:
            return float("nan")
        return float(np.concatenate(self.strong_sizes).mean())

    @property
    def max_strong(self) -> int:
        return int(max((s.max() for s in self.strong_sizes if s.size), default=0))

    @property
    def total_violations(self) -> int:
        return int(sum(v.sum() for v in self.violations))


_warm = False


def warmup() -> None:
    """Compile the numeric kernels on a tiny problem."""
    global _warm
    if not _warm:
        ds, _ = simulate(SimConfig(K=3, n=4, m=2, p=6, seed=0))
        fit_path(standardize(ds)[0], spec=GridSpec(nlambda=12, linear_steps=8))
        _warm = True


def _run_cell(cell: BenchCell, reps: int, cfg: PenaltyConfig) -> BenchRecord:
    rec = BenchRecord(cell.label, cell.grid_label, cell.sim, cell.grid)
    for r in range(reps):
        try:
            ds, _ = simulate(replace(cell.sim, seed=cell.sim.seed + r))
            ds, scaling = standardize(ds)
            t0 = time.perf_counter()
            sol = fit_path(ds, cell.alpha, cell.grid, scaling=scaling, cfg=cfg)
            rec.times.append(time.perf_counter() - t0)
            rec.strong_sizes.append(sol.strong_sizes)
            rec.violations.append(sol.kkt_violations)
        except PenclogitError as err:
            rec.errors.append(f"rep {r}: {err}")
    return rec


def bench(
    cells,
    reps: int = 3,
    *,
    cfg: PenaltyConfig | None = None,
    threads: int = 1,
) -> list[BenchRecord]:
    """Run every cell ``reps`` times; a failing repetition is recorded and skipped.

    ``threads > 1`` runs different cells concurrently.  Timings then
    compete for cores, so keep the default for timing studies.
    """
    cfg = cfg or PenaltyConfig()
    warmup()
    cells = list(cells)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda c: _run_cell(c, reps, cfg), cells))
    return [_run_cell(c, reps, cfg) for c in cells]


GRIDS = {
    "logarithmic": GridSpec(kind="logarithmic"),
    "linear": GridSpec(kind="linear"),
    "hybrid80/19": GridSpec(kind="hybrid", linear_steps=80),
    "hybrid90/9": GridSpec(kind="hybrid", linear_steps=90),
}

PRESET_NAMES = ("grids", "fixed-k", "fixed-size")


def preset_cells(name: str, ps=(100, 200), seed: int = 0) -> list[BenchCell]:
    """Cells for the three timing layouts.

    ``grids``: K=10, n=10, m=5 across four grid kinds.  ``fixed-k``: K=10,
    n in {10, 20, 40} with m = n/2, m = 1 and m = 5.  ``fixed-size``: K*n
    held at 100 and 200 with m = ceil(n/2).  All use the screening design.
    """
    cells = []
    if name == "grids":
        for p in ps:
            for g in GRIDS.values():
                sim = SimConfig(K=10, n=10, m=5, p=p, seed=seed)
                cells.append(BenchCell(f"p={p}", sim, g))
    elif name == "fixed-k":
        for m_rule in ("half", "one", "five"):
            for n in (10, 20, 40):
                m = {"half": n // 2, "one": 1, "five": 5}[m_rule]
                for p in ps:
                    cells.append(BenchCell(f"n={n};m={m}", SimConfig(K=10, n=n, m=m, p=p, seed=seed)))
    elif name == "fixed-size":
        for total, shapes in ((100, ((50, 2), (20, 5), (10, 10), (5, 20), (2, 50))),
                              (200, ((100, 2), (50, 4), (20, 10), (10, 20), (5, 40)))):
            for K, n in shapes:
                for p in ps:
                    sim = SimConfig(K=K, n=n, m=-(-n // 2), p=p, seed=seed)
                    cells.append(BenchCell(f"N={total};K={K};n={n}", sim))
    else:
        raise ParameterError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    return cells
