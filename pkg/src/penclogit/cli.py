"""Command-line entry point: ``penclogit {fit,cv,simulate,bench,roc,plotdata}``.

Exit status: 0 success, 2 bad parameters, 3 I/O failure, 4 malformed or
degenerate data, 5 convergence failure, 6 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace

import numpy as np

from . import io as pio
from .bench import PRESET_NAMES, bench, preset_cells
from .cv import cross_validate, make_folds, roc_points
from .data import Dataset, ScalingInfo, standardize
from .exceptions import (
    ConvergenceError,
    DegenerateDataError,
    EmptyDatasetError,
    FormatError,
    NumericError,
    ParameterError,
)
from .path import GridSpec, fit_path
from .simulate import PRESETS, SimConfig, simulate
from .solver import PenaltyConfig

EXIT_PARAM, EXIT_IO, EXIT_DATA, EXIT_CONVERGENCE, EXIT_NUMERIC = 2, 3, 4, 5, 6


def _grid_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("penalty and grid")
    g.add_argument("--alpha", type=float, default=1.0, help="elastic-net mixing in (0, 1]; 1 is the lasso")
    g.add_argument("--nlambda", type=int, default=100)
    g.add_argument("--epsilon", type=float, default=1e-5, help="lambda_min / lambda_max")
    g.add_argument("--grid", choices=("log", "linear", "hybrid"), default="hybrid")
    g.add_argument("--linear-steps", type=int, default=90, help="linear jumps in the hybrid grid")
    g.add_argument("--hybrid-rule", choices=("jumps", "split"), default="jumps")
    g.add_argument("--no-early-stop", action="store_true", help="run to the end of the grid")
    s = p.add_argument_group("standardization")
    s.add_argument("--standardize", dest="standardize", action="store_true", default=True)
    s.add_argument("--no-standardize", dest="standardize", action="store_false")
    s.add_argument("--skip-binary", action="store_true", help="leave two-valued predictors unscaled")


def _spec(args) -> GridSpec:
    return GridSpec(
        kind=args.grid,
        nlambda=args.nlambda,
        epsilon=args.epsilon,
        linear_steps=args.linear_steps,
        hybrid_rule=args.hybrid_rule,
    )


def _prepare(args) -> tuple[Dataset, ScalingInfo]:
    ds = pio.read_dataset(args.data)
    if not args.standardize:
        return ds, ScalingInfo.identity(ds.p)
    cols = None
    if args.skip_binary:
        X = ds.stacked()
        cols = [j for j in range(ds.p) if np.unique(X[:, j]).size != 2]
    return standardize(ds, cols)


def cmd_fit(args) -> None:
    ds, scaling = _prepare(args)
    sol = fit_path(
        ds, args.alpha, _spec(args), scaling=scaling,
        early_stop=None if args.no_early_stop else 0.99,
    )
    pio.write_path(sol, args.output)


def cmd_cv(args) -> None:
    ds, scaling = _prepare(args)
    folds = make_folds(ds, args.folds, args.seed)
    res = cross_validate(ds, args.alpha, _spec(args), folds, scaling=scaling, threads=args.threads)
    pio.write_cv(res, args.output, nfolds=args.folds, seed=args.seed)


def cmd_simulate(args) -> None:
    base = dict(PRESETS[args.preset]) if args.preset else {}
    if args.q is not None:
        base["support_rule"] = "explicit"
    for key in ("support_rule", "intercept_sd"):
        if getattr(args, key) is not None:
            base[key] = getattr(args, key)
    cfg = SimConfig(
        K=args.K, n=args.n, m=args.m, p=args.p, q=args.q,
        coef_magnitude=args.coef_magnitude, seed=args.seed, **base,
    )
    ds, truth = simulate(cfg)
    pio.write_dataset(ds, args.output)
    if args.truth:
        pio.write_truth(truth, cfg, args.truth)


def cmd_bench(args) -> None:
    if args.reps < 1:
        raise ParameterError(f"--reps must be >= 1, got {args.reps}")
    PenaltyConfig(alpha=args.alpha)
    cells = preset_cells(args.preset, tuple(args.p), args.seed)
    if args.alpha != 1.0:
        cells = [replace(c, alpha=args.alpha) for c in cells]
    records = bench(cells, args.reps, threads=args.threads)
    pio.write_bench(records, args.output)
    for r in records:
        for e in r.errors:
            print(f"penclogit: {r.label} {r.grid_label}: {e}", file=sys.stderr)


def cmd_roc(args) -> None:
    pf = pio.read_path(args.path_file)
    truth = pio.read_truth(args.truth_file)
    if truth.beta.size != pf.betas.shape[1]:
        raise FormatError("truth and path files disagree on the number of predictors")
    sens, spec = roc_points(pf.betas, truth.support)
    with pio.open_output(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "df", "sensitivity", "specificity"])
        for lam, df, se, sp in zip(pf.lambdas, pf.df, sens, spec):
            w.writerow([pio.format_float(lam), int(df), pio.format_float(se), pio.format_float(sp)])


def cmd_plotdata(args) -> None:
    """Tidy (lambda, predictor, coefficient) rows for every predictor that
    is nonzero somewhere on the path."""
    pf = pio.read_path(args.path_file)
    ever = np.flatnonzero(np.any(pf.betas != 0, axis=0))
    with pio.open_output(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "log_lambda", "predictor", "coefficient"])
        for k, lam in enumerate(pf.lambdas):
            for j in ever:
                w.writerow([
                    pio.format_float(lam), pio.format_float(np.log(lam)),
                    pf.names[j], pio.format_float(pf.betas[k, j]),
                ])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="penclogit",
        description="Elastic-net penalized conditional logistic regression paths.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a regularization path")
    p.add_argument("data", help="CSV with columns stratum,y,x1..xp")
    _grid_args(p)
    p.add_argument("-o", "--output", default="-", help="path file (default stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cv", help="cross-validate lambda by leaving out strata")
    p.add_argument("data")
    _grid_args(p)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="fold fits run in parallel")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("simulate", help="generate a matched case-control dataset")
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--p", type=int, default=200)
    p.add_argument("--q", type=int, default=None, help="explicit support size")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--support-rule", choices=("quarter", "tenth"), default=None)
    p.add_argument("--intercept-sd", type=float, default=None)
    p.add_argument("--coef-magnitude", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default="-", help="dataset CSV (default stdout)")
    p.add_argument("--truth", default=None, help="write the true coefficients here (JSON)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="time path fits on simulated data")
    p.add_argument("--preset", choices=PRESET_NAMES, default="grids")
    p.add_argument("--p", type=int, nargs="+", default=[100, 200])
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="run cells in parallel (skews timings)")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("roc", help="per-lambda sensitivity and specificity")
    p.add_argument("path_file")
    p.add_argument("truth_file")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("plotdata", help="coefficient profiles as tidy triples")
    p.add_argument("path_file")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="penclogit: %(message)s")
    try:
        args.func(args)
    except ParameterError as err:
        return _fail(EXIT_PARAM, "parameter error", err)
    except OSError as err:
        return _fail(EXIT_IO, "I/O error", err)
    except (FormatError, EmptyDatasetError, DegenerateDataError) as err:
        return _fail(EXIT_DATA, "data error", err)
    except ConvergenceError as err:
        return _fail(EXIT_CONVERGENCE, "convergence error", err)
    except NumericError as err:
        return _fail(EXIT_NUMERIC, "numeric error", err)
    return 0


def _fail(code: int, kind: str, err: Exception) -> int:
    print(f"penclogit: {kind}: {err}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
