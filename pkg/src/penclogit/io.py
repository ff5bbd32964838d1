"""Reading and writing datasets, paths, CV curves, truth files and bench tables.

Tabular outputs are comma-separated with LF line endings.  Path and CV
files start with one ``#``-prefixed JSON header line carrying a format tag
and version.  Floats are written with 17 significant digits so they read
back bit-exact.  Coefficient indices are 0-based.
"""

from __future__ import annotations

import contextlib
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass

import numpy as np

from .bench import BenchRecord
from .cv import CVResult
from .data import Dataset, build_dataset
from .exceptions import FormatError
from .path import PathSolution
from .simulate import SimConfig, SimTruth

__all__ = [
    "read_dataset",
    "write_dataset",
    "write_path",
    "read_path",
    "PathFile",
    "write_cv",
    "write_truth",
    "read_truth",
    "write_bench",
    "format_float",
    "open_output",
]

PATH_FORMAT = "penclogit-path"
CV_FORMAT = "penclogit-cv"
TRUTH_FORMAT = "penclogit-truth"
VERSION = 1

PATH_COLUMNS = (
    "lambda", "df", "dev_explained", "strong_size", "working_size",
    "kkt_violations", "converged", "coefficients",
)


def format_float(x: float) -> str:
    return format(float(x), ".17g")


@contextlib.contextmanager
def _open_out(path):
    """Text handle for ``path``; ``"-"`` means standard output (left open)."""
    if str(path) == "-":
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


open_output = _open_out


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def read_dataset(path, delimiter: str = ",") -> Dataset:
    """Read a ``stratum,y,x1,...,xp`` file.

    Raises :class:`FormatError` naming the line for a bad header, a wrong
    field count, a missing or non-numeric value, or a ``y`` other than 0/1.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 3 or header[0].lower() != "stratum" or header[1].lower() != "y":
            raise FormatError(f"{path}:1: header must start with 'stratum,y' and name >= 1 predictor")
        names = header[2:]
        width = len(header)
        rows = []
        for fields in reader:
            line = reader.line_num
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != width:
                raise FormatError(f"{path}:{line}: expected {width} fields, got {len(fields)}")
            sid = fields[0].strip()
            if not sid:
                raise FormatError(f"{path}:{line}: missing stratum label")
            y = fields[1].strip()
            if y not in ("0", "1"):
                raise FormatError(f"{path}:{line}: y must be 0 or 1, got {y!r}")
            x = []
            for name, raw in zip(names, fields[2:]):
                raw = raw.strip()
                try:
                    v = float(raw)
                except ValueError:
                    v = math.nan
                if not math.isfinite(v):
                    raise FormatError(f"{path}:{line}: missing or invalid value {raw!r} for {name}")
                x.append(v)
            rows.append((sid, int(y), x))
    return build_dataset(rows, names)


def write_dataset(ds: Dataset, path) -> None:
    with _open_out(path) as fh:
        w = _writer(fh)
        w.writerow(["stratum", "y", *ds.names])
        for st in ds.strata:
            for i, row in enumerate(st.X):
                w.writerow([st.id, 1 if i < st.m else 0, *(repr(float(v)) for v in row)])


def _sparse(beta) -> str:
    return ";".join(f"{j}:{format_float(beta[j])}" for j in np.flatnonzero(beta))


def _parse_sparse(text: str, p: int) -> np.ndarray:
    beta = np.zeros(p)
    if text:
        for item in text.split(";"):
            j, v = item.split(":")
            beta[int(j)] = float(v)
    return beta


def _header_line(meta: dict) -> str:
    return "# " + json.dumps(meta, sort_keys=True) + "\n"


def _read_header(fh, expected: str) -> dict:
    first = fh.readline()
    if not first.startswith("# "):
        raise FormatError(f"missing '# {{...}}' header line in {expected} file")
    try:
        meta = json.loads(first[2:])
    except json.JSONDecodeError as err:
        raise FormatError(f"bad header JSON: {err}") from None
    if meta.get("format") != expected:
        raise FormatError(f"expected format {expected!r}, found {meta.get('format')!r}")
    if meta.get("version") != VERSION:
        raise FormatError(f"unsupported {expected} version {meta.get('version')!r}")
    return meta


def write_path(sol: PathSolution, path) -> None:
    """One record per lambda; coefficients on the original predictor scale."""
    meta = {
        "format": PATH_FORMAT,
        "version": VERSION,
        "alpha": sol.alpha,
        "p": int(sol.betas.shape[1]),
        "names": list(sol.names),
        "null_deviance": sol.null_deviance,
        "early_stopped": bool(sol.early_stopped),
        "excluded": [int(j) for j in np.flatnonzero(sol.scaling.excluded)],
    }
    orig = sol.original_betas()
    with _open_out(path) as fh:
        fh.write(_header_line(meta))
        w = _writer(fh)
        w.writerow(PATH_COLUMNS)
        for k in range(len(sol)):
            w.writerow([
                format_float(sol.lambdas[k]),
                int(sol.df[k]),
                format_float(sol.dev_explained[k]),
                int(sol.strong_sizes[k]),
                int(sol.working_sizes[k]),
                int(sol.kkt_violations[k]),
                int(bool(sol.converged[k])),
                _sparse(orig[k]),
            ])


@dataclass(frozen=True)
class PathFile:
    """Contents of a path file; ``betas`` are on the original scale."""

    meta: dict
    lambdas: np.ndarray
    df: np.ndarray
    dev_explained: np.ndarray
    strong_sizes: np.ndarray
    working_sizes: np.ndarray
    kkt_violations: np.ndarray
    converged: np.ndarray
    betas: np.ndarray

    @property
    def names(self) -> list[str]:
        return self.meta["names"]


def read_path(path) -> PathFile:
    with open(path, encoding="utf-8", newline="") as fh:
        meta = _read_header(fh, PATH_FORMAT)
        reader = csv.reader(fh)
        if tuple(next(reader, ())) != PATH_COLUMNS:
            raise FormatError(f"{path}: unexpected path columns")
        p = int(meta["p"])
        cols = {c: [] for c in PATH_COLUMNS}
        try:
            for fields in reader:
                for c, v in zip(PATH_COLUMNS, fields):
                    cols[c].append(v)
            betas = np.array([_parse_sparse(t, p) for t in cols["coefficients"]]).reshape(-1, p)
            return PathFile(
                meta=meta,
                lambdas=np.array(cols["lambda"], dtype=float),
                df=np.array(cols["df"], dtype=int),
                dev_explained=np.array(cols["dev_explained"], dtype=float),
                strong_sizes=np.array(cols["strong_size"], dtype=int),
                working_sizes=np.array(cols["working_size"], dtype=int),
                kkt_violations=np.array(cols["kkt_violations"], dtype=int),
                converged=np.array(cols["converged"], dtype=int).astype(bool),
                betas=betas,
            )
        except (ValueError, IndexError) as err:
            raise FormatError(f"{path}: malformed path record ({err})") from None


def write_cv(res: CVResult, path, *, nfolds: int, seed: int) -> None:
    meta = {
        "format": CV_FORMAT,
        "version": VERSION,
        "nfolds": nfolds,
        "seed": seed,
        "folds_used": [int(i) for i in res.folds_used],
        "lambda_min": res.lambda_min,
        "lambda_1se": res.lambda_1se,
    }
    df = res.path.df
    with _open_out(path) as fh:
        fh.write(_header_line(meta))
        w = _writer(fh)
        w.writerow(["lambda", "cv_mean", "cv_se", "df", "marker"])
        for k, lam in enumerate(res.lambdas):
            marker = ";".join(
                tag for tag, idx in (("min", res.idx_min), ("1se", res.idx_1se)) if idx == k
            )
            w.writerow([
                format_float(lam),
                format_float(res.cv_mean[k]),
                format_float(res.cv_se[k]),
                int(df[k]) if k < df.size else "",
                marker,
            ])


def write_truth(truth: SimTruth, cfg: SimConfig, path) -> None:
    doc = {
        "format": TRUTH_FORMAT,
        "version": VERSION,
        "config": asdict(cfg),
        "support": [int(j) for j in truth.support],
        "beta": [float(b) for b in truth.beta],
        "intercepts": [float(b) for b in truth.intercepts],
    }
    with _open_out(path) as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_truth(path) -> SimTruth:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise FormatError(f"{path}: bad truth JSON: {err}") from None
    if doc.get("format") != TRUTH_FORMAT or doc.get("version") != VERSION:
        raise FormatError(f"{path}: not a {TRUTH_FORMAT} v{VERSION} file")
    return SimTruth(
        np.array(doc["beta"], dtype=float),
        np.array(doc["intercepts"], dtype=float),
        np.array(doc["support"], dtype=int),
    )


BENCH_COLUMNS = (
    "label", "grid", "K", "n", "m", "p", "q", "reps", "failures",
    "mean_steps", "mean_strong", "max_strong", "kkt_violations",
    "mean_time", "median_time",
)


def write_bench(records: list[BenchRecord], fh) -> None:
    """Bench table to a path, "-" or an open handle; timing columns come last."""
    with contextlib.ExitStack() as stack:
        out = fh if hasattr(fh, "write") else stack.enter_context(_open_out(fh))
        w = _writer(out)
        w.writerow(BENCH_COLUMNS)
        for r in records:
            w.writerow([
                r.label, r.grid_label, r.sim.K, r.sim.n, r.sim.m, r.sim.p, r.sim.n_support,
                len(r.times), r.failures,
                _g(r.mean_steps), _g(r.mean_strong), r.max_strong, r.total_violations,
                _g(r.mean_time), _g(r.median_time),
            ])


def _g(x) -> str:
    return "nan" if x is None or not math.isfinite(x) else format(x, ".6g")
