"""Reading batch CSV files and writing per-batch results."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import DataError
from .suffstats import BatchData

RESPONSE = "y"
RESULT_FIELDS = ("batch", "N", "coord", "name", "estimate", "se", "ci_low", "ci_high", "tau",
                 "lambda", "sigma2", "status")


def read_batch(path, expected: list[str] | None = None, batch_index: int = 0):
    """Load one batch file; returns ``(feature_names, BatchData)``.

    The header must contain a ``y`` column; every other column is a feature.
    When ``expected`` is given the feature columns must match it exactly
    (same names, same order).  Numbers are parsed with ``float`` so the
    decimal separator is always a period.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if RESPONSE not in header:
        raise DataError(f"{path}: no response column named {RESPONSE!r}")
    yi = header.index(RESPONSE)
    names = [h for i, h in enumerate(header) if i != yi]
    if expected is not None and names != list(expected):
        for i in range(max(len(names), len(expected))):
            got = names[i] if i < len(names) else None
            want = expected[i] if i < len(expected) else None
            if got != want:
                raise DataError(
                    f"{path}: schema drift at feature position {i}: "
                    f"expected column {want!r}, found {got!r}"
                )
    data = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    try:
        arr = np.array([[float(c) for c in r] for r in data], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric value ({exc})") from exc
    if arr.ndim != 2 or arr.shape[1] != len(header):
        raise DataError(f"{path}: ragged rows; expected {len(header)} fields per row")
    y = arr[:, yi]
    X = np.delete(arr, yi, axis=1)
    return names, BatchData(X, y, batch_index)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def open_results(path, append: bool):
    """Open a results CSV, writing the header unless appending to an existing file."""
    path = Path(path)
    exists = append and path.exists() and path.stat().st_size > 0
    fh = open(path, "a" if exists else "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    if not exists:
        w.writerow(RESULT_FIELDS)
    return fh, w


def result_rows(out, names):
    for res in out.results:
        yield [_fmt(v) for v in (out.batch, out.N, res.r, names[res.r] if names else res.r,
                                 res.estimate, res.se, res.ci_low, res.ci_high, res.tau,
                                 float(out.lam), float(out.sigma2), res.status)]


def _num(text):
    return None if text in ("", "NA") else float(text)


def read_raw_results(path) -> list[dict]:
    """Parse a simulation ``raw.csv`` back into record dicts."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        out = []
        for row in reader:
            out.append({
                "replication": int(row["replication"]),
                "batch": int(row["batch"]),
                "N": int(row["N"]),
                "coord": int(row["coord"]),
                "truth": float(row["truth"]),
                "estimate": _num(row["estimate"]),
                "se": _num(row["se"]),
                "ci_low": _num(row["ci_low"]),
                "ci_high": _num(row["ci_high"]),
                "tau": _num(row["tau"]),
                "lambda": float(row["lambda"]),
                "sigma2": float(row["sigma2"]),
                "status": row["status"],
            })
    return out


def write_raw_results(rows, fields, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
