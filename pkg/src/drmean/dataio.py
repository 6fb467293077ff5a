"""CSV dataset reading and writing.

Dialect: comma-delimited with a header row.  The response indicator column
holds 0/1; the outcome column is empty (or the literal ``NA``) exactly where
the indicator is 0.  Floats are written with 17 significant digits so tables
round-trip bit-faithfully.
"""

from __future__ import annotations

import csv

import numpy as np

from .errors import DataError
from .models import Dataset

MISSING_TOKENS = ("", "NA", "na", "NaN", "nan")


def _parse_float(token: str, row: int, col: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise DataError(
            f"row {row}: column {col!r} has non-numeric value {token!r}"
        ) from None


def read_dataset_csv(
    path, t: str = "t", y: str = "y", pi: str | None = None, m: str | None = None
):
    """Read a dataset file; returns (Dataset, pi values or None, m values or None).

    Row numbers in error messages count from 1 at the first data row.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file, expected a header row")
        fields = [f.strip() for f in reader.fieldnames]
        for role, col in (("t", t), ("y", y), ("pi", pi), ("m", m)):
            if col is not None and col not in fields:
                raise DataError(f"{path}: no column {col!r} for role {role}")
        records = [
            {k.strip(): (v or "").strip() for k, v in row.items()}
            for row in reader
        ]
    if not records:
        raise DataError(f"{path}: no data rows")

    n = len(records)
    t_vals = np.zeros(n, dtype=np.int8)
    y_vals = np.full(n, np.nan)
    special = {t, y, pi, m} - {None}
    covariates: dict[str, np.ndarray] = {
        c: np.zeros(n) for c in fields if c not in special
    }
    pi_vals = np.zeros(n) if pi else None
    m_vals = np.zeros(n) if m else None

    for i, rec in enumerate(records):
        row = i + 1
        tok = rec.get(t, "")
        if tok not in ("0", "1"):
            raise DataError(f"row {row}: t must be 0 or 1, got {tok!r}")
        t_vals[i] = int(tok)
        ytok = rec.get(y, "")
        if t_vals[i] == 1:
            if ytok in MISSING_TOKENS:
                raise DataError(f"row {row}: y is missing although t = 1")
            y_vals[i] = _parse_float(ytok, row, y)
        else:
            if ytok not in MISSING_TOKENS:
                raise DataError(f"row {row}: y is non-empty although t = 0")
        for c, arr in covariates.items():
            arr[i] = _parse_float(rec.get(c, ""), row, c)
        if pi_vals is not None:
            pi_vals[i] = _parse_float(rec.get(pi, ""), row, pi)
        if m_vals is not None:
            m_vals[i] = _parse_float(rec.get(m, ""), row, m)

    try:
        d = Dataset(t=t_vals, y=y_vals, columns=covariates)
    except ValueError as e:
        raise DataError(str(e)) from None
    return d, pi_vals, m_vals


def write_dataset_csv(path, d: Dataset, pi=None, m=None, pi_col="pi", m_col="m"):
    """Write a dataset (plus optional nuisance columns) in the reader's dialect."""
    cols = list(d.columns)
    header = ["t", "y"] + cols
    if pi is not None:
        header.append(pi_col)
    if m is not None:
        header.append(m_col)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(d.n):
            row = [str(int(d.t[i]))]
            row.append(format(d.y[i], ".17g") if d.t[i] == 1 else "")
            row.extend(format(d.columns[c][i], ".17g") for c in cols)
            if pi is not None:
                row.append(format(pi[i], ".17g"))
            if m is not None:
                row.append(format(m[i], ".17g"))
            w.writerow(row)
