"""CSV ingestion and deterministic writers for reports, traces, support and grids."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .density import DataSet, SparseKde
from .errors import DataError

SCHEMA_VERSION = 1


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _looks_like_header(rows: List[List[str]]) -> bool:
    first = [_is_number(c) for c in rows[0]]
    if all(first):
        return False
    if len(rows) < 2 or not any(first):
        return True
    second = rows[1]
    return any(not f and j < len(second) and _is_number(second[j]) for j, f in enumerate(first))


def fmt(x: float) -> str:
    # shortest repr that round-trips exactly
    return repr(float(x))


def read_csv(
    path: str | Path,
    columns: Optional[Sequence[str]] = None,
    where: Optional[Tuple[str, str]] = None,
) -> Tuple[DataSet, List[str]]:
    """Load selected numeric columns from a comma-separated UTF-8 file.

    The first row is a header when it has a text cell above a numeric cell
    (or is entirely text), so label columns such as ``M,0.45,...`` do not
    trigger it.
    ``columns`` items are header names or 0-based indices (as strings); all
    columns are used when omitted. ``where=(col, value)`` keeps only rows whose
    ``col`` cell equals ``value`` (text comparison), e.g. ``("0", "M")``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: file is empty")
    header = None
    if _looks_like_header(rows):
        header, rows = [c.strip() for c in rows[0]], rows[1:]
    width = len(header) if header else len(rows[0]) if rows else 0

    def resolve(col: str) -> int:
        col = col.strip()
        if header and col in header:
            return header.index(col)
        if col.lstrip("-").isdigit():
            i = int(col)
            if 0 <= i < width:
                return i
            raise DataError(f"column index {i} out of range (file has {width} columns)")
        raise DataError(f"unknown column {col!r}" + ("" if header else " (file has no header row)"))

    sel = [resolve(c) for c in columns] if columns else list(range(width))
    if where is not None:
        wcol = resolve(where[0])
        rows = [r for r in rows if len(r) > wcol and r[wcol].strip() == where[1]]
    names = [header[i] if header else str(i) for i in sel]

    out = np.empty((len(rows), len(sel)))
    first_line = 2 if header else 1
    for i, r in enumerate(rows):
        if len(r) != width:
            raise DataError(f"line {first_line + i}: expected {width} fields, got {len(r)}")
        for j, c in enumerate(sel):
            cell = r[c].strip()
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"line {first_line + i}, column {names[j]!r}: non-numeric value {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(f"line {first_line + i}, column {names[j]!r}: non-finite value {cell!r}")
            out[i, j] = v
    if out.shape[0] < 2:
        raise DataError(f"need at least 2 data rows, got {out.shape[0]}")
    return DataSet(out), names


def write_data_csv(path: str | Path, data: DataSet, names: Optional[Sequence[str]] = None):
    names = list(names) if names else [f"x{j + 1}" for j in range(data.dim)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in data.points:
            w.writerow([fmt(v) for v in row])


def write_json(path: str | Path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False, allow_nan=False)
        fh.write("\n")


def write_rows(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, float) else v for v in r])


def write_support(path: str | Path, kde: SparseKde, names: Optional[Sequence[str]] = None):
    names = list(names) if names else [f"x{j + 1}" for j in range(kde.dim)]
    rows = ([int(i), *map(float, p), float(g)] for i, p, g in zip(kde.support, kde.points, kde.gamma))
    write_rows(path, ["index", *names, "gamma"], rows)


def read_support(path: str | Path) -> Tuple[np.ndarray, np.ndarray, np.ndarray, List[str]]:
    """Return ``(index, points, gamma, coordinate names)`` from a support file."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or rows[0][0] != "index" or rows[0][-1] != "gamma" or len(rows[0]) < 3:
        raise DataError(f"{path}: not a support file (expected header index,<coords...>,gamma)")
    try:
        arr = np.array([[float(c) for c in r] for r in rows[1:]])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if arr.ndim != 2 or arr.shape[1] != len(rows[0]):
        raise DataError(f"{path}: ragged rows")
    return arr[:, 0].astype(np.int64), arr[:, 1:-1], arr[:, -1], rows[0][1:-1]
