"""CSV ingestion and result serialisation."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import IngestionError
from .marginals import Dataset

FLOAT_FMT = "%.17g"


def _is_number(field: str) -> bool:
    try:
        float(field)
    except ValueError:
        return False
    return True


def read_csv(path, replicate_id: Optional[str] = None) -> Dataset:
    """Rows are time points, columns variables; an optional non-numeric header row."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh)]
    except OSError as exc:
        raise IngestionError(f"{path}: cannot read ({exc.strerror})") from None
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise IngestionError(f"{path}: empty file")
    names = None
    first = [c.strip() for c in rows[0]]
    if not all(_is_number(c) for c in first):
        names = first
        rows = rows[1:]
        line0 = 2
    else:
        line0 = 1
    width = len(names) if names else len(rows[0]) if rows else 0
    values = np.empty((len(rows), width))
    for k, row in enumerate(rows):
        if len(row) != width:
            raise IngestionError(f"{path}: line {k + line0} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            try:
                x = float(cell)
            except ValueError:
                raise IngestionError(
                    f"{path}: line {k + line0}, column {j + 1}: not a number ({cell.strip()!r})"
                ) from None
            if not math.isfinite(x):
                raise IngestionError(f"{path}: line {k + line0}, column {j + 1}: non-finite value {cell.strip()}")
            values[k, j] = x
    try:
        return Dataset(values, replicate_id=replicate_id or path.stem, variable_names=names)
    except IngestionError as exc:
        raise IngestionError(f"{path}: {exc}") from None


def expand_inputs(paths: Sequence[str]) -> list[Path]:
    """Files as given; a directory contributes its ``*.csv`` files in name order."""
    out: list[Path] = []
    for p in paths:
        path = Path(p)
        if path.is_dir():
            found = sorted(path.glob("*.csv"))
            if not found:
                raise IngestionError(f"{path}: directory contains no .csv file")
            out.extend(found)
        else:
            out.append(path)
    if not out:
        raise IngestionError("no input data given")
    return out


def read_replicates(paths: Sequence[str]) -> list[Dataset]:
    files = expand_inputs(paths)
    data = [read_csv(f) for f in files]
    shape = data[0].values.shape
    for f, d in zip(files, data):
        if d.values.shape != shape:
            raise IngestionError(f"{f}: shape {d.values.shape} differs from {files[0]} {shape}")
    return data


def write_matrix_csv(path, values: np.ndarray, header: Optional[Sequence[str]] = None) -> None:
    with open(path, "w", newline="") as fh:
        if header is not None:
            fh.write(",".join(header) + "\n")
        np.savetxt(fh, np.atleast_2d(values), delimiter=",", fmt=FLOAT_FMT)


def write_table(path, columns: Sequence[str], rows: Iterable[Sequence], int_cols: int = 0) -> None:
    """Write rows whose first ``int_cols`` fields are integers and the rest floats."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            ints = [str(int(v)) for v in row[:int_cols]]
            floats = [FLOAT_FMT % v for v in row[int_cols:]]
            fh.write(",".join(ints + floats) + "\n")


def write_long(path, columns: Sequence[str], int_part: np.ndarray, float_part: np.ndarray) -> None:
    """Vectorised long-format table: integer key columns then float columns."""
    int_part = np.asarray(int_part, dtype=np.int64)
    float_part = np.asarray(float_part, dtype=float)
    int_part = int_part.reshape(len(int_part), -1) if int_part.size else np.zeros((0, 0), dtype=np.int64)
    float_part = float_part.reshape(len(float_part), -1) if float_part.size else np.zeros((0, 0))
    fmt = ["%d"] * int_part.shape[1] + [FLOAT_FMT] * float_part.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        if len(int_part):
            table = np.hstack([int_part.astype(object), float_part.astype(object)])
            np.savetxt(fh, table, delimiter=",", fmt=fmt)


def read_long(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            rest = fh.read()
        if rest.strip():
            body = np.loadtxt(io.StringIO(rest), delimiter=",", ndmin=2)
        else:
            body = np.zeros((0, len(header)))
    except (OSError, ValueError) as exc:
        raise IngestionError(f"{path}: {exc}") from None
    return header, body


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=False)
        fh.write("\n")


def read_json(path) -> dict:
    path = Path(path)
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise IngestionError(f"{path}: cannot read ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
