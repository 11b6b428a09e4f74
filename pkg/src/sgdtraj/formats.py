"""On-disk formats: key=value manifests and full-precision CSV tables."""

from __future__ import annotations

import csv
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .equivalence import DistanceMatrix


class FormatError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_manifest(path, items: dict) -> None:
    lines = []
    for key, value in items.items():
        if "=" in key or "\n" in str(value):
            raise FormatError(f"cannot encode manifest entry {key!r}")
        lines.append(f"{key}={value}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_manifest(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"{path}: malformed manifest line {line!r}")
        out[key] = value
    return out


def _write_rows(path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise FormatError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    for n, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise FormatError(f"{path}:{n}: expected {len(header)} columns, got {len(row)}")
    return header, body


def write_trajectory(path, ids: Sequence[str], vectors: Sequence[np.ndarray]) -> None:
    """One row per snapshot: id then the tau (real) or kappa (integer) entries.

    Value columns are named t0, t1, ... for tau and k0, k1, ... for kappa.
    """
    if len(ids) != len(vectors):
        raise FormatError("ids and vectors differ in length")
    if len(set(ids)) != len(ids):
        raise FormatError("snapshot ids must be unique")
    width = len(vectors[0]) if len(vectors) else 0
    integer = bool(len(vectors)) and np.issubdtype(np.asarray(vectors[0]).dtype, np.integer)
    prefix = "k" if integer else "t"
    header = ["id"] + [f"{prefix}{j}" for j in range(width)]
    rows = []
    for sid, vec in zip(ids, vectors):
        vec = np.asarray(vec)
        if vec.shape != (width,):
            raise FormatError("trajectory rows must all have the same length")
        if np.issubdtype(vec.dtype, np.integer) != integer:
            raise FormatError("cannot mix tau and kappa rows in one file")
        if integer:
            rows.append([sid] + [str(int(v)) for v in vec])
        else:
            rows.append([sid] + [format(float(v), ".17g") for v in vec])
    _write_rows(path, header, rows)


def read_trajectory(path) -> tuple[list[str], list[np.ndarray]]:
    header, body = _read_rows(path)
    if header[:1] != ["id"]:
        raise FormatError(f"{path}: first column must be 'id'")
    ids = [row[0] for row in body]
    if len(set(ids)) != len(ids):
        raise FormatError(f"{path}: duplicate snapshot ids")
    cols = header[1:]
    kinds = {c[:1] for c in cols}
    if len(kinds) > 1 or not kinds <= {"t", "k"}:
        raise FormatError(f"{path}: value columns must all be t<j> (tau) or k<j> (kappa)")
    parse, dtype = (int, np.int64) if kinds == {"k"} else (float, np.float64)
    vectors = []
    for row in body:
        try:
            vectors.append(np.array([parse(v) for v in row[1:]], dtype=dtype))
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None
    return ids, vectors


def write_distance_matrix(path, dm: DistanceMatrix) -> None:
    rows = [[sid] + [fmt(v) for v in dm.values[i]] for i, sid in enumerate(dm.ids)]
    _write_rows(path, ["id", *dm.ids], rows)


def read_distance_matrix(path) -> DistanceMatrix:
    header, body = _read_rows(path)
    ids = header[1:]
    if len(body) != len(ids) or [row[0] for row in body] != ids:
        raise FormatError(f"{path}: distance matrix is not square with matching ids")
    try:
        values = np.array([[float(v) for v in row[1:]] for row in body], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    try:
        return DistanceMatrix(tuple(ids), values.reshape(len(ids), len(ids)))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_coordinates(path, ids: Sequence[str], coords: np.ndarray) -> None:
    coords = np.asarray(coords)
    names = ["x", "y"] if coords.shape[1] == 2 else [f"x{j + 1}" for j in range(coords.shape[1])]
    rows = [[sid] + [fmt(v) for v in coords[i]] for i, sid in enumerate(ids)]
    _write_rows(path, ["id", *names], rows)


def read_coordinates(path) -> tuple[list[str], np.ndarray]:
    header, body = _read_rows(path)
    ids = [row[0] for row in body]
    try:
        coords = np.array([[float(v) for v in row[1:]] for row in body], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return ids, coords.reshape(len(ids), len(header) - 1)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    _write_rows(path, header, ([fmt(v) if not isinstance(v, str) else v for v in r] for r in rows))


def read_table(path) -> tuple[list[str], list[list[str]]]:
    return _read_rows(path)


def replace_dir(tmp: Path, final: Path) -> None:
    """Move a fully written temporary directory into place."""
    if final.exists():
        if any(final.iterdir()):
            raise FileExistsError(f"output directory {final} is not empty")
        final.rmdir()
    os.replace(tmp, final)
