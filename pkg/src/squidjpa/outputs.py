"""Deterministic CSV/JSON writers and the CSV readers for measured inputs."""

import csv
import json
import math
import os
from typing import Iterable, List, Sequence

import numpy as np

from .errors import ConfigError


class IoError(OSError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


def format_value(v) -> str:
    """Shortest round-tripping text; empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                if len(row) != len(header):
                    raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
                w.writerow([format_value(v) for v in row])
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from exc
    return path


def jsonable(x):
    """Replace non-finite floats by strings and numpy scalars by Python ones."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else format_value(x)
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    return x


def write_json(path: str, obj) -> str:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(jsonable(obj), fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from exc
    return path


def read_table(path: str, required: Sequence[str], optional: Sequence[str] = (),
               pointer: str = "/task/input") -> dict:
    """Read a headered numeric CSV into ``{column: ndarray}``."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            rows = list(reader)
    except OSError as exc:
        raise ConfigError(pointer, f"cannot read {path}: {exc.strerror or exc}") from exc
    missing = [c for c in required if c not in header]
    if missing:
        raise ConfigError(pointer, f"{path} lacks column(s) {', '.join(missing)}")
    unknown = [c for c in header if c not in required and c not in optional]
    if unknown:
        raise ConfigError(pointer, f"{path} has unexpected column(s) {', '.join(unknown)}")
    out = {}
    for col in header:
        try:
            out[col] = np.array([float(r[col]) for r in rows])
        except (TypeError, ValueError) as exc:
            raise ConfigError(pointer, f"{path}: non-numeric value in column {col}") from exc
    return out


def ensure_dir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from exc
    return path


def columns(*cols) -> List[tuple]:
    return list(zip(*cols))
