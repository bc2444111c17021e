"""CSV / JSON emission with a fixed, byte-stable format."""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

__all__ = ["EmitError", "fmt", "jsonable", "write_csv", "write_json", "field_rows"]


class EmitError(OSError):
    pass


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def jsonable(obj):
    """Convert numpy / Fraction / NaN values into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return [jsonable(obj.real), jsonable(obj.imag)]
    return obj


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise EmitError(f"cannot write {path}: {exc}") from exc
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(jsonable(obj), indent=2) + "\n")
    except OSError as exc:
        raise EmitError(f"cannot write {path}: {exc}") from exc
    return path


def field_rows(values: np.ndarray, nonzero_only: bool = False):
    """Rows ``(t, x, v_0, v_1, ...)`` from a ``(k, nt, nx)`` array."""
    k, nt, nx = values.shape
    for t in range(nt):
        for x in range(nx):
            col = values[:, t, x]
            if nonzero_only and not col.any():
                continue
            yield (t, x, *(float(c) for c in col))
