"""JSON helpers with deterministic float formatting.

All exported artifacts print floats with 17 significant digits so that a
re-run with identical inputs produces byte-identical files.
"""

import json

import numpy as np

from .errors import StructuralError


def _format(obj) -> str:
    if isinstance(obj, dict):
        items = ", ".join(f"{json.dumps(str(k))}: {_format(v)}" for k, v in obj.items())
        return "{" + items + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_format(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return _format(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isnan(x) or np.isinf(x):
            raise StructuralError("cannot serialize non-finite float")
        return format(x, ".17g")
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    raise StructuralError(f"cannot serialize object of type {type(obj).__name__}")


def dumps(obj) -> str:
    """Serialize to JSON with .17g floats (deterministic byte output)."""
    return _format(obj)


def dump(obj, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj))
        fh.write("\n")


def load(path):
    with open(path) as fh:
        return json.load(fh)


def as_matrix(value, name: str) -> np.ndarray:
    """Nested-list -> 2-D float array, rejecting ragged rows."""
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise StructuralError(f"{name}: not a rectangular numeric array") from exc
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise StructuralError(f"{name}: expected a matrix, got ndim={arr.ndim}")
    if arr.dtype == object:
        raise StructuralError(f"{name}: ragged array")
    return arr


def as_vector(value, name: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise StructuralError(f"{name}: not a numeric vector") from exc
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.dtype == object:
        raise StructuralError(f"{name}: expected a flat numeric vector")
    return arr


def format_float(x: float) -> str:
    """17-significant-digit decimal form used in CSV artifacts too."""
    return format(float(x), ".17g")
