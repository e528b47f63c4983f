"""Input-validation helpers used by dataclass constructors and file loaders.

All helpers raise ``ValueError`` subclasses carrying the offending field name,
so estimator and loader errors stay actionable.
"""

from __future__ import annotations

from typing import Sequence, Type

import numpy as np


def check_scalar(
    value: float,
    name: str,
    *,
    ge: float | None = None,
    gt: float | None = None,
    le: float | None = None,
    lt: float | None = None,
    err: Type[ValueError] = ValueError,
) -> float:
    """Validate a finite scalar against open/closed bounds and return it."""
    v = float(value)
    if not np.isfinite(v):
        raise _make(err, name, f"must be finite, got {value!r}")
    if ge is not None and v < ge:
        raise _make(err, name, f"must be >= {ge}, got {v}")
    if gt is not None and v <= gt:
        raise _make(err, name, f"must be > {gt}, got {v}")
    if le is not None and v > le:
        raise _make(err, name, f"must be <= {le}, got {v}")
    if lt is not None and v >= lt:
        raise _make(err, name, f"must be < {lt}, got {v}")
    return v


def check_array_1d(
    values: Sequence[float] | np.ndarray,
    name: str,
    *,
    n: int | None = None,
    err: Type[ValueError] = ValueError,
) -> np.ndarray:
    """Coerce to a finite 1-D float array, optionally of fixed length."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise _make(err, name, f"must be one-dimensional, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise _make(err, name, f"must have length {n}, got {arr.shape[0]}")
    if arr.size and not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise _make(err, name, f"element {bad} is not finite")
    return arr


def check_strictly_increasing(
    arr: np.ndarray, name: str, *, err: Type[ValueError] = ValueError
) -> np.ndarray:
    if arr.size >= 2 and not np.all(np.diff(arr) > 0):
        raise _make(err, name, "must be strictly increasing")
    return arr


def check_key(doc: dict, key: str, parent: str, err: Type[ValueError]) -> object:
    """Fetch a required key from a JSON document with a path diagnostic."""
    if key not in doc:
        raise _make(err, f"{parent}{key}", "required field is missing")
    return doc[key]


def _make(err: Type[ValueError], field: str, message: str) -> ValueError:
    try:
        return err(field, message)  # RouteFormatError-style signature
    except TypeError:
        return err(f"{field}: {message}")
