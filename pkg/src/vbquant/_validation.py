"""Small input-validation helpers shared by the public entry points."""

from __future__ import annotations

import numpy as np

from .errors import AxisError, DomainError


def as_float_array(values, name="array"):
    """Coerce to a 1-D float64 array, rejecting anything non-numeric."""
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"{name} is not numeric: {exc}") from None
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one dimensional, got shape {arr.shape}")
    return arr


def check_finite(arr, name="array"):
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def check_strictly_increasing(x, name="x"):
    if x.size >= 2 and not np.all(np.diff(x) > 0):
        raise AxisError(f"{name} must be strictly increasing")
    return x


def check_positive(value, name):
    if not np.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be positive, got {value!r}")
    return float(value)


def check_window(window):
    """A window is an (lo, hi) pair with lo < hi."""
    try:
        lo, hi = float(window[0]), float(window[1])
    except (TypeError, ValueError, IndexError):
        raise DomainError(f"window must be an (lo, hi) pair, got {window!r}") from None
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise DomainError(f"window bounds must satisfy lo < hi, got ({lo}, {hi})")
    return lo, hi
