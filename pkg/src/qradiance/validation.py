"""Small input-validation helpers used at public API boundaries."""
from __future__ import annotations

import numpy as np


def check_array(x, name: str, ndim: int | None = None, dtype=np.float64) -> np.ndarray:
    """Coerce to a float ndarray and require finite entries."""
    arr = np.asarray(x, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_range(x: np.ndarray, name: str, lo: float, hi: float) -> np.ndarray:
    if x.size and (x.min() < lo or x.max() > hi):
        raise ValueError(f"{name} must lie in [{lo}, {hi}], got range "
                         f"[{x.min():.6g}, {x.max():.6g}]")
    return x


def check_positive_int(v, name: str, minimum: int = 1) -> int:
    if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {v!r}")
    return int(v)


def check_index(q, name: str, n: int) -> int:
    if not isinstance(q, (int, np.integer)) or isinstance(q, bool) or not 0 <= q < n:
        raise ValueError(f"{name} must be an index in [0, {n}), got {q!r}")
    return int(q)
