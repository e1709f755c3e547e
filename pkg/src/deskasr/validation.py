"""Input validation helpers for the estimator layer."""

from __future__ import annotations

import numpy as np

from deskasr.errors import DataError


def check_text_list(X, name: str = "X") -> list[str]:
    if isinstance(X, str):
        raise DataError(f"{name} must be a sequence of strings, not a single string")
    out = list(X)
    if not out:
        raise DataError(f"{name} is empty")
    for i, item in enumerate(out):
        if not isinstance(item, str):
            raise DataError(f"{name}[{i}] is {type(item).__name__}, expected str")
    return out


def check_feature_matrix(x, dim: int | None = None, name: str = "X") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise DataError(f"{name} must be a non-empty [T x D] matrix, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise DataError(f"{name} has {arr.shape[1]} columns, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


def check_feature_list(X, dim: int | None = None, name: str = "X") -> list[np.ndarray]:
    if isinstance(X, np.ndarray) and X.ndim == 2:
        return [check_feature_matrix(X, dim=dim, name=name)]
    out = [check_feature_matrix(x, dim=dim, name=f"{name}[{i}]") for i, x in enumerate(X)]
    if not out:
        raise DataError(f"{name} is empty")
    return out


def check_waveform_list(X, name: str = "X") -> list[np.ndarray]:
    out = []
    for i, x in enumerate(X):
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise DataError(f"{name}[{i}] must be a non-empty 1-D sample array")
        out.append(arr)
    if not out:
        raise DataError(f"{name} is empty")
    return out
