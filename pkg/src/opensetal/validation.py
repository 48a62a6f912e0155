"""Small input-validation and numeric helpers used across modules."""

from __future__ import annotations

import numpy as np

from .errors import DataError


def as_float_matrix(x, name: str = "array") -> np.ndarray:
    """Coerce to a finite 2-D float64 array, raising DataError otherwise."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


def check_dims(images: np.ndarray, other: np.ndarray, name: str) -> None:
    if images.shape[1] != other.shape[1]:
        raise DataError(
            f"dimension mismatch: images have D={images.shape[1]} "
            f"but {name} has D={other.shape[1]}"
        )


def l2_normalize(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Row-normalize; zero rows are returned unchanged (caller decides policy)."""
    norms = np.linalg.norm(x, axis=axis, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return x / safe


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax."""
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def round_half_up(x: float) -> int:
    """Deterministic rounding, .5 always up, independent of banker's rounding."""
    return int(np.floor(x + 0.5))
