"""Input validation helpers used across the toolkit."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def check_binary_mask(arr, name: str = "mask") -> np.ndarray:
    """Coerce ``arr`` to a 2-D boolean array, rejecting non-binary values."""
    a = np.asarray(arr)
    if a.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {a.shape}")
    if a.dtype == bool:
        return a
    uniq = np.unique(a)
    if not np.isin(uniq, (0, 1, 255)).all():
        raise ValidationError(f"{name} contains non-binary values: {uniq[:8]}")
    return a > 0


def check_same_shape(a, b, name_a: str = "array", name_b: str = "array") -> None:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValidationError(
            f"shape mismatch: {name_a} {a.shape} vs {name_b} {b.shape}"
        )


def check_finite(arr, name: str = "array") -> np.ndarray:
    a = np.asarray(arr, dtype=np.float64)
    if not np.isfinite(a).all():
        raise ValidationError(f"{name} contains non-finite values")
    return a


def check_point_in_canvas(point, width: int, height: int) -> tuple[float, float]:
    x, y = float(point[0]), float(point[1])
    if not (0 <= x < width and 0 <= y < height):
        raise ValueError(
            f"point ({x}, {y}) outside canvas [0, {width}) x [0, {height})"
        )
    return x, y


def check_positive(value, name: str):
    if value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value
