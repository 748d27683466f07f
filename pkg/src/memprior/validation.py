"""Input validation helpers shared across estimators and operators."""

import numpy as np

from .errors import DimensionMismatchError


def check_vector(x, dim=None, name="x"):
    """Coerce to a 1-D float64 array, optionally enforcing its length."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-D, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatchError(
            f"{name} has dimension {arr.shape[0]}, expected {dim}"
        )
    return arr


def check_matrix(X, n_cols=None, name="X"):
    """Coerce to a 2-D float64 array, optionally enforcing the column count."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got shape {arr.shape}")
    if n_cols is not None and arr.shape[1] != n_cols:
        raise DimensionMismatchError(
            f"{name} has {arr.shape[1]} columns, expected {n_cols}"
        )
    return arr


def check_training_set(X, name="training set"):
    """Validate an ordered (N, d) array of training examples, N >= 1."""
    arr = check_matrix(X, name=name)
    if arr.shape[0] < 1:
        raise DimensionMismatchError(f"{name} must contain at least one example")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_time(t, name="t"):
    """Validate a scalar diffusion time in [0, 1]."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {t}")
    return t


def check_positive(value, name):
    value = float(value)
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value
