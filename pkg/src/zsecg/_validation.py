"""Input validation helpers shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import InvalidArgument


def check_beats(X, length=None, unit_norm=False, atol=1e-6):
    """Validate a (n_beats, n_samples) float matrix of beats."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if length is not None and X.shape[1] != length:
        raise InvalidArgument(f"expected beats of length {length}, got {X.shape[1]}")
    if unit_norm:
        norms = np.linalg.norm(X, axis=1)
        if np.any(np.abs(norms - 1.0) > atol):
            raise InvalidArgument("beats must have unit l2 norm")
    return X


def check_pairs(X, length=128):
    """Validate CNN input of shape (n_beats, 2, length)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[1] != 2 or X.shape[2] != length:
        raise InvalidArgument(f"expected shape (n, 2, {length}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgument("input contains non-finite values")
    return X


def check_binary_labels(y):
    y = np.asarray(y).astype(np.int64).ravel()
    if not np.all((y == 0) | (y == 1)):
        raise InvalidArgument("labels must be 0 (Normal) or 1 (Abnormal)")
    return y


def normalize_rows(X):
    X = np.asarray(X, dtype=float)
    norms = np.linalg.norm(X, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise InvalidArgument("cannot normalize a zero-energy beat")
    return X / norms
