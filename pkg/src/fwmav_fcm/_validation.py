"""Input validation helpers."""

from __future__ import annotations

import numpy as np

from .exceptions import ConfigError, DimensionError


def as_data_matrix(X, name="X"):
    """Return ``X`` as a finite 2-D float array (1-D input becomes one column)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise DimensionError(f"{name} must be 1-D or 2-D, got ndim={X.ndim}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionError(f"{name} must be non-empty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ConfigError(f"{name} contains non-finite values")
    return X


def check_fuzzifier(m):
    m = float(m)
    if not m > 1.0 or not np.isfinite(m):
        raise ConfigError(f"fuzzifier m must be > 1, got {m}")
    return m


def check_positive(value, name):
    value = float(value)
    if not value > 0 or not np.isfinite(value):
        raise ConfigError(f"{name} must be > 0, got {value}")
    return value


def check_positive_int(value, name):
    if isinstance(value, bool) or int(value) != value or value < 1:
        raise ConfigError(f"{name} must be an integer >= 1, got {value!r}")
    return int(value)


def check_vector(x, size, name="x"):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != size:
        raise DimensionError(f"{name} must have length {size}, got {x.shape[0]}")
    return x
