"""Small input-checking helpers shared by the functional API and the estimators."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ConfigError, NotFittedError


def check_signal(x, name="x", min_length=1, dtype=np.float64):
    """Return ``x`` as a finite 1-D float array of at least ``min_length`` samples."""
    arr = check_array(
        np.atleast_1d(np.asarray(x)),
        ensure_2d=False,
        dtype=dtype,
        ensure_min_samples=0,
        input_name=name,
    )
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_length:
        raise ConfigError(f"{name} needs at least {min_length} samples, got {arr.size}")
    return arr


def check_complex(x, name="x"):
    arr = np.atleast_1d(np.asarray(x, dtype=np.complex128))
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite values")
    return arr


def check_positive(value, name, allow_zero=False):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ConfigError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ConfigError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_int(value, name, minimum=None, maximum=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ConfigError(f"{name} must be <= {maximum}, got {value}")
    return value


def check_is_fitted(estimator, attributes):
    if isinstance(attributes, str):
        attributes = [attributes]
    missing = [a for a in attributes if not hasattr(estimator, a)]
    if missing:
        raise NotFittedError(
            f"This {type(estimator).__name__} instance is not fitted yet; call 'fit' first."
        )
