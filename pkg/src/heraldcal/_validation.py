"""Small argument checks used throughout the package."""

import math
from numbers import Integral

import numpy as np

from .exceptions import DomainError


def check_positive(value, name):
    value = float(value)
    if not (value > 0.0) or not math.isfinite(value):
        raise DomainError(f"{name} must be positive and finite, got {value!r}")
    return value


def check_nonnegative(value, name):
    value = float(value)
    if not (value >= 0.0) or not math.isfinite(value):
        raise DomainError(f"{name} must be non-negative and finite, got {value!r}")
    return value


def check_probability(value, name, *, open_upper=True):
    value = float(value)
    upper_ok = value < 1.0 if open_upper else value <= 1.0
    if not (value >= 0.0 and upper_ok):
        bound = "[0, 1)" if open_upper else "[0, 1]"
        raise DomainError(f"{name} must lie in {bound}, got {value!r}")
    return value


def check_efficiency(value, name):
    """Efficiencies live in (0, 1]."""
    value = float(value)
    if not (0.0 < value <= 1.0):
        raise DomainError(f"{name} must lie in (0, 1], got {value!r}")
    return value


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, (Integral, np.integer)):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value!r}")
    return int(value)


def as_1d_float(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr
