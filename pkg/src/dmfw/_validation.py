"""Input validation helpers used across the estimators and primitives."""

import numbers

import numpy as np

from .exceptions import NumericError


def check_finite_array(a, name="array"):
    """Return ``a`` as a float ndarray, raising NumericError on NaN/inf."""
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite values")
    return arr


def check_vector(a, dim=None, name="vector"):
    """Validate a finite array whose last axis has length ``dim``."""
    arr = check_finite_array(a, name)
    if arr.ndim == 0:
        raise ValueError(f"{name} must be at least 1-dimensional")
    if dim is not None and arr.shape[-1] != dim:
        raise ValueError(f"{name} has trailing dimension {arr.shape[-1]}, expected {dim}")
    return arr


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_positive_real(value, name, allow_zero=False):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ValueError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be finite and {bound}, got {value}")
    return value


def check_open_unit(value, name):
    """Validate a real in the open interval (0, 1)."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ValueError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in (0,1), got {value}")
    return value


def check_choice(value, name, choices):
    if value not in choices:
        raise ValueError(f"{name} must be one of {sorted(choices)}, got {value!r}")
    return value
