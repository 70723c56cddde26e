"""Input validation helpers shared by the estimators and the functional API."""

import numbers

import numpy as np

from .errors import ContractError, InvalidInputError


def check_points(points, *, name="points", min_points=1, dim=3, dtype=np.float64):
    """Return ``points`` as a finite ``(n, dim)`` float array or raise."""
    arr = np.asarray(points, dtype=dtype)
    if arr.ndim == 1 and dim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise InvalidInputError(f"{name} must have {dim} columns, got {arr.shape[1]}")
    if arr.shape[0] < min_points:
        raise InvalidInputError(f"{name} needs at least {min_points} rows, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def check_features(features, *, name="features"):
    """Finite 2-D feature matrix with any number of columns."""
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return check_points(arr, name=name, dim=None)


def check_clouds(X, *, name="X"):
    """Stack a batch of equally sized clouds into an ``(N, n, c)`` array."""
    if isinstance(X, np.ndarray):
        arr = X
    else:
        items = [getattr(c, "points", c) for c in X]
        if not items:
            raise InvalidInputError(f"{name} is empty")
        sizes = {np.shape(c) for c in items}
        if len(sizes) != 1:
            raise ContractError(f"{name}: clouds differ in shape: {sorted(sizes)}")
        arr = np.stack([np.asarray(c) for c in items])
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 3:
        raise InvalidInputError(f"{name} must be (n_clouds, n_points, n_channels), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidInputError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise InvalidInputError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_random_state(seed):
    """Turn ``None``/int/Generator into a ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
