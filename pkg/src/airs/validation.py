"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

from collections.abc import Mapping
from pathlib import Path

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import InstanceError
from .model import Instance, load_instance, validate_instance


def check_instance(obj) -> Instance:
    """Coerce an :class:`Instance`, a mapping in the instance schema or a JSON path."""
    if isinstance(obj, Instance):
        return obj
    if isinstance(obj, Mapping):
        return validate_instance(obj)
    if isinstance(obj, (str, Path)):
        return load_instance(obj)
    raise InstanceError(f"cannot interpret {type(obj).__name__} as an instance")


def check_multipliers(h) -> np.ndarray:
    """1-D array of positive, finite cost multipliers."""
    arr = check_array(np.atleast_1d(np.asarray(h, dtype=float)), ensure_2d=False)
    if arr.ndim != 1:
        raise InstanceError("cost multipliers must be one-dimensional")
    if np.any(arr <= 0):
        raise InstanceError("cost multipliers must be positive")
    return arr


def check_tolerance(tol: float) -> float:
    tol = float(tol)
    if not 0 < tol < 1:
        raise InstanceError(f"tolerance must lie in (0, 1), got {tol}")
    return tol


def check_max_iter(max_iter: int) -> int:
    if int(max_iter) != max_iter or max_iter < 1:
        raise InstanceError(f"max_iter must be a positive integer, got {max_iter}")
    return int(max_iter)


def check_seed(seed: int) -> int:
    if int(seed) != seed or not 0 <= seed < 2 ** 64:
        raise InstanceError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return int(seed)
