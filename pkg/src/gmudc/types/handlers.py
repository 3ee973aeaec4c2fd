"""Coercion helpers for index sets and numeric arrays."""

from typing import Iterable, Optional, Tuple

import numpy as np

from ..exceptions import DimensionMismatchError


def normalize_index_set(
    values: Iterable[int], upper: Optional[int] = None, one_based: bool = False
) -> Tuple[int, ...]:
    """Return a sorted, duplicate-free, 0-based tuple of indices.

    With ``one_based`` the input ids are shifted down by one. ``upper`` bounds
    the 0-based result from above (exclusive).
    """
    shift = 1 if one_based else 0
    result = tuple(sorted({int(v) - shift for v in values}))
    if result and result[0] < 0:
        lowest = 1 if one_based else 0
        raise ValueError(f"index {result[0] + shift} is below {lowest}")
    if upper is not None and result and result[-1] >= upper:
        raise ValueError(f"index {result[-1] + shift} exceeds {upper - 1 + shift}")
    return result


def as_vector(value: object, dim: int, what: str) -> np.ndarray:
    """Coerce ``value`` to a float vector of length ``dim``."""
    vector = np.asarray(value, dtype=float)
    if vector.ndim != 1 or vector.shape[0] != dim:
        raise DimensionMismatchError(what, dim, vector.shape)
    return vector


def as_batch(value: object, dim: int, what: str) -> Tuple[np.ndarray, bool]:
    """Coerce ``value`` to an ``(M, dim)`` float array.

    Returns the array and whether the input was a single vector.
    """
    array = np.asarray(value, dtype=float)
    single = array.ndim == 1
    if single:
        array = array[np.newaxis, :]
    if array.ndim != 2 or array.shape[1] != dim:
        raise DimensionMismatchError(what, dim, array.shape)
    return array, single
