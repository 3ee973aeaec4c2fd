"""Uniform fixed-size subset sampling."""

import numpy as np


def uniform_subsets(
    population: int, size: int, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``count`` independent uniform ``size``-subsets of ``range(population)``.

    Partial Fisher-Yates, vectorized over the draws. Rows of the result are
    sorted ascending.
    """
    if not 0 <= size <= population:
        raise ValueError(f"subset size {size} outside 0..{population}")
    perm = np.tile(np.arange(population), (count, 1))
    if size == 0 or count == 0:
        return np.empty((count, 0), dtype=np.int64)
    rows = np.arange(count)
    remaining = population - np.arange(size)
    picks = np.arange(size) + np.floor(
        rng.random((count, size)) * remaining
    ).astype(np.int64)
    for i in range(size):
        j = picks[:, i]
        head = perm[rows, i].copy()
        perm[rows, i] = perm[rows, j]
        perm[rows, j] = head
    return np.sort(perm[:, :size], axis=1)


def subset_indicator(subsets: np.ndarray, population: int) -> np.ndarray:
    """Turn an ``(count, size)`` subset array into a boolean incidence matrix."""
    indicator = np.zeros((subsets.shape[0], population), dtype=bool)
    rows = np.repeat(np.arange(subsets.shape[0]), subsets.shape[1])
    indicator[rows, subsets.ravel()] = True
    return indicator
