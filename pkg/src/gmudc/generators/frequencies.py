"""Spectral frequency sampling for shift-invariant kernels."""

from typing import Tuple, Union

import numpy as np

Shape = Union[int, Tuple[int, ...]]


def sample_gaussian_frequencies(
    shape: Shape, bandwidth: float, rng: np.random.Generator
) -> np.ndarray:
    """Bochner measure of exp(-|h|^2 / (2 s^2)): i.i.d. N(0, 1/s^2) coordinates."""
    return rng.standard_normal(shape) / bandwidth


def sample_laplacian_frequencies(
    shape: Shape, bandwidth: float, rng: np.random.Generator
) -> np.ndarray:
    """Bochner measure of exp(-|h|_1 / s): i.i.d. Cauchy(0, 1/s) coordinates."""
    return rng.standard_cauchy(shape) / bandwidth


def sample_phases(shape: Shape, rng: np.random.Generator) -> np.ndarray:
    """Uniform phases on [0, 2pi)."""
    return rng.uniform(0.0, 2.0 * np.pi, shape)
