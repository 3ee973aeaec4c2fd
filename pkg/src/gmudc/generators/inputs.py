"""Input sample generation."""

import numpy as np


def sample_standard_normal(
    count: int, dim: int, scale: float, rng: np.random.Generator
) -> np.ndarray:
    """i.i.d. N(0, scale^2 I) rows."""
    return scale * rng.standard_normal((count, dim))


def sample_uniform_cube(
    count: int, dim: int, scale: float, rng: np.random.Generator
) -> np.ndarray:
    """i.i.d. rows uniform on [-scale, scale]^dim."""
    return rng.uniform(-scale, scale, (count, dim))
