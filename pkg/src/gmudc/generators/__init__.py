"""Random generators for gmudc."""

from .frequencies import (
    sample_gaussian_frequencies,
    sample_laplacian_frequencies,
    sample_phases,
)
from .inputs import sample_standard_normal, sample_uniform_cube
from .subsets import subset_indicator, uniform_subsets

__all__ = [
    "sample_gaussian_frequencies",
    "sample_laplacian_frequencies",
    "sample_phases",
    "sample_standard_normal",
    "sample_uniform_cube",
    "subset_indicator",
    "uniform_subsets",
]
