"""Kernel evaluation, spectral sampling and operator eigenvalues."""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import linalg
from scipy.spatial.distance import cdist

from .config import get_eigen_floor
from .exceptions import InvalidParameterError, UnsupportedKernelError
from .generators.frequencies import (
    sample_gaussian_frequencies,
    sample_laplacian_frequencies,
)
from .types import PositiveFloat, PositiveInt, as_batch, as_vector

logger = logging.getLogger(__name__)

Sampler = Callable[[int, np.random.Generator], np.ndarray]


class KernelFamily(str, Enum):
    GAUSSIAN = "gaussian"
    LAPLACIAN = "laplacian"
    LINEAR = "linear"


SHIFT_INVARIANT = (KernelFamily.GAUSSIAN, KernelFamily.LAPLACIAN)


class KernelSpec(BaseModel):
    """Kernel family, bandwidth and input dimension L.

    gaussian: exp(-|u - v|^2 / (2 s^2)); laplacian: exp(-|u - v|_1 / s);
    linear: u . v. The bandwidth is ignored for the linear family.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    family: KernelFamily = KernelFamily.GAUSSIAN
    bandwidth: PositiveFloat = 1.0
    dimension: PositiveInt

    @property
    def is_shift_invariant(self) -> bool:
        return self.family in SHIFT_INVARIANT

    def with_dimension(self, dimension: int) -> "KernelSpec":
        """Same family and bandwidth on a different input dimension."""
        return self.model_copy(update={"dimension": dimension})


def _require_shift_invariant(spec: KernelSpec, operation: str) -> None:
    if not spec.is_shift_invariant:
        raise UnsupportedKernelError(
            spec.family.value,
            operation,
            ["use family = 'gaussian' or 'laplacian'"]
            + (
                ["linear kernels go through the linear-limit encoder"]
                if spec.family is KernelFamily.LINEAR
                else []
            ),
        )


def kernel_matrix(spec: KernelSpec, left: object, right: object) -> np.ndarray:
    """Pairwise kernel values between the rows of ``left`` and ``right``."""
    x, _ = as_batch(left, spec.dimension, "kernel argument")
    y, _ = as_batch(right, spec.dimension, "kernel argument")
    if spec.family is KernelFamily.LINEAR:
        return x @ y.T
    if spec.family is KernelFamily.GAUSSIAN:
        sq = cdist(x, y, metric="sqeuclidean")
        return np.exp(-sq / (2.0 * spec.bandwidth**2))
    dist = cdist(x, y, metric="cityblock")
    return np.exp(-dist / spec.bandwidth)


def eval_kernel(spec: KernelSpec, u: object, v: object) -> float:
    """K(u, v) for a single pair of vectors."""
    u_vec = as_vector(u, spec.dimension, "kernel argument u")
    v_vec = as_vector(v, spec.dimension, "kernel argument v")
    return float(kernel_matrix(spec, u_vec, v_vec)[0, 0])


def kernel_profile(spec: KernelSpec, displacement: np.ndarray) -> np.ndarray:
    """kappa(h) for a batch of displacements h (shift-invariant families)."""
    _require_shift_invariant(spec, "kernel_profile")
    h = np.atleast_2d(displacement)
    if spec.family is KernelFamily.GAUSSIAN:
        return np.exp(-np.sum(h**2, axis=1) / (2.0 * spec.bandwidth**2))
    return np.exp(-np.sum(np.abs(h), axis=1) / spec.bandwidth)


def sample_frequency(
    spec: KernelSpec,
    rng: np.random.Generator,
    count: Optional[int] = None,
    dimension: Optional[int] = None,
) -> np.ndarray:
    """Draw frequencies from the Bochner measure of the kernel.

    Returns one vector of length ``dimension`` (default L), or a
    ``(count, dimension)`` array. The measure factorizes over coordinates, so a
    lower ``dimension`` gives the spectral measure of the restricted kernel.
    """
    _require_shift_invariant(spec, "sample_frequency")
    dim = spec.dimension if dimension is None else dimension
    shape: Tuple[int, ...] = (dim,) if count is None else (count, dim)
    if spec.family is KernelFamily.GAUSSIAN:
        return sample_gaussian_frequencies(shape, spec.bandwidth, rng)
    return sample_laplacian_frequencies(shape, spec.bandwidth, rng)


def variance_proxy(spec: KernelSpec, u: object, v: object) -> float:
    """V_K(u, v) = K(u, u) + K(v, v) - 2 K(u, v)."""
    _require_shift_invariant(spec, "variance_proxy")
    u_vec = as_vector(u, spec.dimension, "kernel argument u")
    v_vec = as_vector(v, spec.dimension, "kernel argument v")
    gram = kernel_matrix(spec, np.vstack([u_vec, v_vec]), np.vstack([u_vec, v_vec]))
    return float(gram[0, 0] + gram[1, 1] - 2.0 * gram[0, 1])


@dataclass(frozen=True)
class SpectralSummary:
    """Nonincreasing, clamped kernel-operator eigenvalues."""

    eigenvalues: np.ndarray
    source: str
    sample_size: Optional[int] = None
    degenerate: bool = False

    def __post_init__(self) -> None:
        values = np.sort(np.asarray(self.eigenvalues, dtype=float))[::-1]
        values = np.where(values < get_eigen_floor(), 0.0, values)
        values.setflags(write=False)
        object.__setattr__(self, "eigenvalues", values)

    def __len__(self) -> int:
        return int(self.eigenvalues.shape[0])

    def tail_sum(self, m: int) -> float:
        """Sum of lambda_j for j > m (1-based)."""
        if m < 0:
            raise InvalidParameterError("m", m, "must be non-negative")
        return float(np.sum(self.eigenvalues[m:]))


def nystrom_sample_size(received: Sequence[int]) -> int:
    """Sample count max(1000, 10 * max m_k) for tail estimation."""
    largest = max(received, default=0)
    return max(1000, 10 * int(largest))


def operator_eigenvalues(
    spec: KernelSpec,
    sampler: Sampler,
    m_samples: int,
    rng: np.random.Generator,
    covariance: Optional[np.ndarray] = None,
) -> SpectralSummary:
    """Eigenvalues of the kernel integral operator under the input law.

    The linear kernel with a known second moment ``covariance`` = E[w w^T] has
    the closed form eig(E[w w^T]). Everything else uses the Nystrom estimate
    eig((1/m) [K(w_i, w_j)]) on ``m_samples`` draws from ``sampler``.
    """
    if spec.family is KernelFamily.LINEAR and covariance is not None:
        cov = np.asarray(covariance, dtype=float)
        if cov.shape != (spec.dimension, spec.dimension):
            raise InvalidParameterError(
                "covariance", cov.shape, f"must be {spec.dimension}x{spec.dimension}"
            )
        return SpectralSummary(
            eigenvalues=linalg.eigh(cov, eigvals_only=True),
            source="closed_form_linear",
        )
    if m_samples < 2:
        raise InvalidParameterError("m_samples", m_samples, "must be at least 2")

    points = np.asarray(sampler(m_samples, rng), dtype=float)
    degenerate = bool(np.all(points == points[0]))
    if degenerate:
        logger.warning(
            "Nystrom sample of %d points is degenerate (all identical); "
            "eigenvalue estimate is flagged",
            m_samples,
        )
    gram = kernel_matrix(spec, points, points) / m_samples
    eigenvalues = linalg.eigh(gram, eigvals_only=True)
    logger.debug("Nystrom estimate from %d samples, trace %.6g", m_samples, gram.trace())
    return SpectralSummary(
        eigenvalues=eigenvalues,
        source="nystrom_estimate",
        sample_size=m_samples,
        degenerate=degenerate,
    )
