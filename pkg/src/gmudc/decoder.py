"""Per-user ridge decoders and effective dimension."""

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import linalg

from .config import get_eigen_floor, get_pinv_cutoff
from .exceptions import DimensionMismatchError, InvalidParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RidgeModel:
    """Trained ridge coefficients.

    ``beta`` has shape (m,) for scalar labels or (m, p) for p outputs.
    """

    beta: np.ndarray
    lam: float
    trained_on: str = ""

    @property
    def m(self) -> int:
        return int(self.beta.shape[0])


def _check_lambda(lam: float) -> None:
    if lam < 0 or not np.isfinite(lam):
        raise InvalidParameterError("lambda", lam, "must be a finite value >= 0")


def fit_ridge(
    Z: np.ndarray, y: np.ndarray, lam: float, trained_on: str = ""
) -> RidgeModel:
    """Minimize (1/M)|y - Z beta|^2 + lam |beta|^2.

    beta = (S + lam I)^{-1} s with S = Z^T Z / M and s = Z^T y / M, solved by a
    Cholesky factorization. At lam = 0 the minimum-norm solution S^+ s is taken
    from an eigendecomposition with cutoff ``pinv_cutoff * max eigenvalue``.
    """
    _check_lambda(lam)
    features = np.asarray(Z, dtype=float)
    labels = np.asarray(y, dtype=float)
    if features.ndim != 2:
        raise DimensionMismatchError("feature matrix", "2-D (M, m)", features.shape)
    n_samples, width = features.shape
    if n_samples < 1:
        raise InvalidParameterError("M", n_samples, "need at least one sample")
    if labels.shape[0] != n_samples:
        raise DimensionMismatchError("labels", n_samples, labels.shape[0])

    out_shape = (width,) + labels.shape[1:]
    if width == 0:
        logger.warning("no received features; fitting the zero predictor")
        return RidgeModel(beta=np.zeros(out_shape), lam=lam, trained_on=trained_on)

    second_moment = features.T @ features / n_samples
    cross = features.T @ labels / n_samples
    if lam > 0:
        factor = linalg.cho_factor(
            second_moment + lam * np.eye(width), lower=True, check_finite=False
        )
        beta = linalg.cho_solve(factor, cross, check_finite=False)
    else:
        eigenvalues, vectors = linalg.eigh(second_moment)
        cutoff = get_pinv_cutoff() * max(float(eigenvalues.max()), 0.0)
        keep = eigenvalues > cutoff
        inverse = np.zeros_like(eigenvalues)
        inverse[keep] = 1.0 / eigenvalues[keep]
        beta = vectors @ (inverse[:, np.newaxis] * (vectors.T @ cross.reshape(width, -1)))
        beta = beta.reshape(out_shape)
    return RidgeModel(beta=beta, lam=lam, trained_on=trained_on)


def predict(model: RidgeModel, features: np.ndarray) -> Union[float, np.ndarray]:
    """beta^T Phi for one feature vector, or row-wise for a batch."""
    phi = np.asarray(features, dtype=float)
    if phi.shape[-1] != model.m:
        raise DimensionMismatchError("feature vector", model.m, phi.shape[-1])
    value = phi @ model.beta
    if np.ndim(value) == 0:
        return float(value)
    return value


@dataclass(frozen=True)
class GramStats:
    """Feature second moment G and its effective dimension at ``lam``."""

    G: np.ndarray
    d_lambda: float
    lam: float


def effective_dimension(G: np.ndarray, lam: float) -> float:
    """d_lambda = tr(G (G + lam I)^{-1}) = sum_j mu_j / (mu_j + lam)."""
    if lam <= 0:
        raise InvalidParameterError("lambda", lam, "must be > 0")
    gram = np.asarray(G, dtype=float)
    if gram.size == 0:
        return 0.0
    mu = linalg.eigh(gram, eigvals_only=True)
    mu = np.where(mu < get_eigen_floor(), 0.0, mu)
    return float(np.sum(mu / (mu + lam)))


def gram_stats(Z: np.ndarray, lam: float) -> GramStats:
    """Empirical G = Z^T Z / M and d_lambda."""
    features = np.asarray(Z, dtype=float)
    G = features.T @ features / max(features.shape[0], 1)
    return GramStats(G=G, d_lambda=effective_dimension(G, lam), lam=lam)
