"""Subfunction banks, user targets and dataset generation."""

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .exceptions import ConfigurationError, InvalidParameterError
from .generators.inputs import sample_standard_normal, sample_uniform_cube
from .kernels import KernelSpec, kernel_matrix
from .types import IndexSet, PositiveFloat, PositiveInt, as_batch

logger = logging.getLogger(__name__)

Matrix = Tuple[Tuple[float, ...], ...]


class SubfunctionFamily(str, Enum):
    COORDINATE_PROJECTION = "coordinate_projection"
    LINEAR_FORM = "linear_form"
    QUADRATIC_FORM = "quadratic_form"
    SINUSOID = "sinusoid"


class SubfunctionBank(BaseModel):
    """The L subfunctions f_l computed from an input x in R^d.

    - coordinate_projection: w_l = x_l
    - linear_form: w = A x with ``weights`` A of shape (L, d)
    - quadratic_form: w_l = c_l * x_l^2 (``coefficients`` c default to 1)
    - sinusoid: w_l = sin(a_l . x) with rows a_l of ``weights`` (default e_l)
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    family: SubfunctionFamily = SubfunctionFamily.COORDINATE_PROJECTION
    input_dim: PositiveInt
    num_outputs: PositiveInt
    weights: Optional[Matrix] = None
    coefficients: Optional[Tuple[float, ...]] = None

    @model_validator(mode="after")
    def _check_shapes(self) -> "SubfunctionBank":
        if self.weights is not None:
            shape = np.asarray(self.weights, dtype=float).shape
            if shape != (self.num_outputs, self.input_dim):
                raise ValueError(
                    f"weights must be {self.num_outputs}x{self.input_dim}, got {shape}"
                )
        elif self.family is SubfunctionFamily.LINEAR_FORM:
            raise ValueError("linear_form banks need a weights matrix")
        if self.weights is None and self.input_dim < self.num_outputs:
            raise ValueError(
                f"{self.family.value} needs input_dim >= num_outputs "
                f"({self.input_dim} < {self.num_outputs})"
            )
        if self.coefficients is not None and len(self.coefficients) != self.num_outputs:
            raise ValueError("coefficients must have one entry per subfunction")
        return self

    @classmethod
    def isotropic(cls, num_outputs: int) -> "SubfunctionBank":
        """Identity bank on R^L; with standard normal inputs E[w w^T] = I."""
        return cls(input_dim=num_outputs, num_outputs=num_outputs)

    @property
    def weight_matrix(self) -> np.ndarray:
        if self.weights is not None:
            return np.asarray(self.weights, dtype=float)
        return np.eye(self.num_outputs, self.input_dim)


def eval_subfunctions(bank: SubfunctionBank, x: object) -> np.ndarray:
    """w(x) for one input (length L) or a batch of inputs (M, L)."""
    batch, single = as_batch(x, bank.input_dim, "subfunction input")
    if bank.family is SubfunctionFamily.LINEAR_FORM:
        w = batch @ bank.weight_matrix.T
    elif bank.family is SubfunctionFamily.SINUSOID:
        w = np.sin(batch @ bank.weight_matrix.T)
    elif bank.family is SubfunctionFamily.QUADRATIC_FORM:
        scale = np.asarray(bank.coefficients or [1.0] * bank.num_outputs)
        w = scale * batch[:, : bank.num_outputs] ** 2
    else:
        w = batch[:, : bank.num_outputs].copy()
    return w[0] if single else w


class InputKind(str, Enum):
    STANDARD_NORMAL = "standard_normal"
    UNIFORM = "uniform"


class InputLaw(BaseModel):
    """The input distribution P_X."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: InputKind = InputKind.STANDARD_NORMAL
    dim: PositiveInt
    scale: PositiveFloat = 1.0

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind is InputKind.UNIFORM:
            return sample_uniform_cube(count, self.dim, self.scale, rng)
        return sample_standard_normal(count, self.dim, self.scale, rng)

    def covariance(self) -> np.ndarray:
        """E[x x^T]."""
        variance = self.scale**2 if self.kind is InputKind.STANDARD_NORMAL else (
            self.scale**2 / 3.0
        )
        return variance * np.eye(self.dim)


def feature_covariance(bank: SubfunctionBank, law: InputLaw) -> Optional[np.ndarray]:
    """E[w w^T] in closed form for banks linear in x, else None."""
    if bank.family in (
        SubfunctionFamily.COORDINATE_PROJECTION,
        SubfunctionFamily.LINEAR_FORM,
    ):
        a = bank.weight_matrix
        return a @ law.covariance() @ a.T
    return None


class TargetFamily(str, Enum):
    LINEAR = "linear"
    IDENTITY = "identity"
    RKHS_EXPANSION = "rkhs_expansion"


class TargetSpec(BaseModel):
    """User target h_k on w in R^L.

    Linear targets carry a coefficient matrix of shape (p, L) (a single row is
    a scalar target); ``identity`` is the p = L target h(w) = w. Expansion
    targets are h(w) = sum_i alpha_i K(w_S, c_i,S) over ``support`` S
    (default all coordinates).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    family: TargetFamily = TargetFamily.LINEAR
    dimension: PositiveInt
    B: PositiveFloat = 1.0
    coefficients: Optional[Matrix] = None
    centers: Optional[Matrix] = None
    alpha: Optional[Tuple[float, ...]] = None
    kernel: Optional[KernelSpec] = None
    support: Optional[IndexSet] = None
    essential_set: Optional[IndexSet] = None
    separation: Optional[PositiveFloat] = None
    probe_displacement: PositiveFloat = 1.0

    @model_validator(mode="before")
    @classmethod
    def _promote_vector(cls, data: object) -> object:
        if isinstance(data, dict):
            coefficients = data.get("coefficients")
            if coefficients is not None and len(coefficients) and not isinstance(
                coefficients[0], (list, tuple, np.ndarray)
            ):
                data = {**data, "coefficients": [list(coefficients)]}
        return data

    @model_validator(mode="after")
    def _check_family(self) -> "TargetSpec":
        if self.family is TargetFamily.LINEAR:
            if self.coefficients is None:
                raise ValueError("linear targets need coefficients")
            width = len(self.coefficients[0])
            if any(len(row) != width for row in self.coefficients):
                raise ValueError("coefficient rows differ in length")
            if width != self.dimension:
                raise ValueError(
                    f"coefficients have {width} columns, dimension is {self.dimension}"
                )
        elif self.family is TargetFamily.RKHS_EXPANSION:
            if self.centers is None or self.alpha is None or self.kernel is None:
                raise ValueError("rkhs_expansion targets need centers, alpha, kernel")
            centers = np.asarray(self.centers, dtype=float)
            if centers.ndim != 2 or centers.shape[1] != self.dimension:
                raise ValueError(f"centers must have {self.dimension} columns")
            if centers.shape[0] != len(self.alpha):
                raise ValueError("alpha needs one weight per center")
            expected = len(self.support) if self.support else self.dimension
            if self.kernel.dimension != expected:
                raise ValueError(
                    f"kernel dimension {self.kernel.dimension} does not match "
                    f"the target support size {expected}"
                )
        for coordinates in (self.support, self.essential_set):
            if coordinates and coordinates[-1] >= self.dimension:
                raise ValueError(f"coordinate {coordinates[-1] + 1} exceeds L")
        return self

    @property
    def coefficient_matrix(self) -> np.ndarray:
        if self.family is TargetFamily.IDENTITY:
            return np.eye(self.dimension)
        if self.coefficients is None:
            raise ConfigurationError(f"{self.family.value} targets have no coefficients")
        return np.asarray(self.coefficients, dtype=float)

    @property
    def num_outputs(self) -> int:
        if self.family is TargetFamily.RKHS_EXPANSION:
            return 1
        return int(self.coefficient_matrix.shape[0])

    @property
    def reads(self) -> Tuple[int, ...]:
        """Coordinates the construction can depend on."""
        if self.family is TargetFamily.RKHS_EXPANSION:
            return self.support or tuple(range(self.dimension))
        columns = np.flatnonzero(np.any(self.coefficient_matrix != 0.0, axis=0))
        return tuple(int(c) for c in columns)

    @property
    def essential(self) -> Tuple[int, ...]:
        """Declared essential set S_k*, or the coordinates the target reads."""
        return self.essential_set if self.essential_set is not None else self.reads

    @property
    def r_k(self) -> int:
        return len(self.essential)

    def rkhs_norm_squared(self) -> float:
        """alpha^T G alpha for expansions, max row |a|^2 for linear maps."""
        if self.family is TargetFamily.RKHS_EXPANSION:
            assert self.kernel is not None and self.centers is not None
            centers = self._restrict(np.asarray(self.centers, dtype=float))
            alpha = np.asarray(self.alpha, dtype=float)
            gram = kernel_matrix(self.kernel, centers, centers)
            return float(alpha @ gram @ alpha)
        return float(np.max(np.sum(self.coefficient_matrix**2, axis=1)))

    def certify(self) -> "TargetSpec":
        """Reject expansions whose RKHS norm exceeds B."""
        if self.family is TargetFamily.RKHS_EXPANSION:
            norm_sq = self.rkhs_norm_squared()
            if norm_sq > self.B**2 * (1.0 + 1e-10):
                raise ConfigurationError(
                    f"RKHS norm {np.sqrt(norm_sq):.6g} exceeds B={self.B:g}; "
                    "raise B or shrink alpha",
                    "B",
                )
        return self

    def _restrict(self, w: np.ndarray) -> np.ndarray:
        if self.support:
            return w[:, list(self.support)]
        return w


def eval_target_batch(spec: TargetSpec, w: object) -> np.ndarray:
    """Targets for a batch of feature vectors, shape (M, p)."""
    batch, _ = as_batch(w, spec.dimension, "target input")
    if spec.family is TargetFamily.RKHS_EXPANSION:
        assert spec.kernel is not None and spec.centers is not None
        centers = spec._restrict(np.asarray(spec.centers, dtype=float))
        values = kernel_matrix(spec.kernel, spec._restrict(batch), centers)
        return (values @ np.asarray(spec.alpha, dtype=float))[:, np.newaxis]
    return batch @ spec.coefficient_matrix.T


def eval_target(spec: TargetSpec, w: object) -> Union[float, np.ndarray]:
    """h_k(w); a float for scalar targets, a length-p vector otherwise."""
    batch, _ = as_batch(w, spec.dimension, "target input")
    values = eval_target_batch(spec, batch)[0]
    return float(values[0]) if values.shape[0] == 1 else values


def probe_essential_set(
    spec: TargetSpec, rng: np.random.Generator, n_probes: int = 16
) -> Tuple[int, ...]:
    """Declared essential coordinates the target does not respond to.

    Each coordinate is displaced by ``probe_displacement`` at ``n_probes``
    standard normal base points; a coordinate passes if any probe moves h.
    """
    base = rng.standard_normal((n_probes, spec.dimension))
    reference = eval_target_batch(spec, base)
    silent = []
    for coordinate in spec.essential:
        moved = base.copy()
        moved[:, coordinate] += spec.probe_displacement
        change = np.abs(eval_target_batch(spec, moved) - reference)
        if not np.any(change > 1e-12):
            silent.append(coordinate)
    return tuple(silent)


def linear_separation(spec: TargetSpec, missed: Sequence[int]) -> Optional[float]:
    """Two-point separation |a_l*| * dw over missed coordinates (linear targets)."""
    if spec.family is TargetFamily.RKHS_EXPANSION or not missed:
        return None
    columns = np.abs(spec.coefficient_matrix[:, list(missed)])
    return float(np.max(columns)) * spec.probe_displacement


@dataclass(frozen=True)
class Dataset:
    """Inputs, subfunction outputs and per-user noisy labels."""

    inputs: np.ndarray
    features: np.ndarray
    targets: Tuple[np.ndarray, ...]
    labels: Tuple[np.ndarray, ...]
    sigma: float
    digest: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if not self.digest:
            h = hashlib.blake2b(digest_size=8)
            h.update(np.ascontiguousarray(self.inputs).tobytes())
            for y in self.labels:
                h.update(np.ascontiguousarray(y).tobytes())
            object.__setattr__(self, "digest", h.hexdigest())

    @property
    def size(self) -> int:
        return int(self.inputs.shape[0])


def generate_dataset(
    bank: SubfunctionBank,
    targets: Sequence[TargetSpec],
    input_law: InputLaw,
    M: int,
    sigma: float,
    rng: np.random.Generator,
) -> Dataset:
    """Draw M i.i.d. inputs and label them for every user.

    Noise is drawn per user after the inputs, so noise is independent across
    samples and users.
    """
    if M < 1:
        raise InvalidParameterError("M", M, "need at least one sample")
    if sigma < 0:
        raise InvalidParameterError("sigma", sigma, "must be non-negative")
    if input_law.dim != bank.input_dim:
        raise ConfigurationError(
            f"input law has dimension {input_law.dim}, bank expects {bank.input_dim}",
            "inputs.dim",
        )
    inputs = input_law.sample(M, rng)
    features = eval_subfunctions(bank, inputs)
    clean: List[np.ndarray] = []
    noisy: List[np.ndarray] = []
    for spec in targets:
        values = eval_target_batch(spec, features)
        clean.append(values)
        if sigma > 0:
            noisy.append(values + sigma * rng.standard_normal(values.shape))
        else:
            noisy.append(values.copy())
    logger.debug("generated dataset M=%d, sigma=%g, users=%d", M, sigma, len(targets))
    return Dataset(
        inputs=inputs,
        features=features,
        targets=tuple(clean),
        labels=tuple(noisy),
        sigma=sigma,
    )
