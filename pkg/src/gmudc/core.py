"""Experiment setup and end-to-end encode/decode pipelines."""

import logging
from dataclasses import dataclass, replace
from typing import Literal, Optional, Protocol, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .decoder import GramStats, RidgeModel, fit_ridge, gram_stats, predict
from .encoder import (
    Bank,
    LinearWeights,
    SamplingMode,
    draw_feature_bank,
    draw_linear_bank,
)
from .kernels import KernelFamily, KernelSpec
from .tasks import (
    Dataset,
    InputLaw,
    SubfunctionBank,
    TargetSpec,
    eval_subfunctions,
    eval_target_batch,
    generate_dataset,
)
from .topology import ReceivedIndex, SystemConfig, Topology, received_indices
from .types import NonNegativeFloat, PositiveFloat, PositiveInt

logger = logging.getLogger(__name__)


class EncoderSettings(BaseModel):
    """Encoder choices; the linear-limit fields only apply to linear kernels."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: SamplingMode = SamplingMode.MASKED_BOCHNER
    redraw_per_trial: bool = False
    linear_weights: LinearWeights = LinearWeights.GAUSSIAN
    shared_shots: bool = False


class RidgeSettings(BaseModel):
    """Explicit ``lambda`` or the rule lambda = c / sqrt(M)."""

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    lam: Optional[NonNegativeFloat] = Field(default=None, alias="lambda")
    lambda_rule: Optional[Literal["c_over_sqrt_M"]] = None
    lambda_constant: PositiveFloat = 1.0

    @model_validator(mode="after")
    def _one_source(self) -> "RidgeSettings":
        if self.lam is not None and self.lambda_rule is not None:
            raise ValueError("set either lambda or lambda_rule, not both")
        return self

    def resolve(self, M: int) -> float:
        """The ridge parameter used for M training samples (default 1e-3)."""
        if self.lambda_rule == "c_over_sqrt_M":
            return self.lambda_constant / float(np.sqrt(M))
        return 1e-3 if self.lam is None else float(self.lam)


class ExperimentSetup(BaseModel):
    """Everything a pipeline needs besides the topology and random streams."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    config: SystemConfig
    kernel: KernelSpec
    bank: SubfunctionBank
    input_law: InputLaw
    targets: Tuple[TargetSpec, ...]
    encoder: EncoderSettings = EncoderSettings()
    ridge: RidgeSettings = RidgeSettings()
    M: PositiveInt = 1000
    sigma: NonNegativeFloat = 0.0

    @model_validator(mode="after")
    def _check_dimensions(self) -> "ExperimentSetup":
        L = self.config.L
        if len(self.targets) != self.config.K:
            raise ValueError(f"{len(self.targets)} targets for K={self.config.K} users")
        if self.kernel.dimension != L:
            raise ValueError(f"kernel dimension {self.kernel.dimension} != L={L}")
        if self.bank.num_outputs != L:
            raise ValueError(f"subfunction bank has {self.bank.num_outputs} outputs, L={L}")
        if self.input_law.dim != self.bank.input_dim:
            raise ValueError("input law dimension does not match the subfunction bank")
        for k, target in enumerate(self.targets):
            if target.dimension != L:
                raise ValueError(f"target {k + 1} has dimension {target.dimension} != L")
        return self

    @property
    def lam(self) -> float:
        return self.ridge.resolve(self.M)

    @property
    def is_linear(self) -> bool:
        return self.kernel.family is KernelFamily.LINEAR


class UserDecoder(Protocol):
    def __call__(self, features: np.ndarray, w: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class RidgeDecoder:
    """Predicts from received features with a trained ridge model."""

    model: RidgeModel

    def __call__(self, features: np.ndarray, w: np.ndarray) -> np.ndarray:
        values = np.asarray(predict(self.model, features))
        return values.reshape(features.shape[0], -1)


@dataclass(frozen=True)
class OracleDecoder:
    """Returns the exact target; bypasses the received features."""

    target: TargetSpec

    def __call__(self, features: np.ndarray, w: np.ndarray) -> np.ndarray:
        return eval_target_batch(self.target, w)


@dataclass(frozen=True)
class Pipeline:
    """A topology, its encoder bank and one trained decoder per user."""

    setup: ExperimentSetup
    topology: Topology
    bank: Bank
    received: Tuple[ReceivedIndex, ...]
    decoders: Tuple[UserDecoder, ...]
    gram: Tuple[Optional[GramStats], ...]
    train_digest: str = ""

    @property
    def m(self) -> Tuple[int, ...]:
        return tuple(r.m_k for r in self.received)

    def features(self, user: int, w: np.ndarray) -> np.ndarray:
        return self.bank.user_features(self.received[user], w)

    def predict(self, user: int, w: np.ndarray) -> np.ndarray:
        """Estimates of F_k for a batch of subfunction vectors, shape (M, p)."""
        return self.decoders[user](self.features(user, w), w)

    def with_decoders(self, decoders: Sequence[UserDecoder]) -> "Pipeline":
        return replace(self, decoders=tuple(decoders))


def draw_bank(
    setup: ExperimentSetup, topology: Topology, rng: np.random.Generator
) -> Bank:
    """Masked RFF bank, or the linear-limit bank for the linear kernel."""
    if setup.is_linear:
        return draw_linear_bank(
            topology,
            setup.config,
            rng,
            weights=setup.encoder.linear_weights,
            shared_shots=setup.encoder.shared_shots,
        )
    return draw_feature_bank(
        topology, setup.config, setup.kernel, setup.encoder.mode, rng
    )


def build_pipeline(
    setup: ExperimentSetup,
    topology: Topology,
    bank_rng: np.random.Generator,
    train_rng: np.random.Generator,
    feature_bank: Optional[Bank] = None,
) -> Pipeline:
    """Draw (or reuse) the encoder bank, generate training data, fit every user."""
    topology.check_budgets(setup.config)
    bank = feature_bank if feature_bank is not None else draw_bank(setup, topology, bank_rng)
    received = received_indices(topology, setup.config)
    dataset: Dataset = generate_dataset(
        setup.bank, setup.targets, setup.input_law, setup.M, setup.sigma, train_rng
    )
    lam = setup.lam
    decoders = []
    grams = []
    for k, index in enumerate(received):
        Z = bank.user_features(index, dataset.features)
        model = fit_ridge(Z, dataset.labels[k], lam, trained_on=dataset.digest)
        decoders.append(RidgeDecoder(model))
        grams.append(gram_stats(Z, lam) if lam > 0 and index.m_k > 0 else None)
        logger.debug("user %d: m_k=%d, lambda=%.3g", k + 1, index.m_k, lam)
    return Pipeline(
        setup=setup,
        topology=topology,
        bank=bank,
        received=received,
        decoders=tuple(decoders),
        gram=tuple(grams),
        train_digest=dataset.digest,
    )


def sample_test_features(
    setup: ExperimentSetup, n_test: int, rng: np.random.Generator
) -> np.ndarray:
    """Fresh subfunction vectors w(x) for test inputs."""
    return eval_subfunctions(setup.bank, setup.input_law.sample(n_test, rng))
