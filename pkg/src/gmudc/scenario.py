"""Scenario files: TOML sections validated into experiment settings.

Every id in a scenario (coordinates in ``support`` and ``essential_set``) is
1-based; the resolved objects are 0-based.
"""

import logging
import tomllib
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .core import EncoderSettings, ExperimentSetup, RidgeSettings
from .exceptions import ConfigurationError
from .kernels import KernelFamily, KernelSpec
from .risk_bounds import BoundConstants
from .tasks import (
    InputKind,
    InputLaw,
    Matrix,
    SubfunctionBank,
    SubfunctionFamily,
    TargetFamily,
    TargetSpec,
    probe_essential_set,
)
from .topology import SystemConfig
from .types import NonNegativeFloat, NonNegativeInt, PositiveFloat, PositiveInt, UnitFloat
from .utils import make_rng

logger = logging.getLogger(__name__)


class ExperimentKind(str, Enum):
    QUENCHED = "quenched"
    ANNEALED = "annealed"
    MP_GAP = "mp_gap"
    BOUNDS_ONLY = "bounds_only"


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ExperimentSection(_Section):
    kind: ExperimentKind = ExperimentKind.QUENCHED
    seed: NonNegativeInt = 0
    trials: PositiveInt = 1
    n_test: PositiveInt = 10_000
    M: PositiveInt = 1000
    sigma: NonNegativeFloat = 0.0
    threads: PositiveInt = 1
    nystrom_samples: Optional[PositiveInt] = None


class KernelSection(_Section):
    family: KernelFamily = KernelFamily.GAUSSIAN
    bandwidth: PositiveFloat = 1.0


class InputsSection(_Section):
    kind: InputKind = InputKind.STANDARD_NORMAL
    scale: PositiveFloat = 1.0
    dim: Optional[PositiveInt] = None


class SubfunctionSection(_Section):
    family: SubfunctionFamily = SubfunctionFamily.COORDINATE_PROJECTION
    weights: Optional[Matrix] = None
    coefficients: Optional[Tuple[float, ...]] = None


class TopologySection(_Section):
    source: Literal["sample", "file", "tessellated"] = "sample"
    path: Optional[str] = None

    @model_validator(mode="after")
    def _path_for_files(self) -> "TopologySection":
        if self.source == "file" and not self.path:
            raise ValueError("source = 'file' needs a path")
        return self


class MPGapSection(_Section):
    kappa: Optional[UnitFloat] = None
    points: PositiveInt = 64


class AnnealedSection(_Section):
    servers: Optional[Tuple[PositiveInt, ...]] = None


class TaskEntry(_Section):
    """One ``[[tasks]]`` table; a single entry applies to every user."""

    family: TargetFamily = TargetFamily.LINEAR
    B: PositiveFloat = 1.0
    coefficients: Optional[Union[Matrix, Tuple[float, ...]]] = None
    centers: Optional[Matrix] = None
    alpha: Optional[Tuple[float, ...]] = None
    support: Optional[Tuple[PositiveInt, ...]] = None
    essential_set: Optional[Tuple[PositiveInt, ...]] = None
    separation: Optional[PositiveFloat] = None
    probe_displacement: PositiveFloat = 1.0


class Scenario(_Section):
    """A complete, resolved experiment description."""

    experiment: ExperimentSection = ExperimentSection()
    system: SystemConfig
    kernel: KernelSection = KernelSection()
    encoder: EncoderSettings = EncoderSettings()
    ridge: RidgeSettings = RidgeSettings()
    bounds: BoundConstants = BoundConstants()
    inputs: InputsSection = InputsSection()
    subfunctions: SubfunctionSection = SubfunctionSection()
    topology: TopologySection = TopologySection()
    mp_gap: MPGapSection = MPGapSection()
    annealed: AnnealedSection = AnnealedSection()
    tasks: Tuple[TaskEntry, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_tasks(self) -> "Scenario":
        if len(self.tasks) not in (1, self.system.K):
            raise ValueError(
                f"give one [[tasks]] entry or K={self.system.K}, got {len(self.tasks)}"
            )
        for i, task in enumerate(self.tasks):
            for ids in (task.support, task.essential_set):
                if ids and max(ids) > self.system.L:
                    raise ValueError(
                        f"tasks[{i + 1}] names coordinate {max(ids)} > L={self.system.L}"
                    )
        return self

    @property
    def seed(self) -> int:
        return self.experiment.seed

    def kernel_spec(self, dimension: Optional[int] = None) -> KernelSpec:
        return KernelSpec(
            family=self.kernel.family,
            bandwidth=self.kernel.bandwidth,
            dimension=dimension or self.system.L,
        )

    def input_law(self) -> InputLaw:
        return InputLaw(
            kind=self.inputs.kind,
            dim=self.inputs.dim or self.system.L,
            scale=self.inputs.scale,
        )

    def subfunction_bank(self) -> SubfunctionBank:
        try:
            return SubfunctionBank(
                family=self.subfunctions.family,
                input_dim=self.inputs.dim or self.system.L,
                num_outputs=self.system.L,
                weights=self.subfunctions.weights,
                coefficients=self.subfunctions.coefficients,
            )
        except ValidationError as exc:
            raise _as_configuration_error(exc, "subfunctions") from exc

    def target_specs(self) -> Tuple[TargetSpec, ...]:
        """Per-user targets, certified against B and probed for essential sets."""
        specs = []
        for i, task in enumerate(self.tasks):
            support = tuple(c - 1 for c in task.support) if task.support else None
            try:
                spec = TargetSpec(
                    family=task.family,
                    dimension=self.system.L,
                    B=task.B,
                    coefficients=task.coefficients,
                    centers=task.centers,
                    alpha=task.alpha,
                    kernel=(
                        self.kernel_spec(len(support) if support else None)
                        if task.family is TargetFamily.RKHS_EXPANSION
                        else None
                    ),
                    support=support,
                    essential_set=(
                        tuple(c - 1 for c in task.essential_set)
                        if task.essential_set is not None
                        else None
                    ),
                    separation=task.separation,
                    probe_displacement=task.probe_displacement,
                )
            except ValidationError as exc:
                raise _as_configuration_error(exc, f"tasks.{i + 1}") from exc
            try:
                spec.certify()
            except ConfigurationError as exc:
                raise ConfigurationError(exc.detail, f"tasks.{i + 1}.B") from exc
            silent = probe_essential_set(spec, make_rng(self.seed, "tasks", i))
            if silent:
                raise ConfigurationError(
                    "target does not depend on declared essential coordinates "
                    f"{[c + 1 for c in silent]}",
                    f"tasks.{i + 1}.essential_set",
                )
            specs.append(spec)
        if len(specs) == 1:
            specs = specs * self.system.K
        return tuple(specs)

    def setup(self, system: Optional[SystemConfig] = None) -> ExperimentSetup:
        """The experiment setup, optionally on a different system config."""
        scenario = self if system is None else self.with_system(system)
        return ExperimentSetup(
            config=scenario.system,
            kernel=scenario.kernel_spec(),
            bank=scenario.subfunction_bank(),
            input_law=scenario.input_law(),
            targets=scenario.target_specs(),
            encoder=scenario.encoder,
            ridge=scenario.ridge,
            M=scenario.experiment.M,
            sigma=scenario.experiment.sigma,
        )

    def with_system(self, system: SystemConfig) -> "Scenario":
        return self.model_copy(update={"system": system})

    def with_overrides(
        self,
        seed: Optional[int] = None,
        trials: Optional[int] = None,
        threads: Optional[int] = None,
        kind: Optional[ExperimentKind] = None,
    ) -> "Scenario":
        """Apply command-line overrides, revalidating the result."""
        updates: Dict[str, Any] = {
            key: value
            for key, value in (
                ("seed", seed),
                ("trials", trials),
                ("threads", threads),
                ("kind", kind),
            )
            if value is not None
        }
        if not updates:
            return self
        data = self.resolved()
        data["experiment"].update(
            {k: (v.value if isinstance(v, Enum) else v) for k, v in updates.items()}
        )
        return scenario_from_dict(data)

    def resolved(self) -> Dict[str, Any]:
        """Every setting, defaults included, as plain data."""
        return self.model_dump(mode="json", by_alias=True)


def _as_configuration_error(
    exc: ValidationError, prefix: Optional[str] = None
) -> ConfigurationError:
    problems = []
    first_path = None
    for error in exc.errors():
        path = ".".join(str(part) for part in error["loc"])
        if prefix:
            path = f"{prefix}.{path}" if path else prefix
        first_path = first_path or path
        problems.append(f"{path}: {error['msg']}")
    failure = ConfigurationError("; ".join(problems))
    failure.key_path = first_path
    return failure


def scenario_from_dict(data: Dict[str, Any]) -> Scenario:
    """Validate raw scenario data; failures carry dotted key paths."""
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        raise _as_configuration_error(exc) from exc


def parse_scenario(text: str) -> Scenario:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"invalid TOML: {exc}") from exc
    return scenario_from_dict(data)


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read and validate a TOML scenario file."""
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read scenario {source}: {exc}") from exc
    logger.debug("loaded scenario %s", source)
    return parse_scenario(text)
