import logging

from .config import config
from .core import ExperimentSetup, Pipeline, build_pipeline
from .decoder import RidgeModel, effective_dimension, fit_ridge, predict
from .encoder import (
    FeatureBank,
    SamplingMode,
    draw_feature_bank,
    draw_linear_bank,
    encode_sample,
    mc_kernel,
    user_feature_vector,
)
from .exceptions import (
    BudgetViolationError,
    ConfigurationError,
    CoverageFloorError,
    DimensionMismatchError,
    EmptyReportError,
    GmudcError,
    InvalidParameterError,
    NumericalError,
    UnknownUserError,
    UnsupportedKernelError,
)
from .kernels import (
    KernelFamily,
    KernelSpec,
    eval_kernel,
    operator_eigenvalues,
    sample_frequency,
    variance_proxy,
)
from .risk_bounds import (
    BoundConstants,
    annealed_risk,
    coverage_floor,
    quenched_risk,
    theorem1_lower,
    theorem1_upper,
    theorem2_bounds,
)
from .scenario import Scenario, load_scenario
from .spectral_mp import (
    ESD,
    MPLaw,
    mp_cdf,
    mp_gap,
    mp_threshold,
    mp_truncated_moment,
    quantile_integral,
    quenched_distortion,
)
from .tasks import (
    SubfunctionBank,
    TargetSpec,
    eval_subfunctions,
    eval_target,
    generate_dataset,
)
from .topology import (
    SystemConfig,
    Topology,
    check_coverage,
    received_count,
    sample_assignment,
    sample_links,
    sample_topology,
)

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = [
    "config",
    "BoundConstants",
    "BudgetViolationError",
    "ConfigurationError",
    "CoverageFloorError",
    "DimensionMismatchError",
    "ESD",
    "EmptyReportError",
    "ExperimentSetup",
    "FeatureBank",
    "GmudcError",
    "InvalidParameterError",
    "KernelFamily",
    "KernelSpec",
    "MPLaw",
    "NumericalError",
    "Pipeline",
    "RidgeModel",
    "SamplingMode",
    "Scenario",
    "SubfunctionBank",
    "SystemConfig",
    "TargetSpec",
    "Topology",
    "UnknownUserError",
    "UnsupportedKernelError",
    "annealed_risk",
    "build_pipeline",
    "check_coverage",
    "coverage_floor",
    "draw_feature_bank",
    "draw_linear_bank",
    "effective_dimension",
    "encode_sample",
    "eval_kernel",
    "eval_subfunctions",
    "eval_target",
    "fit_ridge",
    "generate_dataset",
    "load_scenario",
    "mc_kernel",
    "mp_cdf",
    "mp_gap",
    "mp_threshold",
    "mp_truncated_moment",
    "operator_eigenvalues",
    "predict",
    "quantile_integral",
    "quenched_distortion",
    "quenched_risk",
    "received_count",
    "sample_assignment",
    "sample_frequency",
    "sample_links",
    "sample_topology",
    "theorem1_lower",
    "theorem1_upper",
    "theorem2_bounds",
    "user_feature_vector",
    "variance_proxy",
]
