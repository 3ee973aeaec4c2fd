"""Monte Carlo risks and the achievability / converse bound evaluations.

Absolute constants default to 1, so the bounds are shape curves rather than
certified numbers.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from .core import ExperimentSetup, Pipeline, build_pipeline, sample_test_features
from .exceptions import CoverageFloorError, InvalidParameterError
from .kernels import SpectralSummary
from .spectral_mp import discard_count, smallest_eigen_sum, user_gram_linear
from .tasks import TargetSpec, eval_target_batch, linear_separation
from .topology import SystemConfig, check_coverage, sample_topology
from .types import OpenUnitFloat, PositiveFloat
from .utils import make_rng

logger = logging.getLogger(__name__)

QUENCHED_COLUMNS = (
    "seed",
    "trial",
    "user",
    "m_k",
    "risk",
    "se",
    "t1_upper",
    "spectral_tail",
    "coverage_floor",
)
ANNEALED_COLUMNS = (
    "seed",
    "trial",
    "avg_risk",
    "avg_m",
    "miss_count",
    "t2_lower",
    "t2_upper",
)
SWEEP_COLUMNS = ("seed", "N", "TNdelta", "avg_risk", "se", "t2_lower", "t2_upper")

TestSampler = Callable[[int, np.random.Generator], np.ndarray]


class BoundConstants(BaseModel):
    """Unnamed absolute constants plus the deviation and confidence levels."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    C1: PositiveFloat = 1.0
    C2: PositiveFloat = 1.0
    C3: PositiveFloat = 1.0
    C1_prime: PositiveFloat = 1.0
    c: PositiveFloat = 1.0
    c_prime: PositiveFloat = 1.0
    C_star: PositiveFloat = 1.0
    C_mask: PositiveFloat = 1.0
    epsilon: OpenUnitFloat = 0.1
    delta_prime: OpenUnitFloat = 0.05


@dataclass(frozen=True)
class BoundBreakdown:
    """A bound value and its named terms."""

    terms: Dict[str, float]
    combine: str = "sum"

    @property
    def value(self) -> float:
        if not self.terms:
            return 0.0
        if self.combine == "max":
            return max(self.terms.values())
        return math.fsum(self.terms.values())


def harmonic_mean(values: Sequence[int]) -> Optional[float]:
    """Harmonic mean of the positive entries; None when there are none."""
    positive = [v for v in values if v > 0]
    if not positive:
        return None
    return len(positive) / math.fsum(1.0 / v for v in positive)


def arithmetic_mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values) if values else 0.0


def _check_gamma(gamma: float) -> None:
    if not 0 < gamma <= 1:
        raise InvalidParameterError("gamma", gamma, "must lie in (0, 1]")


def theorem1_upper(
    constants: BoundConstants,
    B: float,
    gamma: float,
    m_harm: float,
    sigma: float,
    d_lambda: float,
    M: int,
    lam: float,
) -> BoundBreakdown:
    """(2/gamma + C1) B^2 log(2/delta') / (gamma m_harm) + C2 sigma^2 d / M + C3 B^2 lam."""
    _check_gamma(gamma)
    if not m_harm or m_harm <= 0:
        raise InvalidParameterError("m_harm", m_harm, "must be positive")
    if lam < 0:
        raise InvalidParameterError("lambda", lam, "must be >= 0")
    log_term = math.log(2.0 / constants.delta_prime)
    return BoundBreakdown(
        terms={
            "features": (2.0 / gamma + constants.C1) * B**2 * log_term / (gamma * m_harm),
            "noise": constants.C2 * sigma**2 * d_lambda / M,
            "ridge": constants.C3 * B**2 * lam,
        }
    )


def theorem1_user_terms(
    constants: BoundConstants, B: float, gamma: float, m: Sequence[int]
) -> List[Optional[float]]:
    """Per-user feature term; None for users that receive nothing."""
    _check_gamma(gamma)
    scale = (2.0 / gamma + constants.C1) * B**2 * math.log(2.0 / constants.delta_prime)
    return [scale / (gamma * m_k) if m_k > 0 else None for m_k in m]


def per_user_lower(
    spectral: SpectralSummary,
    m: Sequence[int],
    B: float,
    coverage_floors: Sequence[float],
) -> List[float]:
    """B^2 max(tail at m_k, eps_cov,k) for each user."""
    return [
        B**2 * max(spectral.tail_sum(m_k), floor)
        for m_k, floor in zip(m, coverage_floors)
    ]


def theorem1_lower(
    spectral: SpectralSummary,
    m: Sequence[int],
    B: float,
    coverage_floors: Sequence[float],
) -> float:
    """(B^2 / K) sum_k max(sum_{j > m_k} lambda_j, eps_cov,k)."""
    if len(m) != len(coverage_floors):
        raise InvalidParameterError(
            "coverage_floors", len(coverage_floors), f"need one per user ({len(m)})"
        )
    if not m:
        return 0.0
    return arithmetic_mean(per_user_lower(spectral, m, B, coverage_floors))


def coverage_floor(
    target: TargetSpec,
    uncovered: bool,
    missed: Optional[Sequence[int]] = None,
    user: Optional[int] = None,
) -> float:
    """eps_cov = separation^2 / 4 for an uncovered user, 0 otherwise.

    Linear targets get the separation |a_l*| * dw over the missed
    coordinates; other targets must declare it.
    """
    if not uncovered:
        return 0.0
    separation = target.separation
    if separation is None:
        separation = linear_separation(target, missed or target.essential)
    if separation is None:
        raise CoverageFloorError(user)
    return separation**2 / 4.0


def theorem2_bounds(
    constants: BoundConstants,
    config: SystemConfig,
    B: float,
    sigma: float,
    d_lambda: float,
    M: int,
    lam: float,
    r_avg: float,
    spectral: SpectralSummary,
) -> Tuple[BoundBreakdown, BoundBreakdown]:
    """Annealed (lower, upper) bounds with per-term breakdowns.

    The spectral tail is taken at floor(T N delta). The coverage indicator is
    on when gamma N delta <= log(max(r_avg, e)) and some coordinate is essential.
    """
    gamma, delta = config.gamma, config.delta
    eps = constants.epsilon
    n_delta = config.N * delta
    degree = config.T * (1.0 - eps) * n_delta
    upper = BoundBreakdown(
        terms={
            "features": (2.0 / gamma + constants.C1) * B**2 / (gamma * degree),
            "noise": constants.C2 * sigma**2 * d_lambda / M,
            "ridge": constants.C3 * B**2 * lam,
            "coverage": r_avg * math.exp(-gamma * n_delta),
            "degree": constants.C_star * math.exp(-constants.c * eps**2 * n_delta),
        }
    )
    indicator = r_avg > 0 and gamma * n_delta <= math.log(max(r_avg, math.e))
    lower = BoundBreakdown(
        terms={
            "spectral": B**2 * spectral.tail_sum(int(math.floor(config.expected_received))),
            "coverage": constants.c_prime if indicator else 0.0,
        },
        combine="max",
    )
    return lower, upper


def miss_probability(config: SystemConfig, r_avg: float) -> float:
    """r_avg e^{-gamma N delta} clamped to 1 for display as a probability."""
    return min(1.0, r_avg * math.exp(-config.gamma * config.N * config.delta))


def ridge_risk_bound(
    sigma: float,
    d_lambda: float,
    M: int,
    B: float,
    lam: float,
    c: float = 4.0,
    approximation: float = 0.0,
) -> float:
    """approximation + c (sigma^2 d_lambda / M + B^2 lam)."""
    return approximation + c * (sigma**2 * d_lambda / M + B**2 * lam)


def linear_scheme_risk(E: np.ndarray, kappa: float) -> float:
    """Population risk of the best decoder on the top m - ceil(kappa m) Gram directions.

    Equals the sum of the ceil(kappa m) smallest eigenvalues of E E^T.
    """
    _, esd = user_gram_linear(E)
    return smallest_eigen_sum(esd, discard_count(kappa, esd.m))


# --- Monte Carlo risks -----------------------------------------------------


@dataclass(frozen=True)
class RiskReport:
    """Per-user test risks of one pipeline, with optional bound evaluations."""

    user_risk: Tuple[float, ...]
    user_se: Tuple[float, ...]
    m: Tuple[int, ...]
    se: float
    n_test: int
    missed: Tuple[Tuple[int, ...], ...] = ()
    upper: Optional[BoundBreakdown] = None
    spectral_tail: Tuple[float, ...] = ()
    coverage_floor: Tuple[float, ...] = ()
    lower: Optional[float] = None
    d_lambda: Optional[float] = None

    @property
    def avg_risk(self) -> float:
        return arithmetic_mean(self.user_risk)

    @property
    def m_harm(self) -> Optional[float]:
        return harmonic_mean(self.m)

    @property
    def m_arith(self) -> float:
        return arithmetic_mean([float(v) for v in self.m])

    @property
    def zero_m_users(self) -> Tuple[int, ...]:
        return tuple(k for k, m_k in enumerate(self.m) if m_k == 0)

    @property
    def miss_count(self) -> int:
        return sum(1 for missed in self.missed if missed)


def quenched_risk(
    pipeline: Pipeline,
    test_sampler: Optional[TestSampler],
    n_test: int,
    rng: np.random.Generator,
) -> RiskReport:
    """(1/K) sum_k of the mean squared error on n_test fresh samples.

    Errors are summed over a target's outputs. ``se`` is the standard error
    of the user-averaged loss across test samples.
    """
    if n_test < 1:
        raise InvalidParameterError("n_test", n_test, "need at least one test sample")
    setup = pipeline.setup
    if test_sampler is None:
        w = sample_test_features(setup, n_test, rng)
    else:
        w = np.asarray(test_sampler(n_test, rng), dtype=float)
    losses = np.empty((n_test, len(setup.targets)))
    for k, target in enumerate(setup.targets):
        truth = eval_target_batch(target, w)
        estimate = pipeline.predict(k, w).reshape(truth.shape)
        losses[:, k] = np.sum((estimate - truth) ** 2, axis=1)
    spread = np.std(losses, axis=0, ddof=1) if n_test > 1 else np.zeros(losses.shape[1])
    averaged = losses.mean(axis=1)
    se = float(np.std(averaged, ddof=1) / math.sqrt(n_test)) if n_test > 1 else 0.0
    return RiskReport(
        user_risk=tuple(float(v) for v in losses.mean(axis=0)),
        user_se=tuple(float(v) for v in spread / math.sqrt(n_test)),
        m=pipeline.m,
        se=se,
        n_test=n_test,
    )


def pipeline_d_lambda(pipeline: Pipeline) -> float:
    """d_lambda = (1/K) sum_k d_{lambda,k}; users without statistics count 0."""
    values = [g.d_lambda if g is not None else 0.0 for g in pipeline.gram]
    return arithmetic_mean(values)


def attach_quenched_bounds(
    report: RiskReport,
    pipeline: Pipeline,
    constants: BoundConstants,
    spectral: SpectralSummary,
) -> RiskReport:
    """Fill coverage misses, the quenched upper bound and the converse."""
    setup = pipeline.setup
    coverage = check_coverage(
        pipeline.topology, [t.essential for t in setup.targets], setup.config
    )
    floors = [
        coverage_floor(target, not result.covered, result.missed, user=k)
        for k, (target, result) in enumerate(zip(setup.targets, coverage))
    ]
    B = max(t.B for t in setup.targets)
    d_lambda = pipeline_d_lambda(pipeline)
    m_harm = report.m_harm
    for k in report.zero_m_users:
        logger.warning("user %d receives no features; excluded from m_harm", k + 1)
    for result in coverage:
        if result.missed:
            logger.warning(
                "user %d misses essential coordinates %s",
                result.user + 1,
                [c + 1 for c in result.missed],
            )
    upper = None
    if m_harm is not None:
        upper = theorem1_upper(
            constants,
            B,
            setup.config.gamma,
            m_harm,
            setup.sigma,
            d_lambda,
            setup.M,
            setup.lam,
        )
    return replace(
        report,
        missed=tuple(r.missed for r in coverage),
        upper=upper,
        spectral_tail=tuple(spectral.tail_sum(m_k) for m_k in report.m),
        coverage_floor=tuple(floors),
        lower=theorem1_lower(spectral, list(report.m), B, floors),
        d_lambda=d_lambda,
    )


@dataclass(frozen=True)
class AnnealedReport:
    """Quenched reports of independent topology draws."""

    draws: Tuple[RiskReport, ...]
    seed: int
    lower: Optional[BoundBreakdown] = None
    upper: Optional[BoundBreakdown] = None
    extra: Dict[str, float] = field(default_factory=dict)

    @property
    def avg_risk(self) -> float:
        return arithmetic_mean([d.avg_risk for d in self.draws])

    @property
    def se(self) -> float:
        if len(self.draws) < 2:
            return self.draws[0].se if self.draws else 0.0
        values = np.array([d.avg_risk for d in self.draws])
        return float(np.std(values, ddof=1) / math.sqrt(len(values)))

    @property
    def avg_m(self) -> float:
        return arithmetic_mean([d.m_arith for d in self.draws])

    @property
    def miss_count(self) -> int:
        return sum(d.miss_count for d in self.draws)


def run_trial(
    setup: ExperimentSetup, master_seed: int, trial: int, n_test: int
) -> RiskReport:
    """One annealed draw: topology, bank, training data and test set."""
    topology = sample_topology(setup.config, make_rng(master_seed, "topology", trial))
    pipeline = build_pipeline(
        setup,
        topology,
        make_rng(master_seed, "bank", trial),
        make_rng(master_seed, "train", trial),
    )
    report = quenched_risk(pipeline, None, n_test, make_rng(master_seed, "test", trial))
    coverage = check_coverage(topology, [t.essential for t in setup.targets], setup.config)
    logger.debug("trial %d: avg risk %.6g", trial, report.avg_risk)
    return replace(
        report,
        missed=tuple(r.missed for r in coverage),
        d_lambda=pipeline_d_lambda(pipeline),
    )


def annealed_risk(
    setup: ExperimentSetup,
    n_topologies: int,
    n_test: int,
    master_seed: int,
    threads: int = 1,
) -> AnnealedReport:
    """Average of quenched risks over independent topology draws.

    Every draw gets its own topology, feature bank and decoders. Draws run on
    ``threads`` workers and are merged in trial order.
    """
    if n_topologies < 1:
        raise InvalidParameterError("n_topologies", n_topologies, "must be at least 1")
    trials = range(n_topologies)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            draws = list(
                pool.map(lambda t: run_trial(setup, master_seed, t, n_test), trials)
            )
    else:
        draws = [run_trial(setup, master_seed, t, n_test) for t in trials]
    return AnnealedReport(draws=tuple(draws), seed=master_seed)
