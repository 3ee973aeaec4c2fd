"""Experiment orchestration for scenarios.

Every random stream comes from ``make_rng(seed, stage, trial)``, and trials
are merged in trial order, so reports do not depend on the thread count.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from importlib import metadata
from typing import Any, Callable, Dict, List, Optional, Tuple, TypeVar

import numpy as np

from .core import ExperimentSetup, build_pipeline, draw_bank
from .encoder import draw_linear_bank
from .exceptions import ConfigurationError, UnsupportedKernelError
from .kernels import (
    KernelFamily,
    SpectralSummary,
    nystrom_sample_size,
    operator_eigenvalues,
)
from .reporting import ExperimentResult
from .risk_bounds import (
    ANNEALED_COLUMNS,
    QUENCHED_COLUMNS,
    SWEEP_COLUMNS,
    AnnealedReport,
    BoundBreakdown,
    RiskReport,
    annealed_risk,
    arithmetic_mean,
    attach_quenched_bounds,
    coverage_floor,
    harmonic_mean,
    quenched_risk,
    theorem1_lower,
    theorem1_upper,
    theorem2_bounds,
)
from .scenario import ExperimentKind, Scenario
from .spectral_mp import (
    GapReport,
    MPLaw,
    kappa_grid,
    linear_encoding_matrix,
    mp_truncated_moment,
    quantile_integral,
    user_gram_linear,
)
from .tasks import InputKind, SubfunctionFamily, eval_subfunctions, feature_covariance
from .topology import (
    SystemConfig,
    Topology,
    check_coverage,
    load_topology,
    received_indices,
    sample_topology,
    tessellated_topology,
)
from .utils import make_rng

logger = logging.getLogger(__name__)

MPGAP_COLUMNS = ("kappa", "D_q", "Phi_MP", "gap", "envelope")

T = TypeVar("T")


def _package_version() -> str:
    try:
        return metadata.version("gmudc-lab")
    except metadata.PackageNotFoundError:
        return "unknown"


def _fan_out(work: Callable[[int], T], count: int, threads: int) -> List[T]:
    """Run ``work`` for 0..count-1, results in index order."""
    if threads > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(work, range(count)))
    return [work(i) for i in range(count)]


def provenance(scenario: Scenario, **extra: Any) -> Dict[str, Any]:
    """Report header: every resolved setting that shapes the numbers."""
    experiment = scenario.experiment
    system = scenario.system
    header: Dict[str, Any] = {
        "gmudc_version": _package_version(),
        "kind": experiment.kind.value,
        "seed": experiment.seed,
        "trials": experiment.trials,
        "n_test": experiment.n_test,
        "M": experiment.M,
        "sigma": experiment.sigma,
        "lambda": scenario.ridge.resolve(experiment.M),
        "K": system.K,
        "N": system.N,
        "L": system.L,
        "Gamma": system.Gamma,
        "Delta": system.Delta,
        "T": system.T,
        "per_shot_links": system.per_shot_links,
        "kernel.family": scenario.kernel.family.value,
        "kernel.bandwidth": scenario.kernel.bandwidth,
        "kernel.normalization": "exact Bochner measure of the unit-peak kernel",
        "encoder.mode": scenario.encoder.mode.value,
        "encoder.redraw_per_trial": scenario.encoder.redraw_per_trial,
        "topology.source": scenario.topology.source,
    }
    for name, value in scenario.bounds.model_dump().items():
        header[f"bounds.{name}"] = value
    header.update(extra)
    return header


def resolve_topology(scenario: Scenario) -> Topology:
    """Topology from file, the tessellated layout, or one seeded draw."""
    section = scenario.topology
    if section.source == "file":
        assert section.path is not None
        config, topology = load_topology(section.path)
        if config != scenario.system:
            raise ConfigurationError(
                f"topology file header {config.model_dump()} does not match [system]",
                "topology.path",
            )
        return topology
    if section.source == "tessellated":
        return tessellated_topology(scenario.system)
    return sample_topology(scenario.system, make_rng(scenario.seed, "topology", 0))


def estimate_spectrum(
    scenario: Scenario, setup: ExperimentSetup, largest_m: int
) -> SpectralSummary:
    """Operator eigenvalues for the converse bounds."""
    bank, law = setup.bank, setup.input_law
    size = scenario.experiment.nystrom_samples or nystrom_sample_size([largest_m])

    def sampler(count: int, rng: np.random.Generator) -> np.ndarray:
        return eval_subfunctions(bank, law.sample(count, rng))

    return operator_eigenvalues(
        setup.kernel,
        sampler,
        size,
        make_rng(scenario.seed, "spectrum"),
        covariance=feature_covariance(bank, law),
    )


def _quenched_rows(seed: int, trial: int, report: RiskReport) -> List[tuple]:
    upper = report.upper.value if report.upper is not None else None
    return [
        (
            seed,
            trial,
            k + 1,
            m_k,
            report.user_risk[k] if report.user_risk else None,
            report.user_se[k] if report.user_se else None,
            upper,
            report.spectral_tail[k],
            report.coverage_floor[k],
        )
        for k, m_k in enumerate(report.m)
    ]


def _bounds_only(
    scenario: Scenario, setup: ExperimentSetup, topology: Topology
) -> RiskReport:
    """Quenched bound evaluations without training.

    d_lambda is replaced by its ceiling, the mean received count.
    """
    config = setup.config
    m = tuple(index.m_k for index in received_indices(topology, config))
    spectral = estimate_spectrum(scenario, setup, max(m, default=0))
    coverage = check_coverage(topology, [t.essential for t in setup.targets], config)
    floors = tuple(
        coverage_floor(target, not result.covered, result.missed, user=k)
        for k, (target, result) in enumerate(zip(setup.targets, coverage))
    )
    B = max(t.B for t in setup.targets)
    m_harm = harmonic_mean(m)
    d_lambda = arithmetic_mean([float(v) for v in m])
    upper = None
    if m_harm is not None:
        upper = theorem1_upper(
            scenario.bounds,
            B,
            config.gamma,
            m_harm,
            setup.sigma,
            d_lambda,
            setup.M,
            setup.lam,
        )
    return RiskReport(
        user_risk=(),
        user_se=(),
        m=m,
        se=0.0,
        n_test=0,
        missed=tuple(r.missed for r in coverage),
        upper=upper,
        spectral_tail=tuple(spectral.tail_sum(m_k) for m_k in m),
        coverage_floor=floors,
        lower=theorem1_lower(spectral, list(m), B, list(floors)),
        d_lambda=d_lambda,
    )


def run_quenched(
    scenario: Scenario, topology: Optional[Topology] = None
) -> ExperimentResult:
    """Train and test on one fixed topology; evaluate both quenched bounds.

    Trials reuse the topology and, unless ``encoder.redraw_per_trial``, the
    feature bank; training and test data are fresh per trial.
    """
    setup = scenario.setup()
    topology = topology if topology is not None else resolve_topology(scenario)
    topology.check_budgets(setup.config)
    seed = scenario.seed
    kind = scenario.experiment.kind

    if kind is ExperimentKind.BOUNDS_ONLY:
        report = _bounds_only(scenario, setup, topology)
        return ExperimentResult(
            kind=kind.value,
            columns=QUENCHED_COLUMNS,
            rows=_quenched_rows(seed, 0, report),
            header=provenance(scenario, lower_bound=report.lower),
            scenario=scenario.resolved(),
            details=[report],
        )

    m = [index.m_k for index in received_indices(topology, setup.config)]
    spectral = estimate_spectrum(scenario, setup, max(m, default=0))
    shared_bank = None
    if not scenario.encoder.redraw_per_trial:
        shared_bank = draw_bank(setup, topology, make_rng(seed, "bank", 0))

    def trial(t: int) -> RiskReport:
        pipeline = build_pipeline(
            setup,
            topology,
            make_rng(seed, "bank", t),
            make_rng(seed, "train", t),
            feature_bank=shared_bank,
        )
        report = quenched_risk(
            pipeline, None, scenario.experiment.n_test, make_rng(seed, "test", t)
        )
        logger.debug("quenched trial %d: avg risk %.6g", t, report.avg_risk)
        return attach_quenched_bounds(report, pipeline, scenario.bounds, spectral)

    reports = _fan_out(trial, scenario.experiment.trials, scenario.experiment.threads)
    rows: List[tuple] = []
    for t, report in enumerate(reports):
        rows.extend(_quenched_rows(seed, t, report))
    m_harm = harmonic_mean(m)
    return ExperimentResult(
        kind=kind.value,
        columns=QUENCHED_COLUMNS,
        rows=rows,
        header=provenance(
            scenario,
            m_harm=m_harm,
            m_arith=arithmetic_mean([float(v) for v in m]),
            zero_m_users=sum(1 for v in m if v == 0),
            lower_bound=reports[0].lower,
            spectral_source=spectral.source,
        ),
        scenario=scenario.resolved(),
        details=reports,
    )


def _annealed_point(
    scenario: Scenario, system: SystemConfig
) -> Tuple[AnnealedReport, BoundBreakdown, BoundBreakdown]:
    setup = scenario.setup(system)
    experiment = scenario.experiment
    report: AnnealedReport = annealed_risk(
        setup, experiment.trials, experiment.n_test, experiment.seed, experiment.threads
    )
    spectral = estimate_spectrum(
        scenario, setup, int(math.ceil(system.expected_received))
    )
    r_avg = arithmetic_mean([float(t.r_k) for t in setup.targets])
    d_lambda = arithmetic_mean(
        [d.d_lambda if d.d_lambda is not None else 0.0 for d in report.draws]
    )
    lower, upper = theorem2_bounds(
        scenario.bounds,
        system,
        max(t.B for t in setup.targets),
        setup.sigma,
        d_lambda,
        setup.M,
        setup.lam,
        r_avg,
        spectral,
    )
    return report, lower, upper


def run_annealed(scenario: Scenario) -> ExperimentResult:
    """Average over independent topology draws; evaluate the annealed bounds.

    With ``[annealed] servers`` one summary row is emitted per server count.
    """
    seed = scenario.seed
    sweep = scenario.annealed.servers
    if sweep:
        rows = []
        details = []
        for n_servers in sweep:
            system = SystemConfig(**{**scenario.system.model_dump(), "N": n_servers})
            report, lower, upper = _annealed_point(scenario, system)
            details.append(report)
            rows.append(
                (
                    seed,
                    n_servers,
                    system.expected_received,
                    report.avg_risk,
                    report.se,
                    lower.value,
                    upper.value,
                )
            )
        return ExperimentResult(
            kind=ExperimentKind.ANNEALED.value,
            columns=SWEEP_COLUMNS,
            rows=rows,
            header=provenance(scenario, sweep=",".join(map(str, sweep))),
            scenario=scenario.resolved(),
            details=details,
        )

    report, lower, upper = _annealed_point(scenario, scenario.system)
    rows = [
        (seed, t, draw.avg_risk, draw.m_arith, draw.miss_count, lower.value, upper.value)
        for t, draw in enumerate(report.draws)
    ]
    extra = {f"t2_upper.{k}": v for k, v in upper.terms.items()}
    extra.update({f"t2_lower.{k}": v for k, v in lower.terms.items()})
    return ExperimentResult(
        kind=ExperimentKind.ANNEALED.value,
        columns=ANNEALED_COLUMNS,
        rows=rows,
        header=provenance(
            scenario, avg_risk=report.avg_risk, se=report.se, avg_m=report.avg_m, **extra
        ),
        scenario=scenario.resolved(),
        details=[report],
    )


def _require_linear_isotropic(scenario: Scenario) -> None:
    if scenario.kernel.family is not KernelFamily.LINEAR:
        raise UnsupportedKernelError(
            scenario.kernel.family.value,
            "mp-gap",
            [
                "set kernel.family = 'linear'",
                "the MP comparison assumes linear kernels with isotropic inputs",
            ],
        )
    isotropic = (
        scenario.subfunctions.family is SubfunctionFamily.COORDINATE_PROJECTION
        and scenario.subfunctions.weights is None
        and scenario.inputs.kind is InputKind.STANDARD_NORMAL
        and scenario.inputs.scale == 1.0
        and scenario.inputs.dim in (None, scenario.system.L)
    )
    if not isotropic:
        raise ConfigurationError(
            "mp-gap needs the isotropic preset: coordinate_projection subfunctions "
            "on standard normal inputs of dimension L",
            "subfunctions",
        )


def run_mpgap(
    scenario: Scenario, topology: Optional[Topology] = None
) -> ExperimentResult:
    """User-averaged lower-tail integral against the MP benchmark on a kappa grid."""
    _require_linear_isotropic(scenario)
    system = scenario.system
    topology = topology if topology is not None else resolve_topology(scenario)
    topology.check_budgets(system)
    bank = draw_linear_bank(
        topology,
        system,
        make_rng(scenario.seed, "bank", 0),
        weights=scenario.encoder.linear_weights,
        shared_shots=scenario.encoder.shared_shots,
    )
    esds = []
    for index in received_indices(topology, system):
        if index.m_k == 0:
            logger.warning("user %d receives no features; skipped", index.user + 1)
            continue
        _, esd = user_gram_linear(linear_encoding_matrix(bank, index))
        esds.append(esd)
    if not esds:
        raise ConfigurationError("no user receives any feature", "system")

    law = MPLaw.for_config(system)
    kappa_max = scenario.mp_gap.kappa if scenario.mp_gap.kappa is not None else system.kappa
    grid = kappa_grid(kappa_max, [esd.m for esd in esds], scenario.mp_gap.points)
    rows = []
    reports = []
    for kappa in grid:
        kappa = float(kappa)
        d_q = arithmetic_mean([quantile_integral(esd, kappa) for esd in esds])
        phi = mp_truncated_moment(law, kappa)
        report = GapReport(
            kappa=kappa,
            m_eff=system.m_eff,
            D_q=d_q,
            Phi_MP=phi,
            gap=phi - d_q,
            envelope=law.b * kappa,
        )
        reports.append(report)
        rows.append((kappa, d_q, phi, report.gap, report.envelope))
    return ExperimentResult(
        kind=ExperimentKind.MP_GAP.value,
        columns=MPGAP_COLUMNS,
        rows=rows,
        header=provenance(
            scenario,
            lambda_prime=law.lambda_prime,
            mp_r=law.r,
            mp_b=law.b,
            zero_atom=law.zero_atom,
            m_eff=system.m_eff,
            users=len(esds),
        ),
        scenario=scenario.resolved(),
        details=reports,
    )


def run_scenario(scenario: Scenario) -> ExperimentResult:
    """Dispatch on ``experiment.kind``."""
    kind = scenario.experiment.kind
    if kind is ExperimentKind.ANNEALED:
        return run_annealed(scenario)
    if kind is ExperimentKind.MP_GAP:
        return run_mpgap(scenario)
    return run_quenched(scenario)
