"""Tests for experiment orchestration."""

import pytest

from gmudc.exceptions import ConfigurationError, UnsupportedKernelError
from gmudc.harness import (
    MPGAP_COLUMNS,
    provenance,
    resolve_topology,
    run_annealed,
    run_mpgap,
    run_quenched,
    run_scenario,
)
from gmudc.reporting import render_csv
from gmudc.risk_bounds import ANNEALED_COLUMNS, QUENCHED_COLUMNS, SWEEP_COLUMNS
from gmudc.scenario import ExperimentKind, parse_scenario
from gmudc.topology import (
    SystemConfig,
    received_indices,
    sample_topology,
    save_topology,
    tessellated_topology,
)
from gmudc.utils import make_rng


def _with_kind(text, kind):
    return text.replace("[experiment]\n", f'[experiment]\nkind = "{kind}"\n', 1)


def test_provenance_header(quenched_text):
    """Test the header records resolved settings but not the thread count."""
    scenario = parse_scenario(quenched_text).with_overrides(threads=4)
    header = provenance(scenario, extra_key=1.5)
    assert header["seed"] == 3
    assert header["lambda"] == 0.01
    assert header["kernel.family"] == "gaussian"
    assert header["bounds.epsilon"] == 0.1
    assert header["topology.source"] == "sample"
    assert header["extra_key"] == 1.5
    assert "threads" not in header


def test_resolve_topology_is_seeded(quenched_text):
    """Test sampled topologies depend only on the master seed."""
    scenario = parse_scenario(quenched_text)
    first = resolve_topology(scenario)
    assert first == resolve_topology(scenario)
    assert first == sample_topology(scenario.system, make_rng(3, "topology", 0))


def test_run_quenched_rows(quenched_text):
    """Test one row per trial and user with finite risks and bounds."""
    scenario = parse_scenario(quenched_text)
    result = run_quenched(scenario)
    assert result.columns == QUENCHED_COLUMNS
    assert len(result.rows) == 2 * 3
    assert [row[1] for row in result.rows] == [0, 0, 0, 1, 1, 1]
    assert [row[2] for row in result.rows] == [1, 2, 3, 1, 2, 3]
    m = [index.m_k for index in received_indices(resolve_topology(scenario), scenario.system)]
    assert [row[3] for row in result.rows[:3]] == m
    for row in result.rows:
        assert row[0] == 3
        assert row[4] >= 0.0
        assert row[5] >= 0.0
        assert row[6] > 0.0
        assert row[7] >= 0.0
    assert result.header["m_harm"] > 0
    assert "lower_bound" in result.header
    assert result.scenario["experiment"]["trials"] == 2


def test_run_quenched_is_thread_independent(quenched_text):
    """Test reports are identical for one and several worker threads."""
    scenario = parse_scenario(quenched_text)
    single = render_csv(run_quenched(scenario))
    threaded = render_csv(run_quenched(scenario.with_overrides(threads=4)))
    assert single == threaded


def test_run_quenched_seed_changes_results(quenched_text):
    """Test a different master seed changes the measured risks."""
    scenario = parse_scenario(quenched_text)
    first = run_quenched(scenario).rows
    second = run_quenched(scenario.with_overrides(seed=4)).rows
    assert [row[4] for row in first] != [row[4] for row in second]


def test_bounds_only_leaves_risk_empty(quenched_text):
    """Test bounds-only runs evaluate bounds without training."""
    scenario = parse_scenario(_with_kind(quenched_text, "bounds_only"))
    result = run_scenario(scenario)
    assert result.kind == "bounds_only"
    assert len(result.rows) == 3
    for row in result.rows:
        assert row[1] == 0
        assert row[4] is None
        assert row[5] is None
        assert row[6] > 0.0
    assert result.details[0].d_lambda == pytest.approx(
        sum(row[3] for row in result.rows) / 3
    )


def test_file_topology_matches_direct_run(quenched_text, tmp_path):
    """Test a saved topology file reproduces the run on that topology."""
    scenario = parse_scenario(quenched_text)
    topology = sample_topology(scenario.system, make_rng(11, "topology", 0))
    path = tmp_path / "topology.txt"
    save_topology(path, scenario.system, topology)
    extra = f'\n[topology]\nsource = "file"\npath = "{path.as_posix()}"\n'
    from_file = run_quenched(parse_scenario(quenched_text + extra))
    direct = run_quenched(scenario, topology)
    assert from_file.rows == direct.rows
    assert from_file.header["topology.source"] == "file"


def test_file_topology_header_mismatch(quenched_text, tmp_path):
    """Test a topology file for another system is rejected."""
    other = SystemConfig(K=3, N=4, L=4, Gamma=2, Delta=2, T=1)
    path = tmp_path / "topology.txt"
    save_topology(path, other, sample_topology(other, make_rng(1, "topology", 0)))
    extra = f'\n[topology]\nsource = "file"\npath = "{path.as_posix()}"\n'
    with pytest.raises(ConfigurationError) as exc_info:
        run_quenched(parse_scenario(quenched_text + extra))
    assert exc_info.value.key_path == "topology.path"


def test_run_annealed_rows(quenched_text):
    """Test one row per topology draw with the bounds repeated."""
    result = run_annealed(parse_scenario(_with_kind(quenched_text, "annealed")))
    assert result.kind == "annealed"
    assert result.columns == ANNEALED_COLUMNS
    assert [row[1] for row in result.rows] == [0, 1]
    for row in result.rows:
        assert row[2] >= 0.0
        assert row[4] >= 0
        assert row[5] == result.rows[0][5]
        assert row[6] == result.rows[0][6]
    assert any(key.startswith("t2_upper.") for key in result.header)
    assert result.header["avg_risk"] == pytest.approx(
        sum(row[2] for row in result.rows) / 2
    )


def test_run_annealed_server_sweep(quenched_text):
    """Test [annealed] servers emits one summary row per server count."""
    text = _with_kind(quenched_text, "annealed") + "\n[annealed]\nservers = [4, 8]\n"
    result = run_annealed(parse_scenario(text))
    assert result.columns == SWEEP_COLUMNS
    assert [row[1] for row in result.rows] == [4, 8]
    for row in result.rows:
        system = SystemConfig(K=3, N=row[1], L=4, Gamma=2, Delta=2, T=1)
        assert row[2] == pytest.approx(system.expected_received)
    assert result.header["sweep"] == "4,8"


def test_run_mpgap_rows(mpgap_text):
    """Test the kappa grid, the signed gap and its envelope."""
    scenario = parse_scenario(mpgap_text)
    result = run_mpgap(scenario)
    assert result.columns == MPGAP_COLUMNS
    kappas = [row[0] for row in result.rows]
    assert kappas[0] == 0.0
    assert kappas[-1] == pytest.approx(0.3)
    assert len(kappas) >= 64
    assert result.rows[0][1] == 0.0
    assert result.header["lambda_prime"] == 1.0
    assert result.header["users"] == 8
    for kappa, d_q, phi, gap, envelope in result.rows:
        assert d_q >= 0.0
        assert gap == pytest.approx(phi - d_q)
        assert gap <= envelope + 1e-8
        assert envelope <= 4.0 * 0.3 + 1e-8


def test_run_mpgap_accepts_topology(mpgap_text):
    """Test an explicit topology gives the same result as the configured one."""
    scenario = parse_scenario(mpgap_text)
    direct = run_mpgap(scenario, tessellated_topology(scenario.system))
    assert direct.rows == run_mpgap(scenario).rows


def test_run_mpgap_needs_linear_kernel(quenched_text):
    """Test the MP comparison refuses nonlinear kernels."""
    scenario = parse_scenario(_with_kind(quenched_text, "mp_gap"))
    with pytest.raises(UnsupportedKernelError) as exc_info:
        run_scenario(scenario)
    assert exc_info.value.operation == "mp-gap"


def test_run_mpgap_needs_isotropic_inputs(mpgap_text):
    """Test non-isotropic inputs are a configuration error."""
    scenario = parse_scenario(mpgap_text + "\n[inputs]\nscale = 2.0\n")
    with pytest.raises(ConfigurationError) as exc_info:
        run_mpgap(scenario)
    assert exc_info.value.key_path == "subfunctions"


def test_run_scenario_dispatch(mpgap_text):
    """Test run_scenario follows experiment.kind."""
    scenario = parse_scenario(mpgap_text)
    assert scenario.experiment.kind is ExperimentKind.MP_GAP
    assert run_scenario(scenario).kind == "mp_gap"
