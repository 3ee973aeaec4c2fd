"""Tests for Gram spectra, quantile integrals and the Marchenko-Pastur benchmark."""

import math

import numpy as np
import pytest
from scipy import integrate

from gmudc.encoder import draw_linear_bank
from gmudc.exceptions import InvalidParameterError
from gmudc.risk_bounds import linear_scheme_risk
from gmudc.spectral_mp import (
    ESD,
    MPLaw,
    discard_count,
    esd_cdf,
    gap_lower_certificate,
    kappa_grid,
    linear_encoding_matrix,
    mp_cdf,
    mp_gap,
    mp_pdf,
    mp_threshold,
    mp_truncated_moment,
    projection_distortion,
    quantile_integral,
    quenched_distortion,
    smallest_eigen_sum,
    truncated_moment,
    user_gram_linear,
)
from gmudc.topology import SystemConfig, received_count, tessellated_topology

LAMBDA_PRIMES = [0.25, 0.5, 1.0, 2.0]


def test_discard_count_rounds_up():
    """Test q = ceil(kappa m) without float spill-over."""
    assert discard_count(0.3, 10) == 3
    assert discard_count(0.1, 10) == 1
    assert discard_count(0.25, 10) == 3
    assert discard_count(0.0, 10) == 0
    assert discard_count(1.0, 7) == 7
    with pytest.raises(InvalidParameterError):
        discard_count(1.5, 10)


def test_esd_sorts_and_clamps():
    """Test eigenvalues are stored descending with round-off clamped to zero."""
    esd = ESD(eigenvalues=np.array([0.5, -1e-13, 2.0, 1.0]))
    assert list(esd.eigenvalues) == [2.0, 1.0, 0.5, 0.0]
    assert list(esd.ascending) == [0.0, 0.5, 1.0, 2.0]
    assert esd.quantile(0.0) == 0.0
    assert esd.quantile(0.5) == 1.0
    assert esd.quantile(1.0) == 2.0
    with pytest.raises(InvalidParameterError):
        esd.quantile(1.5)


def test_user_gram_linear():
    """Test G = E E^T and the empty-index error."""
    E = np.array([[1.0, 0.0, 1.0], [0.0, 2.0, 0.0]])
    G, esd = user_gram_linear(E)
    assert np.allclose(G, [[2.0, 0.0], [0.0, 4.0]])
    assert list(esd.eigenvalues) == pytest.approx([4.0, 2.0])
    with pytest.raises(InvalidParameterError):
        user_gram_linear(np.zeros((0, 3)))


def test_quantile_integral_matches_eigen_sum():
    """Test the quantile integral equals (1/m) times the smallest-q sum at breakpoints."""
    rng = np.random.default_rng(50)
    for _ in range(100):
        m = int(rng.integers(2, 60))
        esd = ESD(eigenvalues=rng.exponential(1.0, m))
        for q in rng.integers(0, m + 1, 10):
            kappa = q / m
            assert quantile_integral(esd, kappa) * m == pytest.approx(
                smallest_eigen_sum(esd, int(q)), abs=1e-12
            )


def test_quantile_integral_is_piecewise_linear():
    """Test the integral interpolates linearly inside a step."""
    esd = ESD(eigenvalues=np.array([1.0, 2.0, 3.0, 4.0]))
    assert quantile_integral(esd, 0.25) == pytest.approx(0.25)
    assert quantile_integral(esd, 0.375) == pytest.approx(0.25 + 0.125 * 2.0)
    assert quantile_integral(esd, 1.0) == pytest.approx(2.5)


def test_esd_cdf_and_truncated_moment():
    """Test the empirical CDF and truncated first moment."""
    esd = ESD(eigenvalues=np.array([0.0, 1.0, 2.0, 3.0]))
    assert esd_cdf(esd, 1.5) == 0.5
    assert truncated_moment(esd, 2.0) == pytest.approx(0.75)


def test_truncated_moment_is_quantile_integral_at_cdf():
    """Test (1/m) sum of eigenvalues <= t equals the integral of Q up to F(t)."""
    rng = np.random.default_rng(51)
    for _ in range(50):
        m = int(rng.integers(2, 40))
        esd = ESD(eigenvalues=rng.exponential(1.0, m))
        ascending = esd.ascending
        midpoints = (ascending[:-1] + ascending[1:]) / 2
        cuts = np.concatenate([[ascending[0] - 0.5], midpoints, [ascending[-1] + 0.5]])
        for t in cuts:
            assert truncated_moment(esd, t) == pytest.approx(
                quantile_integral(esd, esd_cdf(esd, t)), abs=1e-12
            )


def test_distortion_rounds_discard_count_up():
    """Test D sums ceil(kappa m) eigenvalues when kappa m is fractional."""
    config = SystemConfig(K=5, N=4, L=4, Gamma=2, Delta=1, T=1)
    esd = ESD(eigenvalues=np.arange(1.0, 6.0))
    assert discard_count(0.3, 5) == 2
    assert quenched_distortion(esd, config, kappa=0.3) == pytest.approx((1 + 2) / 4)
    assert quenched_distortion(esd, config, kappa=0.5) == pytest.approx((1 + 2 + 3) / 4)
    # the quantile integral interpolates inside the step instead
    assert quantile_integral(esd, 0.3) == pytest.approx((1 + 0.5 * 2) / 5)
    assert quenched_distortion(esd, config, kappa=0.3) > 5 * quantile_integral(esd, 0.3) / 4


def test_quenched_distortion_default_kappa():
    """Test D uses the configured discarded fraction and divides by L."""
    config = SystemConfig(K=10, N=4, L=4, Gamma=2, Delta=1, T=1)
    assert config.kappa == pytest.approx(0.8)
    esd = ESD(eigenvalues=np.arange(1.0, 6.0))
    assert quenched_distortion(esd, config) == pytest.approx((1 + 2 + 3 + 4) / 4)
    assert quenched_distortion(esd, config, kappa=0.2) == pytest.approx(0.25)


def test_mp_law_support_and_atom():
    """Test edges (1 -/+ sqrt(lambda'))^2 and the atom for lambda' > 1."""
    law = MPLaw(lambda_prime=0.25)
    assert (law.r, law.b) == pytest.approx((0.25, 2.25))
    assert law.zero_atom == 0.0
    assert MPLaw(lambda_prime=2.0).zero_atom == pytest.approx(0.5)
    assert MPLaw.for_config(SystemConfig(K=4, N=1, L=8, Gamma=4, Delta=2, T=1)).lambda_prime == 0.5
    with pytest.raises(InvalidParameterError):
        MPLaw(lambda_prime=0.0)


@pytest.mark.parametrize("lambda_prime", LAMBDA_PRIMES)
def test_mp_mass_and_mean(lambda_prime):
    """Test the continuous mass is 1 - atom and the mean is 1 within 1e-8."""
    law = MPLaw(lambda_prime=lambda_prime)
    assert law.continuous_mass(math.pi / 2) == pytest.approx(1.0 - law.zero_atom, abs=1e-8)
    assert mp_truncated_moment(law, 1.0) == pytest.approx(1.0, abs=1e-8)
    assert mp_cdf(law, law.b) == 1.0
    assert mp_cdf(law, -1.0) == 0.0


@pytest.mark.parametrize("lambda_prime", [0.25, 0.5])
def test_mp_pdf_integrates_to_one(lambda_prime):
    """Test the density integrates to one when the support avoids zero."""
    law = MPLaw(lambda_prime=lambda_prime)
    value, _ = integrate.quad(lambda x: mp_pdf(law, x), law.r, law.b, limit=200)
    assert value == pytest.approx(1.0, abs=1e-7)
    assert mp_pdf(law, law.b + 1.0) == 0.0


@pytest.mark.parametrize("lambda_prime", LAMBDA_PRIMES)
def test_mp_threshold_solves_cdf(lambda_prime):
    """Test F(t_kappa) = kappa within 1e-8 above the atom."""
    law = MPLaw(lambda_prime=lambda_prime)
    for kappa in (0.55, 0.7, 0.9, 0.99):
        t = mp_threshold(law, kappa)
        assert law.r <= t <= law.b
        assert mp_cdf(law, t) == pytest.approx(kappa, abs=1e-8)
    assert mp_threshold(law, 1.0) == law.b


def test_mp_threshold_inside_the_atom():
    """Test kappa below the atom mass gives threshold 0 and no moment."""
    law = MPLaw(lambda_prime=2.0)
    assert mp_threshold(law, 0.3) == 0.0
    assert mp_truncated_moment(law, 0.3) == 0.0
    assert mp_threshold(MPLaw(lambda_prime=0.5), 0.0) == pytest.approx(MPLaw(lambda_prime=0.5).r)


def test_mp_truncated_moment_matches_density():
    """Test Phi(kappa) against direct integration of x f(x)."""
    law = MPLaw(lambda_prime=0.5)
    kappa = 0.3
    t = mp_threshold(law, kappa)
    direct, _ = integrate.quad(lambda x: x * mp_pdf(law, x), law.r, t, limit=200)
    assert mp_truncated_moment(law, kappa) == pytest.approx(direct, abs=1e-8)
    assert mp_truncated_moment(law, kappa) <= law.b * kappa


def test_mp_gap_fields_and_envelope():
    """Test the signed gap and its envelope b kappa."""
    law = MPLaw(lambda_prime=0.5)
    esd = ESD(eigenvalues=np.linspace(0.1, 2.5, 40))
    report = mp_gap(esd, law, 0.3)
    assert report.gap == pytest.approx(report.Phi_MP - report.D_q)
    assert report.m_eff == pytest.approx(0.7)
    assert report.envelope == pytest.approx(law.b * 0.3)
    assert report.gap <= report.envelope + 1e-8


@pytest.mark.parametrize("lambda_prime", LAMBDA_PRIMES)
def test_mp_truncated_moment_envelope_over_grid(lambda_prime):
    """Test 0 <= Phi(kappa) <= b kappa and Phi nondecreasing across the kappa grid."""
    law = MPLaw(lambda_prime=lambda_prime)
    grid = kappa_grid(1.0, [10], points=16)
    values = [mp_truncated_moment(law, float(kappa)) for kappa in grid]
    for kappa, phi in zip(grid, values):
        assert 0.0 <= phi <= law.b * kappa + 1e-10
    assert all(b >= a - 1e-10 for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(1.0, abs=1e-8)


def test_tdc_distortion_is_scheme_risk_over_L():
    """Test D equals the kept-direction scheme risk divided by L at every kappa."""
    config = SystemConfig(K=4, N=8, L=8, Gamma=4, Delta=2, T=2)
    topology = tessellated_topology(config)
    bank = draw_linear_bank(topology, config, np.random.default_rng(71))
    index = received_count(topology, config, 0)
    assert index.m_k == 8
    E = linear_encoding_matrix(bank, index)
    _, esd = user_gram_linear(E)
    for kappa in kappa_grid(1.0, [esd.m], points=16):
        risk = linear_scheme_risk(E, float(kappa))
        assert quenched_distortion(esd, config, float(kappa)) == pytest.approx(
            risk / config.L, abs=1e-12
        )


def test_gap_certificate_on_zero_spectrum():
    """Test an all-zero ESD below the MP bulk certifies the whole interval."""
    law = MPLaw(lambda_prime=0.5)
    esd = ESD(eigenvalues=np.zeros(10))
    eta, certificate = gap_lower_certificate(esd, law, 0.3, 0.05)
    assert eta == pytest.approx(0.3)
    assert certificate == pytest.approx(0.015)
    assert certificate <= mp_gap(esd, law, 0.3).gap
    eta_high, _ = gap_lower_certificate(ESD(eigenvalues=np.full(10, 50.0)), law, 0.3, 0.05)
    assert eta_high == 0.0
    with pytest.raises(InvalidParameterError):
        gap_lower_certificate(esd, law, 0.3, 0.0)


def test_kappa_grid_contains_breakpoints():
    """Test the grid covers [0, kappa_max] and every j/m inside it."""
    grid = kappa_grid(0.5, [4, 10], points=5)
    assert grid[0] == 0.0
    assert grid[-1] == 0.5
    for value in (0.25, 0.1, 0.3, 0.125):
        assert np.any(np.isclose(grid, value))
    assert np.all(np.diff(grid) > 0)


@pytest.mark.parametrize("kappa", [0.2, 0.5])
@pytest.mark.slow
def test_projection_distortion_matches_eigen_sum(kappa):
    """Test the trained kept-direction scheme reproduces D within 2 percent."""
    rng = np.random.default_rng(60)
    E = rng.standard_normal((30, 40)) / math.sqrt(20)
    estimate, exact = projection_distortion(E, kappa, 100_000, 1e-8, rng)
    assert estimate == pytest.approx(exact, rel=0.02)


def _tdc_spectrum(shared_shots):
    config = SystemConfig(K=1000, N=200, L=2000, Gamma=1000, Delta=500, T=5)
    topology = tessellated_topology(config)
    bank = draw_linear_bank(
        topology, config, np.random.default_rng(70), shared_shots=shared_shots
    )
    index = received_count(topology, config, 0)
    assert index.m_k == 500
    _, esd = user_gram_linear(linear_encoding_matrix(bank, index))
    return config, esd


@pytest.mark.slow
def test_tdc_gap_is_small_and_aliasing_widens_it():
    """Test disjoint balanced supports track the MP law and aliased shots do not."""
    config, tdc = _tdc_spectrum(False)
    law = MPLaw.for_config(config)
    assert law.lambda_prime == 0.5
    balanced = mp_gap(tdc, law, 0.3)
    assert abs(balanced.gap) <= 0.05

    _, aliased_esd = _tdc_spectrum(True)
    aliased = mp_gap(aliased_esd, law, 0.3)
    assert aliased.D_q == 0.0
    assert aliased.gap >= 0.0
    assert aliased.gap > abs(balanced.gap)
    assert aliased.gap <= aliased.envelope + 1e-8
    _, certificate = gap_lower_certificate(aliased_esd, law, 0.3, 0.1)
    assert 0.0 < certificate <= aliased.gap
