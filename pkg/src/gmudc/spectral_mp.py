"""Gram spectra, quantile integrals and the Marchenko-Pastur benchmark.

Quantile functions here are lower-tail: Q(u) is the eigenvalue at rank
floor(u m) from the bottom, so integrals of Q from 0 measure the spectral mass
a truncation discards.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, linalg, optimize

from .config import get_eigen_floor
from .decoder import fit_ridge
from .encoder import LinearBank
from .exceptions import InvalidParameterError
from .topology import ReceivedIndex, SystemConfig

logger = logging.getLogger(__name__)

_QUAD_OPTIONS = {"epsabs": 1e-12, "epsrel": 1e-12, "limit": 200}


def _check_kappa(kappa: float) -> None:
    if not 0.0 <= kappa <= 1.0:
        raise InvalidParameterError("kappa", kappa, "must lie in [0, 1]")


def discard_count(kappa: float, m: int) -> int:
    """q = ceil(kappa m), robust to float noise in kappa m."""
    _check_kappa(kappa)
    return min(m, math.ceil(round(kappa * m, 9)))


@dataclass(frozen=True)
class ESD:
    """Empirical spectral distribution of an m x m Gram matrix."""

    eigenvalues: np.ndarray

    def __post_init__(self) -> None:
        values = np.sort(np.asarray(self.eigenvalues, dtype=float))[::-1]
        values = np.where(values < get_eigen_floor(), 0.0, values)
        values.setflags(write=False)
        object.__setattr__(self, "eigenvalues", values)

    @property
    def m(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def ascending(self) -> np.ndarray:
        return self.eigenvalues[::-1]

    def quantile(self, u: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """Q(u) = xi_(m - floor(u m)) in descending order."""
        grid = np.asarray(u, dtype=float)
        if np.any((grid < 0) | (grid > 1)):
            raise InvalidParameterError("u", u, "must lie in [0, 1]")
        ranks = np.minimum(np.floor(grid * self.m).astype(np.int64), self.m - 1)
        values = self.ascending[ranks]
        return float(values) if values.ndim == 0 else values


def esd_from_gram(G: np.ndarray) -> ESD:
    return ESD(eigenvalues=linalg.eigh(np.asarray(G, dtype=float), eigvals_only=True))


def linear_encoding_matrix(bank: LinearBank, received: ReceivedIndex) -> np.ndarray:
    """E_k: rows of the linear-limit encoder delivered to a user."""
    return bank.user_matrix(received)


def user_gram_linear(E: np.ndarray) -> Tuple[np.ndarray, ESD]:
    """Population Gram G_k = E_k E_k^T under isotropic inputs, and its ESD."""
    matrix = np.asarray(E, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise InvalidParameterError(
            "E_k", matrix.shape, "needs at least one received row"
        )
    G = matrix @ matrix.T
    return G, esd_from_gram(G)


def smallest_eigen_sum(esd: ESD, q: int) -> float:
    """Sum of the q smallest eigenvalues."""
    if not 0 <= q <= esd.m:
        raise InvalidParameterError("q", q, f"must lie in 0..{esd.m}")
    return float(np.sum(esd.ascending[:q]))


def quantile_integral(esd: ESD, kappa: float) -> float:
    """Exact integral of Q over [0, kappa].

    Q is a step function, so the integral is piecewise linear in kappa and
    equals (1/m) times the sum of the kappa m smallest eigenvalues whenever
    kappa m is an integer.
    """
    _check_kappa(kappa)
    position = kappa * esd.m
    whole = min(int(math.floor(round(position, 9))), esd.m)
    total = float(np.sum(esd.ascending[:whole]))
    if whole < esd.m:
        total += (position - whole) * float(esd.ascending[whole])
    return total / esd.m


def esd_cdf(esd: ESD, t: float) -> float:
    """Fraction of eigenvalues <= t."""
    return float(np.count_nonzero(esd.eigenvalues <= t)) / esd.m


def truncated_moment(esd: ESD, t: float) -> float:
    """(1/m) sum of eigenvalues <= t."""
    values = esd.eigenvalues
    return float(np.sum(values[values <= t])) / esd.m


def quenched_distortion(
    esd: ESD, config: SystemConfig, kappa: Optional[float] = None
) -> float:
    """D = (1/L) times the sum of the ceil(kappa m) smallest eigenvalues.

    ``kappa`` defaults to the discarded fraction 1 - min(1, T gamma N / K).
    """
    kappa = config.kappa if kappa is None else kappa
    return smallest_eigen_sum(esd, discard_count(kappa, esd.m)) / config.L


@dataclass(frozen=True)
class MPLaw:
    """Marchenko-Pastur law with aspect ratio lambda' and unit mean."""

    lambda_prime: float

    def __post_init__(self) -> None:
        if not self.lambda_prime > 0:
            raise InvalidParameterError(
                "lambda_prime", self.lambda_prime, "must be positive"
            )

    @property
    def r(self) -> float:
        return (1.0 - math.sqrt(self.lambda_prime)) ** 2

    @property
    def b(self) -> float:
        return (1.0 + math.sqrt(self.lambda_prime)) ** 2

    @property
    def zero_atom(self) -> float:
        return max(0.0, 1.0 - 1.0 / self.lambda_prime)

    @classmethod
    def for_config(cls, config: SystemConfig) -> "MPLaw":
        return cls(lambda_prime=config.lambda_prime)

    def _angle(self, t: float) -> float:
        """theta with r + (b - r) sin^2(theta) = t, for t in [r, b]."""
        ratio = (t - self.r) / (self.b - self.r)
        return math.asin(math.sqrt(min(max(ratio, 0.0), 1.0)))

    def _point(self, theta: float) -> float:
        return self.r + (self.b - self.r) * math.sin(theta) ** 2

    def _density_weight(self, theta: float) -> float:
        s, c = math.sin(theta), math.cos(theta)
        width = self.b - self.r
        x = self._point(theta)
        if x <= 0.0:
            # r = 0: s^2 / x = 1 / width in the limit
            return width * c * c / (math.pi * self.lambda_prime)
        return width * width * s * s * c * c / (math.pi * self.lambda_prime * x)

    def _moment_weight(self, theta: float) -> float:
        s, c = math.sin(theta), math.cos(theta)
        width = self.b - self.r
        return width * width * s * s * c * c / (math.pi * self.lambda_prime)

    def continuous_mass(self, theta: float) -> float:
        value, _ = integrate.quad(self._density_weight, 0.0, theta, **_QUAD_OPTIONS)
        return value


def mp_pdf(law: MPLaw, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Density sqrt((b - x)(x - r)) / (2 pi lambda' x) on (r, b); 0 elsewhere."""
    points = np.asarray(x, dtype=float)
    inside = (points > law.r) & (points < law.b) & (points > 0)
    safe = np.where(inside, points, 1.0)
    density = np.sqrt(np.clip((law.b - safe) * (safe - law.r), 0.0, None)) / (
        2.0 * np.pi * law.lambda_prime * safe
    )
    density = np.where(inside, density, 0.0)
    return float(density) if density.ndim == 0 else density


def mp_cdf(law: MPLaw, t: float) -> float:
    """F(t): the atom at 0 (for lambda' > 1) plus the continuous part up to t."""
    if t < 0:
        return 0.0
    if t >= law.b:
        return 1.0
    if t <= law.r:
        return law.zero_atom
    return law.zero_atom + law.continuous_mass(law._angle(t))


def mp_threshold(law: MPLaw, kappa: float) -> float:
    """t with F(t) = kappa; 0 when the atom at 0 already covers kappa."""
    _check_kappa(kappa)
    if kappa >= 1.0:
        return law.b
    if kappa <= law.zero_atom:
        return 0.0 if law.zero_atom > 0 else law.r
    target = kappa - law.zero_atom
    theta = optimize.brentq(
        lambda angle: law.continuous_mass(angle) - target,
        0.0,
        math.pi / 2.0,
        xtol=1e-14,
        rtol=1e-14,
    )
    return law._point(theta)


def mp_truncated_moment(law: MPLaw, kappa: float) -> float:
    """Phi(kappa): integral of x dMP below the kappa-threshold."""
    _check_kappa(kappa)
    if kappa <= law.zero_atom:
        return 0.0
    theta = math.pi / 2.0 if kappa >= 1.0 else law._angle(mp_threshold(law, kappa))
    value, _ = integrate.quad(law._moment_weight, 0.0, theta, **_QUAD_OPTIONS)
    return value


@dataclass(frozen=True)
class GapReport:
    """Benchmark moment against the empirical lower-tail integral at kappa."""

    kappa: float
    m_eff: float
    D_q: float
    Phi_MP: float
    gap: float
    envelope: float


def mp_gap(
    esd: ESD, law: MPLaw, kappa: float, m_eff: Optional[float] = None
) -> GapReport:
    """Signed gap Phi_MP(kappa) - integral of Q over [0, kappa]; envelope b kappa."""
    d_q = quantile_integral(esd, kappa)
    phi = mp_truncated_moment(law, kappa)
    return GapReport(
        kappa=kappa,
        m_eff=1.0 - kappa if m_eff is None else m_eff,
        D_q=d_q,
        Phi_MP=phi,
        gap=phi - d_q,
        envelope=law.b * kappa,
    )


def gap_lower_certificate(
    esd: ESD, law: MPLaw, kappa: float, alpha: float
) -> Tuple[float, float]:
    """Measure eta of {u <= kappa : Q_MP(u) - Q(u) >= alpha}, and alpha * eta.

    On the i-th empirical step [i/m, (i+1)/m) the set is the part above
    F_MP(xi_i + alpha), so eta is exact.
    """
    _check_kappa(kappa)
    if alpha <= 0:
        raise InvalidParameterError("alpha", alpha, "must be positive")
    m = esd.m
    eta = 0.0
    for i, value in enumerate(esd.ascending):
        lower, upper = i / m, min((i + 1) / m, kappa)
        if lower >= kappa:
            break
        start = max(lower, mp_cdf(law, float(value) + alpha))
        eta += max(0.0, upper - start)
    return eta, alpha * eta


def kappa_grid(kappa_max: float, sizes: Sequence[int], points: int = 64) -> np.ndarray:
    """``points`` even steps on [0, kappa_max] plus every breakpoint j/m inside."""
    _check_kappa(kappa_max)
    grid = set(np.linspace(0.0, kappa_max, points).round(15).tolist())
    for m in set(sizes):
        if m > 0:
            steps = np.arange(0, math.floor(kappa_max * m + 1e-9) + 1) / m
            grid.update(steps.round(15).tolist())
    return np.array(sorted(grid))


def projection_distortion(
    E: np.ndarray,
    kappa: float,
    M: int,
    lam: float,
    rng: np.random.Generator,
    n_test: int = 20_000,
) -> Tuple[float, float]:
    """Estimated and exact distortion of the kept-direction linear scheme.

    Keeps the top m - ceil(kappa m) eigendirections of G = E E^T, fits a ridge
    decoder for every component of Phi = E w on those kept features with M
    isotropic training samples, and measures the test risk over L. The exact
    value is the sum of the discarded eigenvalues over L.
    """
    matrix = np.asarray(E, dtype=float)
    m, L = matrix.shape
    G, esd = user_gram_linear(matrix)
    q = discard_count(kappa, m)
    _, vectors = linalg.eigh(G)
    kept = vectors[:, q:]

    train = rng.standard_normal((M, L))
    phi_train = train @ matrix.T
    model = fit_ridge(phi_train @ kept, phi_train, lam)

    test = rng.standard_normal((n_test, L))
    phi_test = test @ matrix.T
    residual = phi_test - (phi_test @ kept) @ model.beta
    estimate = float(np.mean(np.sum(residual**2, axis=1))) / L
    exact = smallest_eigen_sum(esd, q) / L
    logger.debug("projection distortion %.6g (exact %.6g)", estimate, exact)
    return estimate, exact
