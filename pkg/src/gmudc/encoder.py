"""Server-side encoders.

Shift-invariant kernels use masked random Fourier features
z_{n,t}(x) = sqrt(2/gamma) cos(w~_{n,t} . w(x) + b_{n,t}), with w~ zero off the
server's coordinate set S_n. The linear kernel uses the linear-limit encoder
z_{n,t}(x) = e_{n,t} . w(x) with e_{n,t} supported on S_n.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import InvalidParameterError
from .generators.frequencies import sample_phases
from .generators.subsets import uniform_subsets
from .kernels import (
    KernelSpec,
    kernel_matrix,
    kernel_profile,
    sample_frequency,
    variance_proxy,
)
from .topology import ReceivedIndex, SystemConfig, Topology
from .types import as_batch, as_vector

logger = logging.getLogger(__name__)


class SamplingMode(str, Enum):
    """How a masked frequency is drawn.

    ``truncated`` draws from the full L-dimensional measure and zeroes the
    off-mask coordinates; ``masked_bochner`` draws from the |S|-dimensional
    measure of the restricted kernel and embeds it.
    """

    TRUNCATED = "truncated"
    MASKED_BOCHNER = "masked_bochner"


class LinearWeights(str, Enum):
    GAUSSIAN = "gaussian"
    INDICATOR = "indicator"


def _pair_arrays(received: ReceivedIndex) -> Tuple[np.ndarray, np.ndarray]:
    if not received.pairs:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    servers, shots = np.asarray(received.pairs, dtype=np.int64).T
    return servers, shots


@dataclass(frozen=True)
class FeatureBank:
    """Masked frequencies ``(N, T, L)`` and phases ``(N, T)`` of every server."""

    frequencies: np.ndarray
    phases: np.ndarray
    masks: Tuple[Tuple[int, ...], ...]
    mode: SamplingMode
    gamma: float
    kernel: KernelSpec

    @property
    def scale(self) -> float:
        return float(np.sqrt(2.0 / self.gamma))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.phases.shape  # type: ignore[return-value]

    def user_features(self, received: ReceivedIndex, w: np.ndarray) -> np.ndarray:
        """Features of ``received`` for a batch ``w`` of shape (M, L)."""
        servers, shots = _pair_arrays(received)
        if servers.size == 0:
            return np.zeros((w.shape[0], 0))
        freqs = self.frequencies[servers, shots]
        return self.scale * np.cos(w @ freqs.T + self.phases[servers, shots])


@dataclass(frozen=True)
class LinearBank:
    """Linear-limit rows e_{n,t} of shape ``(N, T, L)``, zero off S_n."""

    rows: np.ndarray
    masks: Tuple[Tuple[int, ...], ...]
    weights: LinearWeights
    shared_shots: bool

    def user_matrix(self, received: ReceivedIndex) -> np.ndarray:
        """E_k: the (m_k, L) stack of rows received by a user."""
        servers, shots = _pair_arrays(received)
        if servers.size == 0:
            return np.zeros((0, self.rows.shape[2]))
        return self.rows[servers, shots]

    def user_features(self, received: ReceivedIndex, w: np.ndarray) -> np.ndarray:
        return w @ self.user_matrix(received).T


Bank = Union[FeatureBank, LinearBank]


def draw_feature_bank(
    topology: Topology,
    config: SystemConfig,
    kernel_spec: KernelSpec,
    mode: SamplingMode,
    rng: np.random.Generator,
) -> FeatureBank:
    """Draw frequencies for every (n, t), then phases.

    Frequencies are independent across (n, t) and of the topology.
    Raises ``UnsupportedKernelError`` for the linear kernel.
    """
    n_servers, shots, dim = topology.num_servers, config.T, kernel_spec.dimension
    frequencies = np.zeros((n_servers, shots, dim))
    if mode is SamplingMode.TRUNCATED:
        full = sample_frequency(kernel_spec, rng, count=n_servers * shots)
        frequencies = full.reshape(n_servers, shots, dim)
        for n, coords in enumerate(topology.assignment):
            off_mask = np.setdiff1d(np.arange(dim), coords)
            frequencies[n, :, off_mask] = 0.0
    else:
        for n, coords in enumerate(topology.assignment):
            if not coords:
                continue
            restricted = sample_frequency(
                kernel_spec, rng, count=shots, dimension=len(coords)
            )
            frequencies[n][:, list(coords)] = restricted
    phases = sample_phases((n_servers, shots), rng)
    logger.debug(
        "drew %s feature bank: N=%d, T=%d, gamma=%.4g",
        mode.value,
        n_servers,
        shots,
        config.gamma,
    )
    return FeatureBank(
        frequencies=frequencies,
        phases=phases,
        masks=topology.assignment,
        mode=mode,
        gamma=config.gamma,
        kernel=kernel_spec,
    )


def draw_linear_bank(
    topology: Topology,
    config: SystemConfig,
    rng: np.random.Generator,
    weights: LinearWeights = LinearWeights.GAUSSIAN,
    shared_shots: bool = False,
) -> LinearBank:
    """Draw linear-limit rows on each server's coordinate set.

    Gaussian rows have i.i.d. N(0, 1/Gamma) entries on S_n; indicator rows are
    1/sqrt(Gamma) on S_n. With ``shared_shots`` every shot of a server repeats
    the same row.
    """
    n_servers, shots = topology.num_servers, config.T
    rows = np.zeros((n_servers, shots, config.L))
    draws = 1 if shared_shots else shots
    scale = 1.0 / np.sqrt(config.Gamma)
    for n, coords in enumerate(topology.assignment):
        if not coords:
            continue
        if weights is LinearWeights.GAUSSIAN:
            block = scale * rng.standard_normal((draws, len(coords)))
        else:
            block = np.full((draws, len(coords)), scale)
        rows[n][:, list(coords)] = block
    return LinearBank(
        rows=rows,
        masks=topology.assignment,
        weights=weights,
        shared_shots=shared_shots,
    )


def encode_batch(bank: FeatureBank, w: object) -> np.ndarray:
    """z_{n,t}(x) for a batch of subfunction outputs, shape (M, N, T)."""
    batch, _ = as_batch(w, bank.kernel.dimension, "subfunction vector")
    angles = np.einsum("ml,ntl->mnt", batch, bank.frequencies) + bank.phases
    return bank.scale * np.cos(angles)


def encode_sample(bank: FeatureBank, w: object) -> np.ndarray:
    """z_{n,t}(x) for one subfunction vector, shape (N, T)."""
    vector = as_vector(w, bank.kernel.dimension, "subfunction vector")
    return encode_batch(bank, vector)[0]


def user_feature_matrix(bank: Bank, received: ReceivedIndex, w: object) -> np.ndarray:
    """Phi_k for a batch of subfunction vectors, shape (M, m_k)."""
    dim = bank.kernel.dimension if isinstance(bank, FeatureBank) else bank.rows.shape[2]
    batch, _ = as_batch(w, dim, "subfunction vector")
    return bank.user_features(received, batch)


def user_feature_vector(bank: Bank, received: ReceivedIndex, w: object) -> np.ndarray:
    """Phi_k(x) in the received order; empty when m_k = 0."""
    return user_feature_matrix(bank, received, np.atleast_2d(w))[0]


def mc_kernel(bank: Bank, received: ReceivedIndex, w: object, w_prime: object) -> float:
    """K~_k(x, x') = Phi_k(x) . Phi_k(x') / m_k."""
    if received.m_k == 0:
        raise InvalidParameterError(
            "m_k", 0, f"user {received.user + 1} receives no features"
        )
    phi = user_feature_vector(bank, received, w)
    phi_prime = user_feature_vector(bank, received, w_prime)
    return float(phi @ phi_prime) / received.m_k


# --- single-atom diagnostics ----------------------------------------------


def _draw_atoms(
    spec: KernelSpec,
    mask_size: int,
    count: int,
    rng: np.random.Generator,
    mode: SamplingMode,
    mask: Optional[Sequence[int]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """``count`` masked frequencies (count, L) and phases (count,).

    Masks are uniform size-``mask_size`` subsets unless a fixed ``mask`` is
    given.
    """
    dim = spec.dimension
    if not 1 <= mask_size <= dim:
        raise InvalidParameterError("mask_size", mask_size, f"must lie in 1..{dim}")
    if mask is not None:
        if len(set(mask)) != mask_size:
            raise InvalidParameterError(
                "mask", tuple(mask), f"must hold exactly {mask_size} coordinates"
            )
        masks = np.tile(np.asarray(sorted(mask), dtype=np.int64), (count, 1))
    else:
        masks = uniform_subsets(dim, mask_size, count, rng)
    rows = np.repeat(np.arange(count), masks.shape[1])
    frequencies = np.zeros((count, dim))
    if mode is SamplingMode.TRUNCATED:
        full = sample_frequency(spec, rng, count=count)
        frequencies[rows, masks.ravel()] = full[rows, masks.ravel()]
    else:
        restricted = sample_frequency(spec, rng, count=count, dimension=masks.shape[1])
        frequencies[rows, masks.ravel()] = restricted.ravel()
    phases = sample_phases(count, rng)
    return frequencies, phases


def atom_products(
    spec: KernelSpec,
    mask_size: int,
    u: object,
    v: object,
    n_atoms: int,
    rng: np.random.Generator,
    mode: SamplingMode = SamplingMode.MASKED_BOCHNER,
    mask: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Single-atom products Z = z(u) z(v) over ``n_atoms`` fresh draws.

    E[Z] = K(u_S, v_S) / gamma with gamma = mask_size / L; at full masks, or
    when u - v lives inside a fixed mask, gamma * E[Z] = K(u, v).
    """
    u_vec = as_vector(u, spec.dimension, "probe u")
    v_vec = as_vector(v, spec.dimension, "probe v")
    frequencies, phases = _draw_atoms(spec, mask_size, n_atoms, rng, mode, mask)
    gamma = mask_size / spec.dimension
    scale = 2.0 / gamma
    return scale * np.cos(frequencies @ u_vec + phases) * np.cos(
        frequencies @ v_vec + phases
    )


def masked_kernel(spec: KernelSpec, u: object, v: object, mask: Sequence[int]) -> float:
    """K(u_S, v_S): the kernel restricted to the coordinates in ``mask``."""
    u_vec = as_vector(u, spec.dimension, "probe u")
    v_vec = as_vector(v, spec.dimension, "probe v")
    coords = sorted(set(mask))
    restricted = spec.with_dimension(len(coords))
    return float(kernel_matrix(restricted, u_vec[coords], v_vec[coords])[0, 0])


def mask_variance_bound(
    spec: KernelSpec, u: object, v: object, gamma: float, c_mask: float = 1.0
) -> float:
    """Single-atom variance bound 1/(2 gamma^2) + C_mask V_K(u, v) / gamma."""
    if not 0 < gamma <= 1:
        raise InvalidParameterError("gamma", gamma, "must lie in (0, 1]")
    return 1.0 / (2.0 * gamma**2) + c_mask * variance_proxy(spec, u, v) / gamma


def mask_averaged_kernel(
    spec: KernelSpec, u: object, v: object, mask_size: int
) -> np.ndarray:
    """E_S[K(u_S, v_S)] over uniform size-``mask_size`` masks, one value per pair.

    Both shift-invariant families factor over coordinates, so the average is
    the elementary symmetric polynomial of the per-coordinate factors over
    C(L, mask_size).
    """
    left, _ = as_batch(u, spec.dimension, "probe u")
    right, _ = as_batch(v, spec.dimension, "probe v")
    dim = spec.dimension
    if not 1 <= mask_size <= dim:
        raise InvalidParameterError("mask_size", mask_size, f"must lie in 1..{dim}")
    single = spec.with_dimension(1)
    h = left - right
    sums = np.zeros((h.shape[0], mask_size + 1))
    sums[:, 0] = 1.0
    for i in range(dim):
        factor = kernel_profile(single, h[:, [i]])
        sums[:, 1:] = sums[:, 1:] + factor[:, None] * sums[:, :-1]
    return sums[:, mask_size] / math.comb(dim, mask_size)


def kernel_mse(
    spec: KernelSpec,
    mask_size: int,
    m: int,
    u: object,
    v: object,
    rng: np.random.Generator,
    mode: SamplingMode = SamplingMode.MASKED_BOCHNER,
    replicates: int = 1,
) -> float:
    """Mean of (K~ - E[K~])^2 over probe pairs (u_i, v_i) and encoder draws.

    K~ averages ``m`` atoms shared by every pair. Each atom has mean
    E_S[K(u_S, v_S)] / gamma, which is K(u, v) only at gamma = 1, so the
    result is the variance part of the m-feature error and excludes the
    masking bias.
    """
    if m < 1:
        raise InvalidParameterError("m", m, "must be at least 1")
    left, _ = as_batch(u, spec.dimension, "probe u")
    right, _ = as_batch(v, spec.dimension, "probe v")
    if left.shape != right.shape:
        raise InvalidParameterError("v", right.shape, f"must match u {left.shape}")
    gamma = mask_size / spec.dimension
    reference = mask_averaged_kernel(spec, left, right, mask_size) / gamma
    scale = np.sqrt(2.0 / gamma)
    errors = np.empty(replicates)
    for r in range(replicates):
        frequencies, phases = _draw_atoms(spec, mask_size, m, rng, mode)
        phi_left = scale * np.cos(left @ frequencies.T + phases)
        phi_right = scale * np.cos(right @ frequencies.T + phases)
        approx = np.mean(phi_left * phi_right, axis=1)
        errors[r] = np.mean((approx - reference) ** 2)
    return float(np.mean(errors))


def kernel_error_bound(
    spec: KernelSpec,
    u: object,
    v: object,
    gamma: float,
    m: int,
    c_mask: float = 1.0,
) -> float:
    """Variance part of the m-feature kernel error: mean atom bound over m."""
    left, _ = as_batch(u, spec.dimension, "probe u")
    right, _ = as_batch(v, spec.dimension, "probe v")
    bounds = [
        mask_variance_bound(spec, a, b, gamma, c_mask) for a, b in zip(left, right)
    ]
    return float(np.mean(bounds)) / m
