"""Budgeted assignment and link structures.

A topology pairs every server n with the coordinate set S_n it computes
(|S_n| <= Gamma) and the user set T_n it transmits to (|T_n| <= Delta).
Indices are 0-based in memory and 1-based in every file.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .exceptions import (
    BudgetViolationError,
    ConfigurationError,
    UnknownUserError,
)
from .generators.subsets import subset_indicator, uniform_subsets
from .types import PositiveInt, normalize_index_set

logger = logging.getLogger(__name__)

SetFamily = Tuple[Tuple[int, ...], ...]


class SystemConfig(BaseModel):
    """System dimensions and per-server budgets."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    K: PositiveInt
    N: PositiveInt
    L: PositiveInt
    Gamma: PositiveInt
    Delta: PositiveInt
    T: PositiveInt
    per_shot_links: bool = False

    @model_validator(mode="after")
    def _check_budgets(self) -> "SystemConfig":
        if self.Gamma > self.L:
            raise ValueError(f"Gamma={self.Gamma} exceeds L={self.L}")
        if self.Delta > self.K:
            raise ValueError(f"Delta={self.Delta} exceeds K={self.K}")
        return self

    @property
    def gamma(self) -> float:
        """Replication fraction Gamma / L."""
        return self.Gamma / self.L

    @property
    def delta(self) -> float:
        """Fan-out fraction Delta / K."""
        return self.Delta / self.K

    @property
    def lambda_prime(self) -> float:
        """Marchenko-Pastur aspect ratio Delta / Gamma."""
        return self.Delta / self.Gamma

    @property
    def expected_degree(self) -> float:
        """Expected number of servers linked to a user, N * delta."""
        return self.N * self.delta

    @property
    def expected_received(self) -> float:
        """Expected received-feature count T * N * delta."""
        return self.T * self.N * self.delta

    @property
    def m_eff(self) -> float:
        """Kept spectral fraction min(1, T * gamma * N / K)."""
        return min(1.0, self.T * self.gamma * self.N / self.K)

    @property
    def kappa(self) -> float:
        """Discarded spectral fraction 1 - m_eff."""
        return 1.0 - self.m_eff


def _normalize_family(family: Iterable[Iterable[int]]) -> SetFamily:
    return tuple(normalize_index_set(s) for s in family)


@dataclass(frozen=True)
class Topology:
    """Realized assignment sets and link sets.

    ``shot_links[n][t]`` is set only for the per-shot link variant; otherwise
    links are shared by all shots of a server.
    """

    assignment: SetFamily
    links: SetFamily
    shot_links: Optional[Tuple[SetFamily, ...]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "assignment", _normalize_family(self.assignment))
        object.__setattr__(self, "links", _normalize_family(self.links))
        if self.shot_links is not None:
            object.__setattr__(
                self,
                "shot_links",
                tuple(_normalize_family(per_server) for per_server in self.shot_links),
            )
        if len(self.assignment) != len(self.links):
            raise ConfigurationError(
                f"{len(self.assignment)} assignment sets but {len(self.links)} "
                "link sets"
            )
        if self.shot_links is not None and len(self.shot_links) != len(self.links):
            raise ConfigurationError("per-shot links must cover every server")

    @property
    def num_servers(self) -> int:
        return len(self.assignment)

    @property
    def shot_agnostic(self) -> bool:
        """Whether links are identical across shots."""
        return self.shot_links is None

    def links_at(self, server: int, shot: int) -> Tuple[int, ...]:
        """User set reached by ``server`` at ``shot``."""
        if self.shot_links is None:
            return self.links[server]
        return self.shot_links[server][shot]

    def check_budgets(self, config: SystemConfig) -> None:
        """Raise if any set exceeds its budget or leaves the id range."""
        if self.num_servers != config.N:
            raise ConfigurationError(
                f"topology has {self.num_servers} servers, config has N={config.N}"
            )
        for n, coords in enumerate(self.assignment):
            if len(coords) > config.Gamma:
                raise BudgetViolationError("assignment", n, len(coords), config.Gamma)
            if coords and coords[-1] >= config.L:
                raise ConfigurationError(
                    f"server {n + 1} computes coordinate {coords[-1] + 1} > L"
                )
        for n in range(self.num_servers):
            shots = range(config.T) if self.shot_links is not None else [0]
            for t in shots:
                users = self.links_at(n, t)
                if len(users) > config.Delta:
                    raise BudgetViolationError("links", n, len(users), config.Delta)
                if users and users[-1] >= config.K:
                    raise ConfigurationError(
                        f"server {n + 1} links user {users[-1] + 1} > K"
                    )

    def assignment_matrix(self, num_coordinates: int) -> np.ndarray:
        """Boolean (N, L) incidence of computed coordinates."""
        matrix = np.zeros((self.num_servers, num_coordinates), dtype=bool)
        for n, coords in enumerate(self.assignment):
            matrix[n, list(coords)] = True
        return matrix

    def link_tensor(self, num_users: int, shots: int) -> np.ndarray:
        """Boolean (N, T, K) incidence of delivered shots."""
        tensor = np.zeros((self.num_servers, shots, num_users), dtype=bool)
        for n in range(self.num_servers):
            for t in range(shots):
                tensor[n, t, list(self.links_at(n, t))] = True
        return tensor

    @cached_property
    def fingerprint(self) -> str:
        """Stable text rendering used in report provenance."""
        parts = [",".join(map(str, s)) for s in self.assignment]
        parts += [",".join(map(str, s)) for s in self.links]
        return "|".join(parts)


def sample_assignment(config: SystemConfig, rng: np.random.Generator) -> SetFamily:
    """Draw S_n uniformly over size-Gamma subsets of [L], i.i.d. over n."""
    subsets = uniform_subsets(config.L, config.Gamma, config.N, rng)
    return tuple(tuple(int(i) for i in row) for row in subsets)


def sample_links(config: SystemConfig, rng: np.random.Generator) -> SetFamily:
    """Draw T_n uniformly over size-Delta subsets of [K], i.i.d. over n."""
    subsets = uniform_subsets(config.K, config.Delta, config.N, rng)
    return tuple(tuple(int(i) for i in row) for row in subsets)


def sample_shot_links(
    config: SystemConfig, rng: np.random.Generator
) -> Tuple[SetFamily, ...]:
    """Draw an independent link set for every (server, shot)."""
    subsets = uniform_subsets(config.K, config.Delta, config.N * config.T, rng)
    rows = [tuple(int(i) for i in row) for row in subsets]
    return tuple(
        tuple(rows[n * config.T : (n + 1) * config.T]) for n in range(config.N)
    )


def sample_topology(config: SystemConfig, rng: np.random.Generator) -> Topology:
    """Draw a full random topology: assignment first, then links."""
    assignment = sample_assignment(config, rng)
    links = sample_links(config, rng)
    shot_links = sample_shot_links(config, rng) if config.per_shot_links else None
    return Topology(assignment=assignment, links=links, shot_links=shot_links)


def tessellated_topology(config: SystemConfig) -> Topology:
    """Disjoint, balanced supports.

    Coordinates split into L / Gamma contiguous blocks; server n computes block
    n mod B. Users split into B equal groups, and the servers of block g link
    Delta users of group g in round-robin order.
    """
    if config.L % config.Gamma:
        raise ConfigurationError(
            f"L={config.L} is not a multiple of Gamma={config.Gamma}",
            "system.Gamma",
        )
    blocks = config.L // config.Gamma
    if config.K % blocks:
        raise ConfigurationError(
            f"K={config.K} cannot be split into {blocks} equal user groups",
            "system.K",
        )
    group_size = config.K // blocks
    if config.Delta > group_size:
        raise ConfigurationError(
            f"Delta={config.Delta} exceeds the user group size {group_size}",
            "system.Delta",
        )
    assignment: List[Tuple[int, ...]] = []
    links: List[Tuple[int, ...]] = []
    for n in range(config.N):
        block, rank = n % blocks, n // blocks
        start = block * config.Gamma
        assignment.append(tuple(range(start, start + config.Gamma)))
        offset = (rank * config.Delta) % group_size
        links.append(
            tuple(
                block * group_size + (offset + j) % group_size
                for j in range(config.Delta)
            )
        )
    return Topology(assignment=tuple(assignment), links=tuple(links))


@dataclass(frozen=True)
class ReceivedIndex:
    """The (server, shot) pairs delivered to one user, sorted by (n, t)."""

    user: int
    pairs: Tuple[Tuple[int, int], ...]

    @property
    def m_k(self) -> int:
        return len(self.pairs)

    @property
    def servers(self) -> Tuple[int, ...]:
        """Distinct servers reaching the user."""
        return tuple(sorted({n for n, _ in self.pairs}))


def received_count(
    topology: Topology, config: SystemConfig, user: int
) -> ReceivedIndex:
    """Received-feature index of ``user``; its length is m_k."""
    if not 0 <= user < config.K:
        raise UnknownUserError(user, config.K)
    pairs = [
        (n, t)
        for n in range(topology.num_servers)
        for t in range(config.T)
        if user in topology.links_at(n, t)
    ]
    return ReceivedIndex(user=user, pairs=tuple(pairs))


def received_indices(
    topology: Topology, config: SystemConfig
) -> Tuple[ReceivedIndex, ...]:
    """Received-feature indices of every user."""
    return tuple(received_count(topology, config, k) for k in range(config.K))


@dataclass(frozen=True)
class CoverageResult:
    """Coverage of one user's essential coordinates."""

    user: int
    covered: bool
    missed: Tuple[int, ...]


def coverage_matrix(topology: Topology, config: SystemConfig) -> np.ndarray:
    """Boolean (K, L): coordinate l is computed by a server that reaches user k."""
    delivered = topology.link_tensor(config.K, config.T).any(axis=1)
    computed = topology.assignment_matrix(config.L)
    return (delivered.T.astype(np.int64) @ computed.astype(np.int64)) > 0


def check_coverage(
    topology: Topology,
    essential_sets: Sequence[Iterable[int]],
    config: Optional[SystemConfig] = None,
) -> Tuple[CoverageResult, ...]:
    """Flag users whose essential coordinates are not all computed and delivered.

    Coordinate l is covered for user k iff some server both computes l and
    links to k (in at least one shot).
    """
    shots = config.T if config is not None else 1
    reached: List[set] = [set() for _ in essential_sets]
    for n, coords in enumerate(topology.assignment):
        users = set()
        for t in range(shots):
            users.update(topology.links_at(n, t))
        for k in users:
            if k < len(reached):
                reached[k].update(coords)
    results = []
    for k, essential in enumerate(essential_sets):
        missed = tuple(sorted(set(essential) - reached[k]))
        results.append(CoverageResult(user=k, covered=not missed, missed=missed))
        if missed:
            logger.debug("user %d misses coordinates %s", k + 1, missed)
    return tuple(results)


def coordinate_miss_probability(config: SystemConfig) -> float:
    """Probability that a fixed coordinate never reaches a fixed user.

    (1 - gamma * delta)^N for shot-agnostic links; with per-shot links a server
    reaches the user with probability 1 - (1 - delta)^T.
    """
    if config.per_shot_links:
        reach = 1.0 - (1.0 - config.delta) ** config.T
    else:
        reach = config.delta
    return (1.0 - config.gamma * reach) ** config.N


def estimate_miss_frequency(
    config: SystemConfig,
    essential_sets: Sequence[Iterable[int]],
    n_draws: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Per-draw miss counts over ``n_draws`` random topologies.

    Returns an (n_draws, K) boolean array: user k misses at least one
    essential coordinate in draw i.
    """
    essential = [np.asarray(sorted(set(s)), dtype=np.int64) for s in essential_sets]
    misses = np.zeros((n_draws, config.K), dtype=bool)
    for i in range(n_draws):
        computed = subset_indicator(
            uniform_subsets(config.L, config.Gamma, config.N, rng), config.L
        )
        if config.per_shot_links:
            shot_sets = uniform_subsets(config.K, config.Delta, config.N * config.T, rng)
            delivered = (
                subset_indicator(shot_sets, config.K)
                .reshape(config.N, config.T, config.K)
                .any(axis=1)
            )
        else:
            delivered = subset_indicator(
                uniform_subsets(config.K, config.Delta, config.N, rng), config.K
            )
        covered = (delivered.T.astype(np.int64) @ computed.astype(np.int64)) > 0
        for k, coords in enumerate(essential):
            if coords.size:
                misses[i, k] = not covered[k, coords].all()
    return misses


def degree_samples(
    config: SystemConfig, n_draws: int, rng: np.random.Generator
) -> np.ndarray:
    """Received counts m_k over ``n_draws`` random link draws, shape (n_draws, K)."""
    counts = np.zeros((n_draws, config.K), dtype=np.int64)
    for i in range(n_draws):
        if config.per_shot_links:
            sets = uniform_subsets(config.K, config.Delta, config.N * config.T, rng)
            counts[i] = subset_indicator(sets, config.K).sum(axis=0)
        else:
            sets = uniform_subsets(config.K, config.Delta, config.N, rng)
            counts[i] = config.T * subset_indicator(sets, config.K).sum(axis=0)
    return counts


def degree_shortfall_fraction(
    config: SystemConfig, epsilon: float, n_draws: int, rng: np.random.Generator
) -> float:
    """Fraction of (draw, user) pairs with m_k < (1 - epsilon) T N delta."""
    counts = degree_samples(config, n_draws, rng)
    threshold = (1.0 - epsilon) * config.expected_received
    return float(np.mean(counts < threshold))


# --- file format -----------------------------------------------------------

_HEADER_KEYS = ("K", "N", "L", "Gamma", "Delta", "T")


def format_topology(config: SystemConfig, topology: Topology) -> str:
    """Render a topology in the line-oriented file format (1-based ids)."""
    lines = [f"{key} = {getattr(config, key)}" for key in _HEADER_KEYS]
    if config.per_shot_links:
        lines.append("per_shot_links = true")
    for n, coords in enumerate(topology.assignment):
        lines.append(" ".join(["S", str(n + 1), *(str(c + 1) for c in coords)]))
    for n in range(topology.num_servers):
        if topology.shot_links is None:
            users = topology.links[n]
            lines.append(" ".join(["T", str(n + 1), *(str(k + 1) for k in users)]))
        else:
            for t, users in enumerate(topology.shot_links[n]):
                label = f"{n + 1}@{t + 1}"
                lines.append(" ".join(["T", label, *(str(k + 1) for k in users)]))
    return "\n".join(lines) + "\n"


def _parse_int(token: str, line_number: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise ConfigurationError(
            f"line {line_number}: expected an integer, got {token!r}"
        ) from None


def parse_topology(text: str) -> Tuple[SystemConfig, Topology]:
    """Parse the topology file format.

    Sets may be smaller than the budgets; larger sets raise
    ``BudgetViolationError`` naming the offending line. Link lines must use
    the ``n@t`` form exactly when ``per_shot_links`` is set, once per key.
    """
    header: Dict[str, Union[int, bool]] = {}
    assignment: Dict[int, Tuple[int, Tuple[int, ...]]] = {}
    links: Dict[Tuple[int, int], Tuple[int, Tuple[int, ...]]] = {}

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, value = (part.strip() for part in line.split("=", 1))
            if key == "per_shot_links":
                header[key] = value.lower() in ("1", "true", "yes")
            elif key in _HEADER_KEYS:
                header[key] = _parse_int(value, line_number)
            else:
                raise ConfigurationError(f"line {line_number}: unknown key {key!r}")
            continue
        tokens = line.split()
        if tokens[0] not in ("S", "T") or len(tokens) < 2:
            raise ConfigurationError(
                f"line {line_number}: expected 'S <n> <ids...>' or 'T <n> <ids...>'"
            )
        ids = tuple(_parse_int(tok, line_number) - 1 for tok in tokens[2:])
        if tokens[0] == "S":
            server = _parse_int(tokens[1], line_number) - 1
            if server in assignment:
                raise ConfigurationError(
                    f"line {line_number}: duplicate S line for server {server + 1}"
                )
            assignment[server] = (line_number, ids)
        else:
            server_token, _, shot_token = tokens[1].partition("@")
            server = _parse_int(server_token, line_number) - 1
            shot = _parse_int(shot_token, line_number) - 1 if shot_token else -1
            if shot_token and shot < 0:
                raise ConfigurationError(f"line {line_number}: shot ids start at 1")
            if (server, shot) in links:
                raise ConfigurationError(
                    f"line {line_number}: duplicate T line for {tokens[1]}"
                )
            links[(server, shot)] = (line_number, ids)

    missing = [key for key in _HEADER_KEYS if key not in header]
    if missing:
        raise ConfigurationError(f"missing header keys: {', '.join(missing)}")
    try:
        config = SystemConfig(**header)  # type: ignore[arg-type]
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc

    def _checked(
        kind: str, server: int, entry: Tuple[int, Tuple[int, ...]], upper: int
    ) -> Tuple[int, ...]:
        line_number, ids = entry
        if not 0 <= server < config.N:
            raise ConfigurationError(
                f"line {line_number}: server {server + 1} outside 1..{config.N}"
            )
        unique = tuple(sorted(set(ids)))
        if unique and (unique[0] < 0 or unique[-1] >= upper):
            raise ConfigurationError(
                f"line {line_number}: id outside 1..{upper} for server {server + 1}"
            )
        budget = config.Gamma if kind == "assignment" else config.Delta
        if len(unique) > budget:
            raise BudgetViolationError(kind, server, len(unique), budget, line_number)
        return unique

    sets_s = [
        _checked("assignment", n, assignment[n], config.L) if n in assignment else ()
        for n in range(config.N)
    ]
    for (server, shot), entry in links.items():
        line_number = entry[0]
        if config.per_shot_links and shot < 0:
            raise ConfigurationError(
                f"line {line_number}: per_shot_links needs 'T <n>@<t>' lines"
            )
        if not config.per_shot_links and shot >= 0:
            raise ConfigurationError(
                f"line {line_number}: 'T <n>@<t>' lines need per_shot_links = true"
            )
        if shot >= config.T:
            raise ConfigurationError(
                f"line {line_number}: shot {shot + 1} outside 1..{config.T}"
            )
        _checked("links", server, entry, config.K)

    if config.per_shot_links:
        shot_links = tuple(
            tuple(
                links[(n, t)][1] if (n, t) in links else () for t in range(config.T)
            )
            for n in range(config.N)
        )
        base = tuple(shots[0] for shots in shot_links)
        topology = Topology(assignment=tuple(sets_s), links=base, shot_links=shot_links)
    else:
        sets_t = tuple(links[(n, -1)][1] if (n, -1) in links else () for n in range(config.N))
        topology = Topology(assignment=tuple(sets_s), links=sets_t)
    return config, topology


def load_topology(path: Union[str, Path]) -> Tuple[SystemConfig, Topology]:
    """Read a topology file."""
    return parse_topology(Path(path).read_text(encoding="utf-8"))


def save_topology(
    path: Union[str, Path], config: SystemConfig, topology: Topology
) -> None:
    """Write a topology file."""
    topology.check_budgets(config)
    Path(path).write_text(format_topology(config, topology), encoding="utf-8")


def expected_miss_bound(config: SystemConfig, r: float) -> float:
    """Union bound r * exp(-gamma N delta) on the per-user miss probability."""
    return r * math.exp(-config.gamma * config.N * config.delta)
