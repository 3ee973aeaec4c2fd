from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np
import pytest

from gmudc import config
from gmudc.core import ExperimentSetup, RidgeSettings
from gmudc.kernels import KernelFamily, KernelSpec
from gmudc.tasks import InputLaw, SubfunctionBank, TargetFamily, TargetSpec
from gmudc.topology import SystemConfig


@pytest.fixture(autouse=True)
def reset_config():
    """Every test starts from the default runtime settings."""
    config.reset()
    yield
    config.reset()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def small_config() -> SystemConfig:
    return SystemConfig(K=4, N=6, L=5, Gamma=2, Delta=2, T=2)


@pytest.fixture
def gaussian_kernel() -> KernelSpec:
    return KernelSpec(family=KernelFamily.GAUSSIAN, bandwidth=1.0, dimension=4)


@pytest.fixture
def linear_setup() -> Callable[..., ExperimentSetup]:
    """Isotropic linear-kernel setup with identity targets for every user."""

    def build(
        config: SystemConfig,
        M: int = 2000,
        lam: float = 1e-8,
        sigma: float = 0.0,
        target: Optional[TargetSpec] = None,
    ) -> ExperimentSetup:
        spec = target or TargetSpec(family=TargetFamily.IDENTITY, dimension=config.L)
        return ExperimentSetup(
            config=config,
            kernel=KernelSpec(family=KernelFamily.LINEAR, dimension=config.L),
            bank=SubfunctionBank.isotropic(config.L),
            input_law=InputLaw(dim=config.L),
            targets=(spec,) * config.K,
            ridge=RidgeSettings(lam=lam),
            M=M,
            sigma=sigma,
        )

    return build


def _probe_pairs(dim: int) -> Tuple[np.ndarray, np.ndarray]:
    base = np.linspace(-0.5, 0.5, dim)
    steps = [0.0, 0.15, 0.3, 0.6, 1.2]
    u = np.array([base for _ in steps])
    v = np.array([base + s * np.ones(dim) for s in steps])
    return u, v


@pytest.fixture
def probe_pairs() -> Callable[[int], Tuple[np.ndarray, np.ndarray]]:
    """Five probe pairs whose displacement is spread equally over coordinates."""
    return _probe_pairs


QUENCHED_SCENARIO = """
[experiment]
seed = 3
trials = 2
n_test = 400
M = 300
sigma = 0.1

[system]
K = 3
N = 8
L = 4
Gamma = 2
Delta = 2
T = 1

[kernel]
family = "gaussian"
bandwidth = 1.5

[ridge]
lambda = 0.01

[[tasks]]
coefficients = [1.0, 0.0, -1.0, 0.0]
"""

MPGAP_SCENARIO = """
[experiment]
kind = "mp_gap"
seed = 5

[system]
K = 8
N = 16
L = 8
Gamma = 4
Delta = 4
T = 2

[kernel]
family = "linear"

[topology]
source = "tessellated"

[mp_gap]
kappa = 0.3

[[tasks]]
family = "identity"
"""


@pytest.fixture
def write_scenario(tmp_path) -> Callable[..., Path]:
    """Write scenario TOML text (with optional extra lines) to a temp file."""

    def write(text: str = QUENCHED_SCENARIO, extra: str = "", name: str = "scenario.toml") -> Path:
        path = tmp_path / name
        path.write_text(text + extra, encoding="utf-8")
        return path

    return write


@pytest.fixture
def quenched_text() -> str:
    return QUENCHED_SCENARIO


@pytest.fixture
def mpgap_text() -> str:
    return MPGAP_SCENARIO
