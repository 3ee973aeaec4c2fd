"""Counter-based seed derivation.

Every random stream in an experiment is addressed by the master seed plus a
tuple of keys such as ``("bank", trial)``. The same address always yields the
same stream, whichever thread or order requests it.
"""

import hashlib
from typing import Tuple, Union

import numpy as np

SeedKey = Union[int, str]


def stage_key(label: str) -> int:
    """Map a stage label to a stable 32-bit integer."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "big")


def _normalize_keys(keys: Tuple[SeedKey, ...]) -> Tuple[int, ...]:
    normalized = []
    for key in keys:
        if isinstance(key, str):
            normalized.append(stage_key(key))
        elif key < 0:
            raise ValueError(f"Seed keys must be non-negative, got {key}")
        else:
            normalized.append(int(key))
    return tuple(normalized)


def derive_seed(master_seed: int, *keys: SeedKey) -> np.random.SeedSequence:
    """Build the seed sequence addressed by ``(master_seed, *keys)``."""
    return np.random.SeedSequence(
        entropy=master_seed, spawn_key=_normalize_keys(keys)
    )


def make_rng(master_seed: int, *keys: SeedKey) -> np.random.Generator:
    """Build an independent generator for ``(master_seed, *keys)``."""
    return np.random.default_rng(derive_seed(master_seed, *keys))
