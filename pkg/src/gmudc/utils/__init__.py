"""Utility functions for gmudc."""

from .seeding import derive_seed, make_rng, stage_key

__all__ = ["derive_seed", "make_rng", "stage_key"]
