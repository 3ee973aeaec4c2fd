"""Shared field types and validators for gmudc."""

from .constraints import (
    IndexSet,
    NonNegativeFloat,
    NonNegativeInt,
    OpenUnitFloat,
    PositiveFloat,
    PositiveInt,
    UnitFloat,
)
from .handlers import as_batch, as_vector, normalize_index_set

__all__ = [
    "IndexSet",
    "NonNegativeFloat",
    "NonNegativeInt",
    "OpenUnitFloat",
    "PositiveFloat",
    "PositiveInt",
    "UnitFloat",
    "as_batch",
    "as_vector",
    "normalize_index_set",
]
