"""Annotated field types shared by the gmudc specs."""

from typing import Annotated, Tuple

from pydantic import AfterValidator, Field

PositiveInt = Annotated[int, Field(gt=0)]
NonNegativeInt = Annotated[int, Field(ge=0)]
PositiveFloat = Annotated[float, Field(gt=0)]
NonNegativeFloat = Annotated[float, Field(ge=0)]
OpenUnitFloat = Annotated[float, Field(gt=0, lt=1)]
UnitFloat = Annotated[float, Field(ge=0, le=1)]


def _sorted_unique(values: Tuple[int, ...]) -> Tuple[int, ...]:
    if any(v < 0 for v in values):
        raise ValueError("indices must be non-negative")
    return tuple(sorted(set(values)))


IndexSet = Annotated[Tuple[int, ...], AfterValidator(_sorted_unique)]
"""A sorted, duplicate-free tuple of 0-based indices."""
