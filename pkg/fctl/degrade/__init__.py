"""Seeded synthesizers of non-ideal images."""

from fctl.degrade.rng import Rng, derive_seed
from fctl.degrade.transforms import (
    DegradeConstants,
    DegradeKind,
    DegradeSpec,
    apply_bayer,
    apply_dark,
    apply_fog,
    apply_rain,
    degrade_image,
    intensity_levels,
)

__all__ = [
    "DegradeConstants",
    "DegradeKind",
    "DegradeSpec",
    "Rng",
    "apply_bayer",
    "apply_dark",
    "apply_fog",
    "apply_rain",
    "degrade_image",
    "derive_seed",
    "intensity_levels",
]
