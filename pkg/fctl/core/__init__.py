"""Core types, errors, settings and the degrader registry."""

from fctl.core.exceptions import (
    ConfigurationError,
    DomainError,
    FctlError,
    GradientCheckError,
    ImageFormatError,
    InvalidDimsError,
    ShapeError,
    TensorFormatError,
)
from fctl.core.settings import FctlSettings
from fctl.core.tensor import FeatureMap, FeaturePyramid, ImageRGB, new_feature_map

__all__ = [
    "ConfigurationError",
    "DomainError",
    "FctlError",
    "FctlSettings",
    "FeatureMap",
    "FeaturePyramid",
    "GradientCheckError",
    "ImageFormatError",
    "ImageRGB",
    "InvalidDimsError",
    "ShapeError",
    "TensorFormatError",
    "new_feature_map",
]
