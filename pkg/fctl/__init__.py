"""fctl: feature corrective transfer learning with a structural discrepancy loss."""

__version__ = "0.1.0"

from fctl.core import (
    ConfigurationError,
    DomainError,
    FctlError,
    FctlSettings,
    FeatureMap,
    FeaturePyramid,
    GradientCheckError,
    ImageFormatError,
    ImageRGB,
    InvalidDimsError,
    ShapeError,
    TensorFormatError,
)
from fctl.degrade import DegradeKind, DegradeSpec, degrade_image
from fctl.loss import EansdlParams, LossBreakdown, eansdl, eansdl_backward, eansdl_pyramid, sobel_filter
from fctl.net import ToyNetParams, init_params
from fctl.training import TrainConfig, run_experiment, train_baseline, train_fctl, train_ideal

__all__ = [
    "__version__",
    "ConfigurationError",
    "DegradeKind",
    "DegradeSpec",
    "DomainError",
    "EansdlParams",
    "FctlError",
    "FctlSettings",
    "FeatureMap",
    "FeaturePyramid",
    "GradientCheckError",
    "ImageFormatError",
    "ImageRGB",
    "InvalidDimsError",
    "LossBreakdown",
    "ShapeError",
    "TensorFormatError",
    "ToyNetParams",
    "TrainConfig",
    "degrade_image",
    "eansdl",
    "eansdl_backward",
    "eansdl_pyramid",
    "init_params",
    "run_experiment",
    "sobel_filter",
    "train_baseline",
    "train_fctl",
    "train_ideal",
]
