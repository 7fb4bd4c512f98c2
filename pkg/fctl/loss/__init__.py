"""Sobel gradient fields and the EANSDL feature-similarity loss."""

from fctl.loss.eansdl import (
    EansdlParams,
    LossBreakdown,
    attenuation,
    eansdl,
    eansdl_backward,
    eansdl_pyramid,
    eansdl_pyramid_backward,
    extended_consistency,
    level_radius,
    local_discrepancy,
    weighted_local,
)
from fctl.loss.gradcheck import finite_diff_grad, gradient_check
from fctl.loss.sobel import GradientField, sobel_filter, sobel_transpose

__all__ = [
    "EansdlParams",
    "GradientField",
    "LossBreakdown",
    "attenuation",
    "eansdl",
    "eansdl_backward",
    "eansdl_pyramid",
    "eansdl_pyramid_backward",
    "extended_consistency",
    "finite_diff_grad",
    "gradient_check",
    "level_radius",
    "local_discrepancy",
    "sobel_filter",
    "sobel_transpose",
    "weighted_local",
]
