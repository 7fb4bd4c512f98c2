"""Finite-difference oracle for the EANSDL gradient.

Central differences are only trustworthy where the loss is smooth. The loss
has kinks wherever an absolute-value argument or a gradient magnitude crosses
zero, so :func:`gradient_check` compares only elements whose stencil
perturbations leave every such sign unchanged.
"""

import logging
from dataclasses import dataclass

import numpy as np

from fctl.core.exceptions import DomainError, GradientCheckError
from fctl.core.tensor import FeatureMap, check_same_dims
from fctl.loss.eansdl import EansdlParams, eansdl_arrays, level_radius
from fctl.loss.sobel import magnitude_of, pad_edge, sobel_xy

logger = logging.getLogger(__name__)

# Elements whose gradient is below this fraction of the largest one are
# compared against that floor instead of their own size
RELATIVE_FLOOR = 1e-2


def finite_diff_grad(
    a: FeatureMap, b: FeatureMap, params: EansdlParams, level: int, eps: float = 1e-3
) -> FeatureMap:
    """Central-difference gradient of ``eansdl(a, b).total`` with respect to ``a``.

    Raises:
        DomainError: If eps is not positive
    """
    check_same_dims(a, b)
    if eps <= 0:
        raise DomainError("eps", eps, "positive")
    values = a.as_float64().copy()
    target = b.as_float64()
    grad = np.zeros_like(values)
    flat_values = values.reshape(-1)
    flat_grad = grad.reshape(-1)
    for index in range(flat_values.size):
        original = flat_values[index]
        flat_values[index] = original + eps
        plus = eansdl_arrays(values, target, params, level)[0].total
        flat_values[index] = original - eps
        minus = eansdl_arrays(values, target, params, level)[0].total
        flat_values[index] = original
        flat_grad[index] = (plus - minus) / (2.0 * eps)
    return FeatureMap(grad)


def kink_signature(
    a: np.ndarray, b: np.ndarray, params: EansdlParams, level: int, floor: float = 1e-4
) -> np.ndarray:
    """Sign pattern of every non-smooth sub-expression of the loss.

    Covers ``sign(G(A) - G(B))``, the sign of every window term and whether
    each magnitude of ``A`` exceeds ``floor``.
    """
    gx_a, gy_a = sobel_xy(a)
    gx_b, gy_b = sobel_xy(b)
    mag_a = magnitude_of(gx_a, gy_a)
    diff = mag_a - magnitude_of(gx_b, gy_b)
    parts = [np.sign(diff).ravel(), (mag_a > floor).ravel().astype(np.float64)]

    radius = level_radius(params.r0, level)
    if params.lambda_consistency > 0:
        w, h = diff.shape[-2:]
        padded = pad_edge(diff, radius)
        for i in range(-radius, radius + 1):
            for j in range(-radius, radius + 1):
                neighbour = padded[..., radius + i : radius + i + w, radius + j : radius + j + h]
                parts.append(np.sign(diff - neighbour).ravel())
    return np.concatenate(parts)


def max_relative_error(
    analytic: np.ndarray, numeric: np.ndarray, mask: np.ndarray | None = None
) -> float:
    """Largest ``|a - n| / max(|a|, |n|, floor)`` over the masked elements.

    ``floor`` is :data:`RELATIVE_FLOOR` times the largest analytic magnitude.
    """
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    if mask is not None:
        mask = np.asarray(mask, dtype=bool).ravel()
        analytic, numeric = analytic[mask], numeric[mask]
    if analytic.size == 0:
        return 0.0
    floor = max(RELATIVE_FLOOR * float(np.max(np.abs(analytic))), np.finfo(np.float64).tiny)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


@dataclass(frozen=True)
class GradCheckResult:
    """Outcome of comparing analytic and finite-difference gradients."""

    max_relative_error: float
    checked: int
    skipped: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.max_relative_error < self.tolerance


def gradient_check(
    a: FeatureMap,
    b: FeatureMap,
    params: EansdlParams,
    level: int,
    eps: float = 1e-3,
    tolerance: float = 1e-4,
    *,
    stencil: int = 4,
    raise_on_failure: bool = False,
) -> GradCheckResult:
    """Compare the analytic gradient with central differences at smooth elements.

    Args:
        a: Non-ideal map the gradient is taken with respect to
        b: Ideal map
        params: Loss hyperparameters
        level: Pyramid level selecting the radius
        eps: Finite-difference step
        tolerance: Largest accepted relative error
        stencil: 2 for ``(f(+h) - f(-h)) / 2h``; 4 for the fourth-order
            ``(8(f(+h) - f(-h)) - (f(+2h) - f(-2h))) / 12h``
        raise_on_failure: Raise instead of returning a failed result

    Raises:
        DomainError: If eps is not positive or the stencil is unknown
        GradientCheckError: If ``raise_on_failure`` and the check fails
    """
    check_same_dims(a, b)
    if eps <= 0:
        raise DomainError("eps", eps, "positive")
    if stencil not in (2, 4):
        raise DomainError("stencil", stencil, "2 or 4")
    values = a.as_float64().copy()
    target = b.as_float64()
    _, analytic = eansdl_arrays(values, target, params, level, with_grad=True)
    assert analytic is not None
    base = kink_signature(values, target, params, level)
    steps = (1.0, -1.0) if stencil == 2 else (1.0, -1.0, 2.0, -2.0)

    numeric = np.zeros_like(values)
    smooth = np.zeros(values.shape, dtype=bool)
    flat_values = values.reshape(-1)
    flat_numeric = numeric.reshape(-1)
    flat_smooth = smooth.reshape(-1)
    for index in range(flat_values.size):
        original = flat_values[index]
        totals = {}
        stable = True
        for step in steps:
            flat_values[index] = original + step * eps
            totals[step] = eansdl_arrays(values, target, params, level)[0].total
            stable = stable and np.array_equal(kink_signature(values, target, params, level), base)
        flat_values[index] = original
        if stencil == 2:
            flat_numeric[index] = (totals[1.0] - totals[-1.0]) / (2.0 * eps)
        else:
            flat_numeric[index] = (
                8.0 * (totals[1.0] - totals[-1.0]) - (totals[2.0] - totals[-2.0])
            ) / (12.0 * eps)
        flat_smooth[index] = stable

    result = GradCheckResult(
        max_relative_error=max_relative_error(analytic, numeric, smooth),
        checked=int(smooth.sum()),
        skipped=int(smooth.size - smooth.sum()),
        tolerance=tolerance,
    )
    logger.info(
        f"Gradient check: max relative error {result.max_relative_error:.3e} "
        f"over {result.checked} smooth elements ({result.skipped} skipped)"
    )
    if raise_on_failure and not result.passed:
        raise GradientCheckError(result.max_relative_error, tolerance, result.checked)
    return result
