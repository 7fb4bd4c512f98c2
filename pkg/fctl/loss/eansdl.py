"""Extended Area Novel Structural Discrepancy Loss (EANSDL).

For two maps ``A`` (non-ideal) and ``B`` (ideal) with Sobel magnitudes
``G(A)`` and ``G(B)``::

    dS(x, y)    = |G(A)(x, y) - G(B)(x, y)|
    Omega(x, y) = mean over the (2r+1)^2 window of
                  |(G(A)(x,y) - G(A)(n)) - (G(B)(x,y) - G(B)(n))|
    D(delta)    = exp(-alpha * delta**beta)
    total       = D(delta) * (mean(exp(-dS) * dS) + lambda * mean(Omega))

Means run over batch, channel and the spatial grid, in float64. Window
neighbours outside the map are read through replicate padding while the
window normalisation stays ``(2r+1)^2``.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from fctl.core.exceptions import DomainError, ShapeError
from fctl.core.tensor import (
    FeatureMap,
    FeaturePyramid,
    check_same_dims,
    check_same_pyramid_dims,
)
from fctl.loss.sobel import fold_edge_padding, magnitude_of, pad_edge, sobel_xy, sobel_xy_transpose

logger = logging.getLogger(__name__)


class EansdlParams(BaseModel):
    """Scalar hyperparameters of the loss.

    Attributes:
        alpha: Steepness of the attenuation decay
        beta: Curvature of the attenuation decay
        lambda_consistency: Weight of the window consistency term inside the loss
        lambda_fs: Weight of the whole loss next to the detection loss
        r0: Window radius at the largest pyramid level
        delta: Fraction of training completed (current epoch / total epochs)
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    alpha: float = Field(3.0, gt=0)
    beta: float = Field(2.0, gt=0)
    lambda_consistency: float = Field(1.0, ge=0)
    lambda_fs: float = Field(0.1, ge=0)
    r0: int = Field(2, ge=1)
    delta: float = Field(0.0, ge=0, le=1)

    def at_delta(self, delta: float) -> "EansdlParams":
        """Return a copy with a new training-progress ratio."""
        if not 0.0 <= delta <= 1.0:
            raise DomainError("delta", delta, "in [0, 1]")
        return self.model_copy(update={"delta": float(delta)})


@dataclass(frozen=True)
class LossBreakdown:
    """Aggregates of one EANSDL evaluation.

    ``total == attenuation * (local_term + lambda_consistency * consistency_term)``
    """

    local_term: float
    consistency_term: float
    attenuation: float
    radius_used: int
    total: float

    def as_dict(self) -> dict[str, float | int]:
        return {
            "local_term": self.local_term,
            "consistency_term": self.consistency_term,
            "attenuation": self.attenuation,
            "radius_used": self.radius_used,
            "total": self.total,
        }


def attenuation(delta: float, alpha: float, beta: float) -> float:
    """Time-varying attenuation ``exp(-alpha * delta**beta)``.

    Raises:
        DomainError: If delta is outside [0, 1] or alpha/beta are not positive
    """
    if not 0.0 <= delta <= 1.0:
        raise DomainError("delta", delta, "in [0, 1]")
    if alpha <= 0:
        raise DomainError("alpha", alpha, "positive")
    if beta <= 0:
        raise DomainError("beta", beta, "positive")
    return math.exp(-alpha * delta**beta)


def level_radius(r0: int, level: int) -> int:
    """Window radius at a pyramid level: ``floor(r0 / 2**level)``, at least 1."""
    if r0 < 1:
        raise DomainError("r0", r0, "at least 1")
    if level < 0:
        raise DomainError("level", level, "non-negative")
    return max(1, r0 >> level)


def local_discrepancy(mag_a: FeatureMap, mag_b: FeatureMap) -> FeatureMap:
    """Elementwise ``|mag_a - mag_b|``."""
    check_same_dims(mag_a, mag_b)
    return FeatureMap(np.abs(mag_a.as_float64() - mag_b.as_float64()))


def weighted_local(ds: FeatureMap) -> FeatureMap:
    """Elementwise ``exp(-ds) * ds``; bounded above by ``1/e``.

    Raises:
        DomainError: If any element of ds is negative
    """
    values = ds.as_float64()
    if np.any(values < 0):
        raise DomainError("ds", float(values.min()), "non-negative everywhere")
    return FeatureMap(np.exp(-values) * values)


def _window_offsets(radius: int) -> list[tuple[int, int]]:
    span = range(-radius, radius + 1)
    return [(i, j) for i in span for j in span]


def _consistency(diff: np.ndarray, radius: int) -> np.ndarray:
    # diff = G(A) - G(B); the window term only depends on its drops
    if radius == 0:
        return np.zeros_like(diff)
    w, h = diff.shape[-2:]
    padded = pad_edge(diff, radius)
    total = np.zeros_like(diff)
    for i, j in _window_offsets(radius):
        neighbour = padded[..., radius + i : radius + i + w, radius + j : radius + j + h]
        total += np.abs(diff - neighbour)
    return total / float((2 * radius + 1) ** 2)


def extended_consistency(mag_a: FeatureMap, mag_b: FeatureMap, r: int) -> FeatureMap:
    """Window gradient-consistency map at radius ``r``."""
    check_same_dims(mag_a, mag_b)
    if r < 0:
        raise DomainError("r", r, "non-negative")
    return FeatureMap(_consistency(mag_a.as_float64() - mag_b.as_float64(), r))


@dataclass
class _ForwardCache:
    gx: np.ndarray
    gy: np.ndarray
    mag: np.ndarray
    diff: np.ndarray
    ds: np.ndarray
    radius: int


def _forward(
    a: np.ndarray, b: np.ndarray, params: EansdlParams, level: int
) -> tuple[LossBreakdown, _ForwardCache]:
    if a.shape != b.shape:
        raise ShapeError(
            "Feature map dims do not match", expected=tuple(a.shape), actual=tuple(b.shape)
        )
    gx_a, gy_a = sobel_xy(a)
    gx_b, gy_b = sobel_xy(b)
    mag_a = magnitude_of(gx_a, gy_a)
    mag_b = magnitude_of(gx_b, gy_b)

    diff = mag_a - mag_b
    ds = np.abs(diff)
    radius = level_radius(params.r0, level)

    local_term = float(np.mean(np.exp(-ds) * ds, dtype=np.float64))
    consistency_term = float(np.mean(_consistency(diff, radius), dtype=np.float64))
    att = attenuation(params.delta, params.alpha, params.beta)
    total = att * (local_term + params.lambda_consistency * consistency_term)

    breakdown = LossBreakdown(
        local_term=local_term,
        consistency_term=consistency_term,
        attenuation=att,
        radius_used=radius,
        total=total,
    )
    return breakdown, _ForwardCache(gx=gx_a, gy=gy_a, mag=mag_a, diff=diff, ds=ds, radius=radius)


def _backward(cache: _ForwardCache, params: EansdlParams, att: float) -> np.ndarray:
    count = cache.ds.size
    # d/dx of x*exp(-x) is exp(-x)*(1-x); sign(0) == 0 is the subgradient at ties
    grad_mag = (att / count) * np.exp(-cache.ds) * (1.0 - cache.ds) * np.sign(cache.diff)

    radius = cache.radius
    if params.lambda_consistency > 0 and radius > 0:
        w, h = cache.diff.shape[-2:]
        padded = pad_edge(cache.diff, radius)
        grad_centre = np.zeros_like(cache.diff)
        grad_padded = np.zeros_like(padded)
        for i, j in _window_offsets(radius):
            window = (
                Ellipsis,
                slice(radius + i, radius + i + w),
                slice(radius + j, radius + j + h),
            )
            signs = np.sign(cache.diff - padded[window])
            grad_centre += signs
            grad_padded[window] -= signs
        scale = att * params.lambda_consistency / (count * (2 * radius + 1) ** 2)
        grad_mag = grad_mag + scale * (grad_centre + fold_edge_padding(grad_padded, radius))

    nonzero = cache.mag > 0
    unit_x = np.divide(cache.gx, cache.mag, out=np.zeros_like(cache.gx), where=nonzero)
    unit_y = np.divide(cache.gy, cache.mag, out=np.zeros_like(cache.gy), where=nonzero)
    return sobel_xy_transpose(grad_mag * unit_x, grad_mag * unit_y)


def eansdl_arrays(
    a: np.ndarray, b: np.ndarray, params: EansdlParams, level: int, *, with_grad: bool = False
) -> tuple[LossBreakdown, np.ndarray | None]:
    """Array-level forward (and optionally backward) pass.

    Args:
        a: Non-ideal map values, shape ``(batch, channels, width, height)``
        b: Ideal map values, same shape
        params: Loss hyperparameters
        level: Pyramid level selecting the window radius
        with_grad: Also return the gradient of ``total`` with respect to ``a``

    Returns:
        The breakdown and the gradient (or None)
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    breakdown, cache = _forward(a, b, params, level)
    grad = _backward(cache, params, breakdown.attenuation) if with_grad else None
    return breakdown, grad


def eansdl(a: FeatureMap, b: FeatureMap, params: EansdlParams, level: int) -> LossBreakdown:
    """Evaluate the loss between non-ideal map ``a`` and ideal map ``b``.

    The result is symmetric in its two maps and exactly zero when they are equal.

    Raises:
        ShapeError: If the maps have different dims
    """
    check_same_dims(a, b)
    breakdown, _ = eansdl_arrays(a.as_float64(), b.as_float64(), params, level)
    return breakdown


def eansdl_backward(a: FeatureMap, b: FeatureMap, params: EansdlParams, level: int) -> FeatureMap:
    """Gradient of ``eansdl(a, b, params, level).total`` with respect to ``a``.

    Subgradients of ``|.|`` and of the magnitude's square root at zero are 0,
    which makes the gradient vanish when ``a == b``.
    """
    check_same_dims(a, b)
    _, grad = eansdl_arrays(a.as_float64(), b.as_float64(), params, level, with_grad=True)
    assert grad is not None
    return FeatureMap(grad)


def eansdl_pyramid(pa: FeaturePyramid, pb: FeaturePyramid, params: EansdlParams) -> float:
    """Mean of the per-level totals, level k using radius ``level_radius(r0, k)``."""
    check_same_pyramid_dims(pa, pb)
    totals = [eansdl(a, b, params, k).total for k, (a, b) in enumerate(zip(pa, pb))]
    return float(sum(totals) / len(totals))


def eansdl_pyramid_arrays(
    levels_a: list[np.ndarray],
    levels_b: list[np.ndarray],
    params: EansdlParams,
    *,
    with_grad: bool = False,
) -> tuple[float, list[LossBreakdown], list[np.ndarray] | None]:
    """Array-level pyramid loss used inside the training loop.

    Returns:
        The pyramid mean, the per-level breakdowns and, if requested, the
        gradient of the pyramid mean with respect to every level of ``levels_a``
    """
    if len(levels_a) != len(levels_b):
        raise ShapeError(
            "Pyramids have different level counts",
            expected=(len(levels_a),),
            actual=(len(levels_b),),
        )
    n_levels = len(levels_a)
    breakdowns: list[LossBreakdown] = []
    grads: list[np.ndarray] = []
    for k, (a, b) in enumerate(zip(levels_a, levels_b)):
        breakdown, grad = eansdl_arrays(a, b, params, k, with_grad=with_grad)
        breakdowns.append(breakdown)
        if grad is not None:
            grads.append(grad / n_levels)
    value = float(sum(bd.total for bd in breakdowns) / n_levels)
    return value, breakdowns, (grads if with_grad else None)


def eansdl_pyramid_backward(
    pa: FeaturePyramid, pb: FeaturePyramid, params: EansdlParams
) -> FeaturePyramid:
    """Gradient of :func:`eansdl_pyramid` with respect to every level of ``pa``."""
    check_same_pyramid_dims(pa, pb)
    _, _, grads = eansdl_pyramid_arrays(
        [level.as_float64() for level in pa],
        [level.as_float64() for level in pb],
        params,
        with_grad=True,
    )
    assert grads is not None
    return FeaturePyramid(tuple(FeatureMap(g) for g in grads))
