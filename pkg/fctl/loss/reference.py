"""Direct-summation reference for EANSDL.

Plain Python loops over every cell and window offset, evaluating the loss
formulas literally with clamped (replicate-padded) indices. Slow; used only
to cross-check the vectorized kernels in :mod:`fctl.loss.eansdl`.
"""

import math

import numpy as np

from fctl.core.tensor import FeatureMap, check_same_dims
from fctl.loss.eansdl import EansdlParams, LossBreakdown, attenuation, level_radius
from fctl.loss.sobel import SOBEL_X, SOBEL_Y


def _clamp(value: int, upper: int) -> int:
    return min(max(value, 0), upper - 1)


def naive_sobel_magnitude(values: np.ndarray) -> np.ndarray:
    """Sobel magnitude of one ``(width, height)`` slice by explicit correlation.

    Kernel row ``j`` pairs with the y offset and column ``i`` with the x offset.
    """
    w, h = values.shape
    out = np.zeros((w, h))
    for x in range(w):
        for y in range(h):
            gx = 0.0
            gy = 0.0
            for j in (-1, 0, 1):
                for i in (-1, 0, 1):
                    v = float(values[_clamp(x + i, w), _clamp(y + j, h)])
                    gx += SOBEL_X[j + 1, i + 1] * v
                    gy += SOBEL_Y[j + 1, i + 1] * v
            out[x, y] = math.sqrt(gx * gx + gy * gy)
    return out


def naive_eansdl(a: FeatureMap, b: FeatureMap, params: EansdlParams, level: int) -> LossBreakdown:
    """Evaluate EANSDL with a quadruple loop."""
    check_same_dims(a, b)
    batch, channels, w, h = a.dims
    r = level_radius(params.r0, level)
    values_a = a.as_float64()
    values_b = b.as_float64()

    local_sum = 0.0
    omega_sum = 0.0
    for n in range(batch):
        for c in range(channels):
            ga = naive_sobel_magnitude(values_a[n, c])
            gb = naive_sobel_magnitude(values_b[n, c])
            for x in range(w):
                for y in range(h):
                    ds = abs(ga[x, y] - gb[x, y])
                    local_sum += math.exp(-ds) * ds
                    window = 0.0
                    for i in range(-r, r + 1):
                        for j in range(-r, r + 1):
                            xn, yn = _clamp(x + i, w), _clamp(y + j, h)
                            window += abs(
                                (ga[x, y] - ga[xn, yn]) - (gb[x, y] - gb[xn, yn])
                            )
                    omega_sum += window / (2 * r + 1) ** 2

    count = batch * channels * w * h
    local_term = local_sum / count
    consistency_term = omega_sum / count
    att = attenuation(params.delta, params.alpha, params.beta)
    return LossBreakdown(
        local_term=local_term,
        consistency_term=consistency_term,
        attenuation=att,
        radius_used=r,
        total=att * (local_term + params.lambda_consistency * consistency_term),
    )
