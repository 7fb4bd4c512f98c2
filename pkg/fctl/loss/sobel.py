"""Sobel gradient fields of feature maps.

The two 3x3 kernels are::

    S_x = [[-1, 0, 1],      S_y = [[-1, -2, -1],
           [-2, 0, 2],             [ 0,  0,  0],
           [-1, 0, 1]]             [ 1,  2,  1]]

applied as a correlation (no kernel flip) whose column index runs along the
width axis x and whose row index runs along the height axis y, so a unit ramp
``f(x, y) = x`` gives ``gx = 8`` away from the borders. Borders use replicate
padding. Both kernels are separable, and the correlation is evaluated as a
central difference followed by a [1, 2, 1] smoothing pass; this keeps the
response of a constant map exactly zero and the response of ``-f`` exactly
``-gx, -gy``.
"""

from dataclasses import dataclass

import numpy as np

from fctl.core.tensor import FeatureMap

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = np.array([[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]])


def pad_edge(values: np.ndarray, radius: int) -> np.ndarray:
    """Replicate-pad the last two axes by ``radius`` cells."""
    if radius == 0:
        return values
    pad = [(0, 0)] * (values.ndim - 2) + [(radius, radius), (radius, radius)]
    return np.pad(values, pad, mode="edge")


def fold_edge_padding(padded_grad: np.ndarray, radius: int) -> np.ndarray:
    """Adjoint of :func:`pad_edge`.

    Gradient that landed on replicated border cells is summed back into the
    edge cell it was copied from.
    """
    if radius == 0:
        return padded_grad
    grad = padded_grad
    for axis in (-2, -1):
        grad = np.moveaxis(grad, axis, -1).copy()
        grad[..., radius] += grad[..., :radius].sum(axis=-1)
        grad[..., -radius - 1] += grad[..., -radius:].sum(axis=-1)
        grad = np.moveaxis(grad[..., radius:-radius], -1, axis)
    return np.ascontiguousarray(grad)


def sobel_xy(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Directional Sobel responses of the last two axes of a float64 array.

    Returns:
        ``(gx, gy)`` with the same shape as ``values``
    """
    w, h = values.shape[-2:]
    padded = pad_edge(values, 1)

    diff_x = padded[..., 2:, :] - padded[..., :-2, :]
    gx = diff_x[..., 0:h] + 2.0 * diff_x[..., 1 : h + 1] + diff_x[..., 2 : h + 2]

    diff_y = padded[..., :, 2:] - padded[..., :, :-2]
    gy = diff_y[..., 0:w, :] + 2.0 * diff_y[..., 1 : w + 1, :] + diff_y[..., 2 : w + 2, :]
    return gx, gy


def sobel_xy_transpose(grad_gx: np.ndarray, grad_gy: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`sobel_xy`: maps output gradients to an input gradient."""
    w, h = grad_gx.shape[-2:]
    lead = grad_gx.shape[:-2]
    padded = np.zeros(lead + (w + 2, h + 2))

    diff_x = np.zeros(lead + (w, h + 2))
    diff_x[..., 0:h] += grad_gx
    diff_x[..., 1 : h + 1] += 2.0 * grad_gx
    diff_x[..., 2 : h + 2] += grad_gx
    padded[..., 2:, :] += diff_x
    padded[..., :-2, :] -= diff_x

    diff_y = np.zeros(lead + (w + 2, h))
    diff_y[..., 0:w, :] += grad_gy
    diff_y[..., 1 : w + 1, :] += 2.0 * grad_gy
    diff_y[..., 2 : w + 2, :] += grad_gy
    padded[..., :, 2:] += diff_y
    padded[..., :, :-2] -= diff_y

    return fold_edge_padding(padded, 1)


def magnitude_of(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    return np.sqrt(gx * gx + gy * gy)


@dataclass(frozen=True, eq=False)
class GradientField:
    """Directional gradients and their magnitude, all with the input's dims."""

    gx: FeatureMap
    gy: FeatureMap
    magnitude: FeatureMap


def sobel_filter(fmap: FeatureMap) -> GradientField:
    """Compute the Sobel gradient field of every (batch, channel) slice.

    Args:
        fmap: Input feature map

    Returns:
        float64 ``gx``, ``gy`` and ``magnitude = sqrt(gx**2 + gy**2)``
    """
    gx, gy = sobel_xy(fmap.as_float64())
    return GradientField(
        gx=FeatureMap(gx), gy=FeatureMap(gy), magnitude=FeatureMap(magnitude_of(gx, gy))
    )


def sobel_transpose(grad_gx: FeatureMap, grad_gy: FeatureMap) -> FeatureMap:
    """Pull gradients on ``gx`` and ``gy`` back onto the input map."""
    return FeatureMap(sobel_xy_transpose(grad_gx.as_float64(), grad_gy.as_float64()))
