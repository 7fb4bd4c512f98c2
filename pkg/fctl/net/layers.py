"""Convolution and activation kernels with hand-written backward passes.

Tensors are float64 arrays indexed ``(batch, channel, width, height)``;
weights are ``(out_channels, in_channels, k, k)`` with the third axis running
along width. Convolutions zero-pad by ``k // 2``.
"""

from dataclasses import dataclass

import numpy as np

LEAKY_SLOPE = 0.1


@dataclass
class ConvCache:
    """What a convolution keeps for its backward pass."""

    cols: np.ndarray
    input_shape: tuple[int, ...]
    stride: int
    pad: int


def output_size(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - kernel) // stride + 1


def conv2d_forward(
    x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride: int = 1
) -> tuple[np.ndarray, ConvCache]:
    """Strided 2-D convolution (cross-correlation) with zero padding.

    Returns:
        Output of shape ``(N, O, W_out, H_out)`` and the backward cache
    """
    n, c, w, h = x.shape
    k = weight.shape[-1]
    pad = k // 2
    w_out = output_size(w, k, stride, pad)
    h_out = output_size(h, k, stride, pad)
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x

    cols = np.empty((n, c, k, k, w_out, h_out))
    for a in range(k):
        for b in range(k):
            cols[:, :, a, b] = padded[
                :, :, a : a + stride * (w_out - 1) + 1 : stride, b : b + stride * (h_out - 1) + 1 : stride
            ]

    out = np.tensordot(cols, weight, axes=([1, 2, 3], [1, 2, 3])).transpose(0, 3, 1, 2)
    out = out + bias[np.newaxis, :, np.newaxis, np.newaxis]
    return np.ascontiguousarray(out), ConvCache(cols=cols, input_shape=x.shape, stride=stride, pad=pad)


def conv2d_backward(
    grad_out: np.ndarray, weight: np.ndarray, cache: ConvCache, *, need_input_grad: bool = True
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Backward pass of :func:`conv2d_forward`.

    Returns:
        ``(grad_weight, grad_bias, grad_input)``; ``grad_input`` is None when
        not requested
    """
    grad_bias = grad_out.sum(axis=(0, 2, 3))
    grad_weight = np.tensordot(grad_out, cache.cols, axes=([0, 2, 3], [0, 4, 5]))
    if not need_input_grad:
        return grad_weight, grad_bias, None

    n, c, w, h = cache.input_shape
    k = weight.shape[-1]
    stride, pad = cache.stride, cache.pad
    w_out, h_out = grad_out.shape[-2:]
    grad_cols = np.tensordot(grad_out, weight, axes=([1], [0])).transpose(0, 3, 4, 5, 1, 2)

    grad_padded = np.zeros((n, c, w + 2 * pad, h + 2 * pad))
    for a in range(k):
        for b in range(k):
            grad_padded[
                :, :, a : a + stride * (w_out - 1) + 1 : stride, b : b + stride * (h_out - 1) + 1 : stride
            ] += grad_cols[:, :, a, b]
    grad_input = grad_padded[:, :, pad : pad + w, pad : pad + h] if pad else grad_padded
    return grad_weight, grad_bias, np.ascontiguousarray(grad_input)


def leaky_relu(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, z, LEAKY_SLOPE * z)


def leaky_relu_backward(grad_out: np.ndarray, z: np.ndarray) -> np.ndarray:
    return grad_out * np.where(z > 0, 1.0, LEAKY_SLOPE)
