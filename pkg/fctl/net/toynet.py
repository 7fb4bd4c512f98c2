"""Tiny convolutional detector with a three-level feature pyramid.

Architecture (``k`` kernel, ``s`` stride; widths relative to the input)::

    layer      input   in -> out  k  s  output          activation
    stem       image    3 ->  8   3  1  c0  (W)         leaky 0.1
    down1      c0       8 ->  8   3  2  c1  (W/2)       leaky 0.1
    down2      c1       8 -> 16   3  2  c2  (W/4)       leaky 0.1
    lateral0   c0       8 ->  8   1  1  pyramid level 0
    lateral1   c1       8 ->  8   1  1  pyramid level 1
    lateral2   c2      16 ->  8   1  1  pyramid level 2
    head{k}    level k  8 ->  1   1  1  objectness logits of level k

Inputs are normalized to (x - 0.5) / 0.25 before the stem. Head biases start at
the log-odds of the weighted positive share of their level, the best constant
prediction under the detection loss.

The same parameter layout serves the static (ideal) and the dynamic
(non-ideal) backbone. Feature-correction gradients enter at the pyramid
nodes through the optional ``grad_pyramid`` argument of :func:`backward`.
"""

import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np

from fctl.core.exceptions import DomainError, ShapeError
from fctl.core.tensor import FeatureMap, FeaturePyramid, ImageRGB, images_to_batch
from fctl.degrade.rng import Rng, derive_seed
from fctl.net.detection import POSITIVE_WEIGHT
from fctl.net.layers import (
    ConvCache,
    conv2d_backward,
    conv2d_forward,
    leaky_relu,
    leaky_relu_backward,
)
from fctl.net.scenes import LEVEL_STRIDES, MEAN_OBJECTS

logger = logging.getLogger(__name__)

PYRAMID_CHANNELS = 8
NUM_LEVELS = 3
INPUT_MEAN = 0.5
INPUT_STD = 0.25


@dataclass(frozen=True)
class LayerSpec:
    """One row of the architecture table."""

    name: str
    in_channels: int
    out_channels: int
    kernel: int
    stride: int


ARCHITECTURE: tuple[LayerSpec, ...] = (
    LayerSpec("stem", 3, 8, 3, 1),
    LayerSpec("down1", 8, 8, 3, 2),
    LayerSpec("down2", 8, 16, 3, 2),
    LayerSpec("lateral0", 8, PYRAMID_CHANNELS, 1, 1),
    LayerSpec("lateral1", 8, PYRAMID_CHANNELS, 1, 1),
    LayerSpec("lateral2", 16, PYRAMID_CHANNELS, 1, 1),
    LayerSpec("head0", PYRAMID_CHANNELS, 1, 1, 1),
    LayerSpec("head1", PYRAMID_CHANNELS, 1, 1, 1),
    LayerSpec("head2", PYRAMID_CHANNELS, 1, 1, 1),
)
_LAYERS = {spec.name: spec for spec in ARCHITECTURE}


def parameter_shapes() -> dict[str, tuple[int, ...]]:
    """Expected shape of every parameter tensor, in architecture order."""
    shapes: dict[str, tuple[int, ...]] = {}
    for spec in ARCHITECTURE:
        shapes[f"{spec.name}.weight"] = (spec.out_channels, spec.in_channels, spec.kernel, spec.kernel)
        shapes[f"{spec.name}.bias"] = (spec.out_channels,)
    return shapes


@dataclass(eq=False)
class ToyNetParams:
    """Weights and biases of the toy detector.

    Also used as the container for gradients, which share its layout.

    Attributes:
        tensors: Parameter name -> float64 array, in architecture order
        image_size: Side length of the square input the net is built for
    """

    tensors: dict[str, np.ndarray]
    image_size: int = 64

    def __post_init__(self) -> None:
        expected = parameter_shapes()
        if set(self.tensors) != set(expected):
            missing = sorted(set(expected) - set(self.tensors))
            extra = sorted(set(self.tensors) - set(expected))
            raise ShapeError(f"Parameter names do not match the architecture: missing={missing} extra={extra}")
        ordered: dict[str, np.ndarray] = {}
        for name, shape in expected.items():
            value = np.asarray(self.tensors[name], dtype=np.float64)
            if value.shape != shape:
                raise ShapeError(f"Parameter {name} has the wrong shape", expected=shape, actual=value.shape)
            if not np.all(np.isfinite(value)):
                raise DomainError(name, "non-finite", "finite everywhere")
            ordered[name] = value
        self.tensors = ordered

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self.tensors.items())

    @property
    def num_parameters(self) -> int:
        return sum(int(v.size) for v in self.tensors.values())

    def copy(self) -> "ToyNetParams":
        return ToyNetParams({k: v.copy() for k, v in self.tensors.items()}, self.image_size)

    def zeros_like(self) -> "ToyNetParams":
        return ToyNetParams({k: np.zeros_like(v) for k, v in self.tensors.items()}, self.image_size)

    def equals(self, other: "ToyNetParams") -> bool:
        """Bitwise equality of every tensor."""
        return self.image_size == other.image_size and all(
            self.tensors[k].tobytes() == other.tensors[k].tobytes() for k in self.tensors
        )

    def flat_index(self, index: int) -> tuple[str, tuple[int, ...]]:
        """Map a global parameter index to ``(name, element index)``."""
        for name, value in self.tensors.items():
            if index < value.size:
                return name, tuple(int(i) for i in np.unravel_index(index, value.shape))
            index -= value.size
        raise IndexError("parameter index out of range")


def head_prior_bias(image_size: int, level: int) -> float:
    """Log-odds of the weighted share of positive cells at a pyramid level.

    A scene holds ``MEAN_OBJECTS`` centers on average, each marking one cell
    of the level's ``(W/s)^2`` grid.
    """
    side = max(1, image_size // LEVEL_STRIDES[level])
    share = min(MEAN_OBJECTS / (side * side), 0.5)
    return math.log(POSITIVE_WEIGHT * share / (1.0 - share))


def init_params(seed: int, image_size: int = 64) -> ToyNetParams:
    """Seeded init: weights uniform in ``+-sqrt(6 / (fan_in + fan_out))``.

    Biases start at zero except the heads, which start at
    :func:`head_prior_bias` of their level.

    Raises:
        DomainError: If image_size is not a positive multiple of 4
    """
    if image_size < 4 or image_size % 4:
        raise DomainError("image_size", image_size, "a positive multiple of 4")
    tensors: dict[str, np.ndarray] = {}
    for spec in ARCHITECTURE:
        fan_in = spec.in_channels * spec.kernel * spec.kernel
        fan_out = spec.out_channels * spec.kernel * spec.kernel
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        shape = (spec.out_channels, spec.in_channels, spec.kernel, spec.kernel)
        rng = Rng(derive_seed(seed, "init", spec.name))
        tensors[f"{spec.name}.weight"] = rng.uniform(int(np.prod(shape)), -limit, limit).reshape(shape)
        tensors[f"{spec.name}.bias"] = np.zeros(spec.out_channels)
    for k in range(NUM_LEVELS):
        tensors[f"head{k}.bias"] = np.full(1, head_prior_bias(image_size, k))
    return ToyNetParams(tensors, image_size)


@dataclass
class ForwardCache:
    """Activations kept for :func:`backward`."""

    conv: dict[str, ConvCache] = field(default_factory=dict)
    pre_activation: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class ForwardResult:
    """Output of :func:`forward`."""

    levels: list[np.ndarray]
    logits: list[np.ndarray]
    cache: ForwardCache

    @property
    def pyramid(self) -> FeaturePyramid:
        return FeaturePyramid(tuple(FeatureMap(level) for level in self.levels))


def _as_batch(images: ImageRGB | Sequence[ImageRGB] | np.ndarray) -> np.ndarray:
    if isinstance(images, ImageRGB):
        return images_to_batch([images])
    if isinstance(images, np.ndarray):
        return np.asarray(images, dtype=np.float64)
    return images_to_batch(list(images))


def _conv(params: ToyNetParams, name: str, x: np.ndarray, cache: ForwardCache) -> np.ndarray:
    spec = _LAYERS[name]
    out, conv_cache = conv2d_forward(x, params[f"{name}.weight"], params[f"{name}.bias"], spec.stride)
    cache.conv[name] = conv_cache
    return out


def forward(params: ToyNetParams, images: ImageRGB | Sequence[ImageRGB] | np.ndarray) -> ForwardResult:
    """Run the detector on one image or a batch ``(N, 3, W, H)`` of values in [0, 1].

    Returns:
        Pyramid levels (strides 1, 2, 4), per-level logits ``(N, 1, W_k, H_k)``
        and the cache for :func:`backward`

    Raises:
        ShapeError: If the input size does not match ``params.image_size``
    """
    x = _as_batch(images)
    size = params.image_size
    if x.ndim != 4 or x.shape[1:] != (3, size, size):
        raise ShapeError("Input does not match the network", expected=(3, size, size), actual=tuple(x.shape[1:]))

    cache = ForwardCache()
    features = []
    h = (x - INPUT_MEAN) / INPUT_STD
    for name in ("stem", "down1", "down2"):
        z = _conv(params, name, h, cache)
        cache.pre_activation[name] = z
        h = leaky_relu(z)
        features.append(h)

    levels = [_conv(params, f"lateral{k}", features[k], cache) for k in range(NUM_LEVELS)]
    logits = [_conv(params, f"head{k}", levels[k], cache) for k in range(NUM_LEVELS)]
    return ForwardResult(levels=levels, logits=logits, cache=cache)


def backward(
    params: ToyNetParams,
    cache: ForwardCache,
    grad_logits: Sequence[np.ndarray],
    grad_pyramid: Sequence[np.ndarray] | None = None,
) -> ToyNetParams:
    """Reverse-mode gradients of every parameter.

    Args:
        params: The parameters used in the forward pass
        cache: Cache from the matching :func:`forward`
        grad_logits: Loss gradient for each level's logits
        grad_pyramid: Optional extra gradient injected at each pyramid level

    Returns:
        Gradients in the :class:`ToyNetParams` layout
    """
    if len(grad_logits) != NUM_LEVELS:
        raise ShapeError("Need one logit gradient per level", expected=(NUM_LEVELS,), actual=(len(grad_logits),))
    if grad_pyramid is not None and len(grad_pyramid) != NUM_LEVELS:
        raise ShapeError("Need one pyramid gradient per level", expected=(NUM_LEVELS,), actual=(len(grad_pyramid),))

    grads: dict[str, np.ndarray] = {}

    def conv_back(name: str, grad_out: np.ndarray, need_input: bool = True) -> np.ndarray | None:
        gw, gb, gx = conv2d_backward(grad_out, params[f"{name}.weight"], cache.conv[name], need_input_grad=need_input)
        grads[f"{name}.weight"] = gw
        grads[f"{name}.bias"] = gb
        return gx

    grad_features: list[np.ndarray] = []
    for k in range(NUM_LEVELS):
        grad_level = conv_back(f"head{k}", np.asarray(grad_logits[k], dtype=np.float64))
        assert grad_level is not None
        if grad_pyramid is not None:
            grad_level = grad_level + grad_pyramid[k]
        grad_feature = conv_back(f"lateral{k}", grad_level)
        assert grad_feature is not None
        grad_features.append(grad_feature)

    grad_h = grad_features[2]
    for name, below in (("down2", 1), ("down1", 0)):
        grad_z = leaky_relu_backward(grad_h, cache.pre_activation[name])
        grad_in = conv_back(name, grad_z)
        assert grad_in is not None
        grad_h = grad_features[below] + grad_in

    grad_z = leaky_relu_backward(grad_h, cache.pre_activation["stem"])
    conv_back("stem", grad_z, need_input=False)
    return ToyNetParams(grads, params.image_size)


def sgd_step(params: ToyNetParams, grads: ToyNetParams, lr: float) -> ToyNetParams:
    """Return ``params - lr * grads``.

    Raises:
        DomainError: If lr is negative
    """
    if lr < 0:
        raise DomainError("lr", lr, "non-negative")
    return ToyNetParams(
        {name: value - lr * grads[name] for name, value in params.items()}, params.image_size
    )
