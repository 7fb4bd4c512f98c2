"""Dense real-valued array types shared by every fctl module.

A :class:`FeatureMap` is a rank-4 array indexed ``(batch, channel, width,
height)``; element ``(b, c, x, y)`` lives at flat offset
``((b*C + c)*W + x)*H + y`` in C order. Maps are immutable once built.
"""

from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import numpy as np

from fctl.core.exceptions import DomainError, InvalidDimsError, ShapeError

Dims = tuple[int, int, int, int]

_ALLOWED_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Immutable rank-4 feature map.

    Attributes:
        data: Array of shape ``(batch, channels, width, height)``, float32 or
            float64. Sums and means over maps are always taken in float64.

    Raises:
        InvalidDimsError: If the array is not rank 4 or has an empty axis
        DomainError: If any value is NaN or Inf
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        data = self.data
        if not isinstance(data, np.ndarray) or data.ndim != 4:
            raise InvalidDimsError("A feature map needs exactly four dimensions")
        dims = tuple(int(d) for d in data.shape)
        if any(d < 1 for d in dims):
            raise InvalidDimsError(f"Invalid feature map dims {dims}", dims=dims)
        if data.dtype not in _ALLOWED_DTYPES:
            data = data.astype(np.float64)
        if not np.all(np.isfinite(data)):
            raise DomainError("data", "non-finite", "finite everywhere (no NaN or Inf)")
        if data.flags.writeable or not data.flags.c_contiguous:
            data = np.array(data, copy=True, order="C")
        object.__setattr__(self, "data", _frozen(data))

    @classmethod
    def from_array(cls, array: np.ndarray | Sequence, dtype: type = np.float32) -> "FeatureMap":
        """Build a map from any array-like of rank 4.

        Args:
            array: Values indexed ``(batch, channel, width, height)``
            dtype: Storage dtype, float32 (the FMAP file type, the default) or float64

        Returns:
            A new feature map owning a private copy of the values
        """
        return cls(np.array(array, dtype=dtype, copy=True, order="C"))

    @property
    def dims(self) -> Dims:
        """Return ``(batch, channels, width, height)``."""
        b, c, w, h = self.data.shape
        return (int(b), int(c), int(w), int(h))

    @property
    def batch(self) -> int:
        return self.dims[0]

    @property
    def channels(self) -> int:
        return self.dims[1]

    @property
    def width(self) -> int:
        return self.dims[2]

    @property
    def height(self) -> int:
        return self.dims[3]

    def as_float64(self) -> np.ndarray:
        """Return the values as a float64 array (a copy only if needed)."""
        return self.data.astype(np.float64, copy=False)

    def equals(self, other: "FeatureMap") -> bool:
        """Bitwise equality of dims, dtype and every element."""
        return (
            self.data.dtype == other.data.dtype
            and self.dims == other.dims
            and self.data.tobytes() == other.data.tobytes()
        )

    def transpose_spatial(self) -> "FeatureMap":
        """Swap the width and height axes."""
        return FeatureMap(np.ascontiguousarray(self.data.transpose(0, 1, 3, 2)))

    def __neg__(self) -> "FeatureMap":
        return FeatureMap(-self.data)

    def __add__(self, other: "FeatureMap") -> "FeatureMap":
        check_same_dims(self, other)
        return FeatureMap(self.data + other.data)

    def __sub__(self, other: "FeatureMap") -> "FeatureMap":
        check_same_dims(self, other)
        return FeatureMap(self.data - other.data)

    def __mul__(self, scalar: float) -> "FeatureMap":
        return FeatureMap(self.data * scalar)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"FeatureMap(dims={self.dims}, dtype={self.data.dtype})"


def check_same_dims(a: FeatureMap, b: FeatureMap) -> None:
    """Raise :class:`ShapeError` unless both maps have identical dims."""
    if a.dims != b.dims:
        raise ShapeError("Feature map dims do not match", expected=a.dims, actual=b.dims)


def new_feature_map(dims: Sequence[int], fill: float, dtype: type = np.float32) -> FeatureMap:
    """Create a feature map of the given dims with every element set to ``fill``.

    Args:
        dims: ``(batch, channels, width, height)``, all at least 1
        fill: Value written to every element
        dtype: Storage dtype, float32 (the FMAP file type, the default) or float64

    Returns:
        The filled feature map

    Raises:
        InvalidDimsError: If dims is not a 4-tuple of positive counts
        DomainError: If fill is NaN or Inf
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 4 or any(d < 1 for d in dims):
        raise InvalidDimsError(f"Invalid feature map dims {dims}", dims=dims)
    return FeatureMap(np.full(dims, fill, dtype=dtype))


@dataclass(frozen=True, eq=False)
class FeaturePyramid:
    """Ordered list of feature maps, level 0 being the largest."""

    levels: tuple[FeatureMap, ...]

    def __post_init__(self) -> None:
        levels = tuple(self.levels)
        if not levels:
            raise ShapeError("A feature pyramid needs at least one level")
        batch, channels = levels[0].batch, levels[0].channels
        for k, level in enumerate(levels[1:], start=1):
            if (level.batch, level.channels) != (batch, channels):
                raise ShapeError(
                    f"Pyramid level {k} changes batch/channel counts",
                    expected=(batch, channels),
                    actual=(level.batch, level.channels),
                )
            prev = levels[k - 1]
            if level.width > prev.width or level.height > prev.height:
                raise ShapeError(
                    f"Pyramid level {k} is larger than level {k - 1}",
                    expected=(prev.width, prev.height),
                    actual=(level.width, level.height),
                )
        object.__setattr__(self, "levels", levels)

    def __len__(self) -> int:
        return len(self.levels)

    def __iter__(self) -> Iterator[FeatureMap]:
        return iter(self.levels)

    def __getitem__(self, index: int) -> FeatureMap:
        return self.levels[index]

    @property
    def dims(self) -> list[Dims]:
        """Dims of every level, in order."""
        return [level.dims for level in self.levels]


def check_same_pyramid_dims(a: FeaturePyramid, b: FeaturePyramid) -> None:
    """Raise :class:`ShapeError` unless both pyramids line up level by level."""
    if len(a) != len(b):
        raise ShapeError(
            "Pyramids have different level counts", expected=(len(a),), actual=(len(b),)
        )
    for level_a, level_b in zip(a, b):
        check_same_dims(level_a, level_b)


@dataclass(frozen=True, eq=False)
class ImageRGB:
    """Three-channel image with values in [0, 1].

    Attributes:
        pixels: Array of shape ``(3, width, height)``, float64
    """

    pixels: np.ndarray

    def __post_init__(self) -> None:
        pixels = np.array(self.pixels, dtype=np.float64, copy=True, order="C")
        if pixels.ndim != 3 or pixels.shape[0] != 3:
            raise ShapeError(
                "An RGB image needs shape (3, width, height)",
                expected=(3,),
                actual=tuple(pixels.shape[:1]),
            )
        if pixels.shape[1] < 1 or pixels.shape[2] < 1:
            raise InvalidDimsError(
                f"Invalid image size {pixels.shape[1:]}", dims=tuple(pixels.shape)
            )
        if not np.all(np.isfinite(pixels)) or pixels.min() < 0.0 or pixels.max() > 1.0:
            raise DomainError("pixels", "outside [0, 1]", "within [0, 1]")
        object.__setattr__(self, "pixels", _frozen(pixels))

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[2])

    def equals(self, other: "ImageRGB") -> bool:
        """Bitwise equality of every pixel value."""
        return self.pixels.shape == other.pixels.shape and (
            self.pixels.tobytes() == other.pixels.tobytes()
        )

    def mean_brightness(self) -> float:
        return float(np.mean(self.pixels, dtype=np.float64))


def images_to_batch(images: Sequence[ImageRGB]) -> np.ndarray:
    """Stack images into a float64 array of shape ``(N, 3, width, height)``."""
    if not images:
        raise ShapeError("Cannot batch an empty list of images")
    shape = images[0].pixels.shape
    for image in images:
        if image.pixels.shape != shape:
            raise ShapeError(
                "Images in a batch must share a size",
                expected=tuple(shape),
                actual=tuple(image.pixels.shape),
            )
    return np.stack([image.pixels for image in images]).astype(np.float64)


def image_to_feature_map(image: ImageRGB) -> FeatureMap:
    """View an image as a ``(1, 3, width, height)`` feature map."""
    return FeatureMap(image.pixels[np.newaxis].copy())
