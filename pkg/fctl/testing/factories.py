"""Seeded builders of maps, images and configs for tests."""

import numpy as np

from fctl.core.tensor import Dims, FeatureMap, FeaturePyramid, ImageRGB
from fctl.degrade.rng import Rng
from fctl.training.config import TrainConfig, build_config


class MapFactory:
    """Factory for random feature maps and map pairs.

    Every draw comes from a SplitMix64 stream, so a factory built with the
    same seed produces the same sequence.

    Example:
        >>> factory = MapFactory(seed=3)
        >>> a, b = factory.pair((1, 2, 8, 8))
        >>> a.dims
        (1, 2, 8, 8)
    """

    def __init__(self, seed: int = 0, scale: float = 1.0):
        """Initialize the factory.

        Args:
            seed: Seed of the random stream
            scale: Standard deviation of the generated values
        """
        self.rng = Rng(seed)
        self.scale = scale

    def build(self, dims: Dims | tuple[int, ...], dtype: type = np.float64) -> FeatureMap:
        """One map of Gaussian values."""
        size = int(np.prod(dims))
        values = self.rng.normal(size, std=self.scale).reshape(dims)
        return FeatureMap(values.astype(dtype))

    def pair(self, dims: Dims | tuple[int, ...]) -> tuple[FeatureMap, FeatureMap]:
        return self.build(dims), self.build(dims)

    def random_dims(self, max_dims: Dims = (2, 4, 16, 16)) -> Dims:
        """Dims drawn uniformly between 1 and ``max_dims`` per axis."""
        b, c, w, h = (self.rng.integer(1, limit) for limit in max_dims)
        return (b, c, w, h)

    def pyramid(self, batch: int = 1, channels: int = 2, size: int = 16, levels: int = 3) -> FeaturePyramid:
        """Pyramid whose level k has side ``size // 2**k``."""
        return FeaturePyramid(
            tuple(self.build((batch, channels, max(1, size >> k), max(1, size >> k))) for k in range(levels))
        )


class ImageFactory:
    """Factory for random RGB images in [0, 1]."""

    def __init__(self, seed: int = 0):
        self.rng = Rng(seed)

    def build(self, width: int = 16, height: int = 16) -> ImageRGB:
        return ImageRGB(self.rng.uniform(3 * width * height).reshape(3, width, height))

    def build_batch(self, count: int, width: int = 16, height: int = 16) -> list[ImageRGB]:
        return [self.build(width, height) for _ in range(count)]


def tiny_train_config(**overrides: object) -> TrainConfig:
    """A config small enough for unit tests (a few scenes, one or two epochs)."""
    values: dict[str, object] = {"epochs": 2, "dataset_size": 12, "batch_size": 4, "eval_fraction": 0.25}
    values.update(overrides)
    return build_config(values)
