"""Parametric synthesizers for non-ideal images.

Each synthesizer maps an ideal :class:`ImageRGB` to a content-identical
degraded counterpart. All randomness comes from a seeded :class:`Rng`, so
identical inputs always give bit-identical outputs.
"""

import logging
import math
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from fctl.core.exceptions import DomainError, ShapeError
from fctl.core.registry import call_degrader, register_degrader
from fctl.core.tensor import ImageRGB
from fctl.degrade.rng import MASK64, Rng, derive_seed
from fctl.loss.sobel import pad_edge

logger = logging.getLogger(__name__)


class DegradeKind(str, Enum):
    """Supported degradation kinds."""

    RAIN = "rain"
    FOG = "fog"
    DARK = "dark"
    BAYER = "bayer"


class DegradeSpec(BaseModel):
    """One non-ideal transform.

    Attributes:
        kind: Which synthesizer to run
        intensity: Strength in [0, 1]; ignored by ``bayer``
        seed: Seed of the random stream (rain streaks, read noise)
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: DegradeKind = DegradeKind.FOG
    intensity: float = Field(0.6, ge=0, le=1)
    seed: int = Field(0, ge=0, le=MASK64)


class DegradeConstants(BaseModel):
    """Tunable constants of the synthesizers (defaults are the documented ones)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    fog_airlight: float = Field(0.9, ge=0, le=1)
    fog_extinction: float = Field(3.0, ge=0)
    fog_depth_near: float = Field(0.2, ge=0)
    fog_depth_far: float = Field(1.0, ge=0)

    rain_density: float = Field(0.02, ge=0)
    rain_length_min: float = Field(8.0, gt=0)
    rain_length_max: float = Field(16.0, gt=0)
    rain_angle_min: float = 80.0
    rain_angle_max: float = 100.0
    rain_brightness: float = Field(0.25, ge=0)
    rain_blur_threshold: float = Field(0.5, ge=0, le=1)

    dark_gain_drop: float = Field(0.8, ge=0, le=1)
    dark_gamma_slope: float = Field(1.5, ge=0)
    dark_read_noise: float = Field(0.02, ge=0)


DEFAULT_CONSTANTS = DegradeConstants()


def _check_intensity(intensity: float) -> None:
    if not 0.0 <= intensity <= 1.0:
        raise DomainError("intensity", intensity, "in [0, 1]")


def box_blur3(values: np.ndarray) -> np.ndarray:
    """3x3 mean filter over the last two axes with replicate padding."""
    w, h = values.shape[-2:]
    padded = pad_edge(values, 1)
    total = np.zeros_like(values)
    for i in range(3):
        for j in range(3):
            total += padded[..., i : i + w, j : j + h]
    return total / 9.0


@register_degrader(DegradeKind.FOG.value)
def apply_fog(
    image: ImageRGB, intensity: float, constants: DegradeConstants = DEFAULT_CONSTANTS
) -> ImageRGB:
    """Blend toward airlight with a transmission falling off with depth.

    ``out = img * t + L * (1 - t)`` with ``t = exp(-k * d(y))``,
    ``k = 3 * intensity`` and a depth ramp from 1.0 at the top row to 0.2 at
    the bottom row.

    Raises:
        DomainError: If intensity is outside [0, 1]
    """
    _check_intensity(intensity)
    height = image.height
    rows = np.arange(height, dtype=np.float64)
    fraction = rows / (height - 1) if height > 1 else np.zeros(1)
    depth = constants.fog_depth_far - (constants.fog_depth_far - constants.fog_depth_near) * fraction
    transmission = np.exp(-constants.fog_extinction * intensity * depth)
    # broadcast over (channel, width, height)
    t = transmission[np.newaxis, np.newaxis, :]
    out = image.pixels * t + constants.fog_airlight * (1.0 - t)
    return ImageRGB(np.clip(out, 0.0, 1.0))


def _streak_layer(
    width: int, height: int, count: int, rng: Rng, constants: DegradeConstants
) -> np.ndarray:
    layer = np.zeros((width, height))
    if count == 0:
        return layer
    draws = rng.uniform(4 * count).reshape(count, 4)
    for u_x, u_y, u_len, u_angle in draws:
        x0 = u_x * width
        y0 = u_y * height
        length = constants.rain_length_min + u_len * (
            constants.rain_length_max - constants.rain_length_min
        )
        angle = math.radians(
            constants.rain_angle_min + u_angle * (constants.rain_angle_max - constants.rain_angle_min)
        )
        steps = np.arange(0.0, length, 0.5)
        px = x0 + steps * math.cos(angle)
        py = y0 + steps * math.sin(angle)
        ix = np.floor(px).astype(np.int64)
        iy = np.floor(py).astype(np.int64)
        fx = px - ix
        fy = py - iy
        # bilinear splat of every sample onto its four neighbours
        for dx, dy, weight in (
            (0, 0, (1 - fx) * (1 - fy)),
            (1, 0, fx * (1 - fy)),
            (0, 1, (1 - fx) * fy),
            (1, 1, fx * fy),
        ):
            cx, cy = ix + dx, iy + dy
            inside = (cx >= 0) & (cx < width) & (cy >= 0) & (cy < height)
            np.maximum.at(layer, (cx[inside], cy[inside]), weight[inside])
    return layer


@register_degrader(DegradeKind.RAIN.value, uses_seed=True)
def apply_rain(
    image: ImageRGB,
    intensity: float,
    seed: int,
    constants: DegradeConstants = DEFAULT_CONSTANTS,
) -> ImageRGB:
    """Overlay anti-aliased bright streaks.

    ``round(intensity * 0.02 * W * H)`` streaks of 8-16 px falling at 80-100
    degrees add 0.25 brightness where they cover a pixel. Above intensity 0.5
    the streak layer is softened by a 3x3 box blur.

    Raises:
        DomainError: If intensity is outside [0, 1]
    """
    _check_intensity(intensity)
    width, height = image.width, image.height
    count = int(math.floor(intensity * constants.rain_density * width * height + 0.5))
    if count == 0:
        return ImageRGB(image.pixels)
    layer = _streak_layer(width, height, count, Rng(seed), constants)
    if intensity > constants.rain_blur_threshold:
        layer = box_blur3(layer)
    out = image.pixels + constants.rain_brightness * layer[np.newaxis]
    return ImageRGB(np.clip(out, 0.0, 1.0))


@register_degrader(DegradeKind.DARK.value, uses_seed=True)
def apply_dark(
    image: ImageRGB,
    intensity: float,
    seed: int,
    constants: DegradeConstants = DEFAULT_CONSTANTS,
    *,
    read_noise: bool = True,
) -> ImageRGB:
    """Low-light rendering: gain drop, gamma lift and Gaussian read noise.

    ``out = clamp((img * (1 - 0.8 i)) ** (1 + 1.5 i) + n)`` with ``n`` of
    standard deviation ``0.02 i``.

    Raises:
        DomainError: If intensity is outside [0, 1]
    """
    _check_intensity(intensity)
    gain = 1.0 - constants.dark_gain_drop * intensity
    gamma = 1.0 + constants.dark_gamma_slope * intensity
    out = np.power(image.pixels * gain, gamma)
    std = constants.dark_read_noise * intensity
    if read_noise and std > 0:
        noise = Rng(seed).normal(out.size, std=std).reshape(out.shape)
        out = out + noise
    return ImageRGB(np.clip(out, 0.0, 1.0))


def bayer_mask(width: int, height: int) -> np.ndarray:
    """RGGB site mask of shape ``(3, width, height)``.

    Per 2x2 cell: R at (0, 0), G at (0, 1) and (1, 0), B at (1, 1).
    """
    x = np.arange(width)[:, np.newaxis] % 2
    y = np.arange(height)[np.newaxis, :] % 2
    mask = np.zeros((3, width, height))
    mask[0] = (x == 0) & (y == 0)
    mask[1] = (x + y) == 1
    mask[2] = (x == 1) & (y == 1)
    return mask


@register_degrader(DegradeKind.BAYER.value, uses_intensity=False)
def apply_bayer(image: ImageRGB, constants: DegradeConstants = DEFAULT_CONSTANTS) -> ImageRGB:
    """RGGB mosaic keeping three channels; unselected channels are zeroed.

    Raises:
        ShapeError: If width or height is odd
    """
    if image.width % 2 or image.height % 2:
        raise ShapeError(
            "Bayer mosaic needs even width and height",
            expected=(image.width + image.width % 2, image.height + image.height % 2),
            actual=(image.width, image.height),
        )
    return ImageRGB(image.pixels * bayer_mask(image.width, image.height))


def degrade_image(
    image: ImageRGB, spec: DegradeSpec, constants: DegradeConstants | None = None
) -> ImageRGB:
    """Apply the synthesizer named by ``spec.kind``."""
    return call_degrader(
        spec.kind.value,
        image,
        intensity=spec.intensity,
        seed=spec.seed,
        constants=constants or DEFAULT_CONSTANTS,
    )


def intensity_levels(max_intensity: float, count: int = 7) -> list[float]:
    """Evenly spaced intensities ``max * k / count`` for ``k = 1..count``."""
    _check_intensity(max_intensity)
    return [max_intensity * (k + 1) / count for k in range(count)]


def spec_for_image(spec: DegradeSpec, index: int, *, mixed_intensity: bool = False) -> DegradeSpec:
    """Per-image spec: its own seed, and optionally one of seven intensity levels.

    The derived seed depends only on ``(spec.seed, index)``, so a dataset
    degrades identically in serial and parallel runs.
    """
    intensity = spec.intensity
    if mixed_intensity and spec.kind is not DegradeKind.BAYER:
        levels = intensity_levels(spec.intensity)
        pick = Rng.derived(spec.seed, "intensity-level", index).integer(0, len(levels) - 1)
        intensity = levels[pick]
    return DegradeSpec(
        kind=spec.kind, intensity=intensity, seed=derive_seed(spec.seed, "image", index)
    )
