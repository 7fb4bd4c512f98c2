"""Synthetic detection scenes with per-level objectness ground truth."""

from dataclasses import dataclass

import numpy as np

from fctl.core.exceptions import DomainError
from fctl.core.tensor import ImageRGB
from fctl.degrade.rng import Rng

SUPPORTED_SIZES = (64, 128)
LEVEL_STRIDES = (1, 2, 4)
NOISE_LATTICE = 8
MAX_PLACEMENT_ATTEMPTS = 200
MIN_OBJECTS, MAX_OBJECTS = 1, 4
MEAN_OBJECTS = (MIN_OBJECTS + MAX_OBJECTS) / 2
BACKGROUND_RANGE = (0.05, 0.35)
OBJECT_RANGE = (0.7, 1.0)

Box = tuple[int, int, int, int]


@dataclass(frozen=True, eq=False)
class Scene:
    """One image plus its ground truth.

    Attributes:
        image: The ideal (clean) image
        gt_masks: Binary ``(W/s, H/s)`` maps for strides 1, 2 and 4; a cell is 1
            where an object center falls into it
        boxes: ``(cx, cy, w, h)`` of every object in pixels
        scene_id: Identifier used to pair ideal and degraded inputs
    """

    image: ImageRGB
    gt_masks: tuple[np.ndarray, ...]
    boxes: tuple[Box, ...]
    scene_id: int

    @property
    def size(self) -> int:
        return self.image.width


def center_mask(boxes: tuple[Box, ...], size: int, stride: int) -> np.ndarray:
    """Mark the cell of each box center at the given stride."""
    mask = np.zeros((size // stride, size // stride))
    for cx, cy, _w, _h in boxes:
        mask[cx // stride, cy // stride] = 1.0
    return mask


def _value_noise(rng: Rng, size: int) -> np.ndarray:
    """Bilinear interpolation of random lattice values, shape ``(size, size)``."""
    cells = size // NOISE_LATTICE + 1
    lattice = rng.uniform(cells * cells).reshape(cells, cells)
    coords = np.arange(size) / NOISE_LATTICE
    i0 = np.floor(coords).astype(np.int64)
    t = coords - i0
    i1 = np.minimum(i0 + 1, cells - 1)
    along_x = lattice[i0, :] * (1 - t)[:, None] + lattice[i1, :] * t[:, None]
    return along_x[:, i0] * (1 - t)[None, :] + along_x[:, i1] * t[None, :]


def _overlaps(a: tuple[int, int, int, int], b: tuple[int, int, int, int], gap: int = 1) -> bool:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return not (
        ax + aw + gap <= bx or bx + bw + gap <= ax or ay + ah + gap <= by or by + bh + gap <= ay
    )


def synthesize_scene(seed: int, size: int = 64) -> Scene:
    """Build a textured scene holding 1 to 4 bright rectangles or disks.

    Objects are placed by rejection sampling so that no two overlap (a
    one-pixel gap is kept) and no two centers share a stride-4 cell.

    Args:
        seed: Scene seed; equal seeds give identical scenes
        size: Side length, 64 or 128

    Raises:
        DomainError: If size is not supported
    """
    if size not in SUPPORTED_SIZES:
        raise DomainError("size", size, f"one of {SUPPORTED_SIZES}")
    rng = Rng(seed)
    scale = size // 64

    tint = rng.uniform(3, 0.8, 1.0)
    low, high = BACKGROUND_RANGE
    noise = low + (high - low) * _value_noise(rng, size)
    pixels = tint[:, None, None] * noise[None, :, :]

    wanted = rng.integer(MIN_OBJECTS, MAX_OBJECTS)
    placed: list[tuple[int, int, int, int]] = []
    boxes: list[Box] = []
    coarse = LEVEL_STRIDES[-1]
    xs = np.arange(size)[:, None]
    ys = np.arange(size)[None, :]

    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        if len(placed) == wanted:
            break
        disk = rng.uniform_scalar() < 0.5
        w = rng.integer(5 * scale, 11 * scale)
        h = w if disk else rng.integer(5 * scale, 11 * scale)
        x0 = rng.integer(0, size - w)
        y0 = rng.integer(0, size - h)
        color = rng.uniform(3, *OBJECT_RANGE)
        rect = (x0, y0, w, h)
        cx, cy = x0 + w // 2, y0 + h // 2
        if any(_overlaps(rect, other) for other in placed):
            continue
        if any(cx // coarse == bx // coarse and cy // coarse == by // coarse for bx, by, _, _ in boxes):
            continue

        if disk:
            radius = w / 2.0
            inside = (xs - (x0 + (w - 1) / 2.0)) ** 2 + (ys - (y0 + (h - 1) / 2.0)) ** 2 <= radius**2
        else:
            inside = (xs >= x0) & (xs < x0 + w) & (ys >= y0) & (ys < y0 + h)
        pixels = np.where(inside[None, :, :], color[:, None, None], pixels)
        placed.append(rect)
        boxes.append((cx, cy, w, h))

    box_tuple = tuple(boxes)
    masks = tuple(center_mask(box_tuple, size, stride) for stride in LEVEL_STRIDES)
    return Scene(
        image=ImageRGB(np.clip(pixels, 0.0, 1.0)),
        gt_masks=masks,
        boxes=box_tuple,
        scene_id=seed,
    )


def boxes_iou(a: Box, b: Box) -> float:
    """Intersection over union of two ``(cx, cy, w, h)`` boxes."""
    ax0, ay0 = a[0] - a[2] // 2, a[1] - a[3] // 2
    bx0, by0 = b[0] - b[2] // 2, b[1] - b[3] // 2
    ix = max(0, min(ax0 + a[2], bx0 + b[2]) - max(ax0, bx0))
    iy = max(0, min(ay0 + a[3], by0 + b[3]) - max(ay0, by0))
    inter = ix * iy
    union = a[2] * a[3] + b[2] * b[3] - inter
    return inter / union if union else 0.0


def stack_masks(scenes: list[Scene]) -> list[np.ndarray]:
    """Per-level ground truth batched as ``(N, 1, W_k, H_k)``."""
    return [
        np.stack([scene.gt_masks[level] for scene in scenes])[:, np.newaxis]
        for level in range(len(LEVEL_STRIDES))
    ]
