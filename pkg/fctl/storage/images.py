"""Binary PPM (P6, maxval 255) reading and writing."""

import logging
import re
from pathlib import Path

import numpy as np

from fctl.core.exceptions import ImageFormatError
from fctl.core.tensor import ImageRGB

logger = logging.getLogger(__name__)

# Magic, width, height, maxval separated by whitespace; comments allowed
_HEADER = re.compile(rb"\AP6(?:\s+|#[^\n]*\n)+(\d+)(?:\s+|#[^\n]*\n)+(\d+)(?:\s+|#[^\n]*\n)+(\d+)\s")


def to_bytes(image: ImageRGB) -> np.ndarray:
    """Quantize to 0..255 with round-half-up; returns ``(height, width, 3)`` uint8."""
    scaled = np.floor(image.pixels * 255.0 + 0.5)
    return np.clip(scaled, 0, 255).astype(np.uint8).transpose(2, 1, 0)


def from_bytes(raster: np.ndarray) -> ImageRGB:
    """Build an image from a ``(height, width, 3)`` uint8 raster."""
    return ImageRGB(raster.transpose(2, 1, 0).astype(np.float64) / 255.0)


def encode_ppm(image: ImageRGB) -> bytes:
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + to_bytes(image).tobytes()


def decode_ppm(raw: bytes, path: str | None = None) -> ImageRGB:
    """Decode P6 bytes.

    Raises:
        ImageFormatError: On an unsupported header or short raster
    """
    match = _HEADER.match(raw)
    if not match:
        raise ImageFormatError("Not a binary PPM (P6) image", path)
    width, height, maxval = (int(g) for g in match.groups())
    if maxval != 255:
        raise ImageFormatError(f"Unsupported maxval {maxval}", path)
    if width < 1 or height < 1:
        raise ImageFormatError(f"Invalid image size {width}x{height}", path)
    start = match.end()
    expected = width * height * 3
    if len(raw) - start < expected:
        raise ImageFormatError(
            f"Raster truncated: expected {expected} bytes, got {len(raw) - start}", path
        )
    raster = np.frombuffer(raw, dtype=np.uint8, count=expected, offset=start)
    return from_bytes(raster.reshape(height, width, 3))


def write_ppm(image: ImageRGB, path: str | Path) -> None:
    path = Path(path)
    path.write_bytes(encode_ppm(image))
    logger.debug(f"Wrote {image.width}x{image.height} PPM to {path}")


def read_ppm(path: str | Path) -> ImageRGB:
    path = Path(path)
    image = decode_ppm(path.read_bytes(), str(path))
    logger.debug(f"Read {image.width}x{image.height} PPM from {path}")
    return image
