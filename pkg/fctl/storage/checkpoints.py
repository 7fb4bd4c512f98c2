"""Checkpoints of toy-net parameters.

A checkpoint is a directory with one FMAP file per parameter tensor and a
``manifest.txt`` listing ``name<TAB>file<TAB>shape`` per line, e.g.::

    stem.weight	stem.weight.fmap	8x3x3x3
    stem.bias	stem.bias.fmap	8

Tensors of rank < 4 are stored with leading unit dims and reshaped on load.
Values are stored as float32.
"""

import logging
from pathlib import Path

import numpy as np

from fctl.core.exceptions import ConfigurationError, ShapeError
from fctl.core.tensor import FeatureMap
from fctl.net.toynet import ToyNetParams
from fctl.storage.tensors import read_tensor_file, write_tensor_file

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.txt"
IMAGE_SIZE_KEY = "#image_size"


def _format_shape(shape: tuple[int, ...]) -> str:
    return "x".join(str(d) for d in shape)


def _parse_shape(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split("x"))


def save_checkpoint(params: ToyNetParams, directory: str | Path) -> Path:
    """Write ``params`` under ``directory`` and return the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [f"{IMAGE_SIZE_KEY}\t{params.image_size}"]
    for name, value in params.items():
        filename = f"{name}.fmap"
        padded = value.reshape((1,) * (4 - value.ndim) + value.shape)
        write_tensor_file(FeatureMap(padded.astype(np.float32)), directory / filename)
        lines.append(f"{name}\t{filename}\t{_format_shape(value.shape)}")
    manifest = directory / MANIFEST_NAME
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"Saved checkpoint with {len(lines) - 1} tensors to {directory}")
    return manifest


def load_checkpoint(directory: str | Path) -> ToyNetParams:
    """Read a checkpoint written by :func:`save_checkpoint`.

    Raises:
        ConfigurationError: If the manifest is malformed
        ShapeError: If a tensor file disagrees with its manifest shape
    """
    directory = Path(directory)
    manifest = directory / MANIFEST_NAME
    image_size = 64
    tensors: dict[str, np.ndarray] = {}
    for number, line in enumerate(manifest.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if fields[0] == IMAGE_SIZE_KEY and len(fields) == 2:
            image_size = int(fields[1])
            continue
        if len(fields) != 3:
            raise ConfigurationError(f"Malformed manifest line {number} in {manifest}")
        name, filename, shape_text = fields
        shape = _parse_shape(shape_text)
        fmap = read_tensor_file(directory / filename)
        if int(np.prod(fmap.dims)) != int(np.prod(shape)):
            raise ShapeError(f"Tensor {name} does not match its manifest", expected=shape, actual=fmap.dims)
        tensors[name] = fmap.as_float64().reshape(shape)
    logger.debug(f"Loaded checkpoint with {len(tensors)} tensors from {directory}")
    return ToyNetParams(tensors, image_size)
