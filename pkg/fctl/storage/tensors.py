"""FMAP tensor file format.

Layout (little-endian)::

    offset  size  field
    0       4     magic b"FMAP"
    4       4     version, u32 = 1
    8       1     dtype code, u8 = 0 (float32)
    9       4     ndims, u32 = 4
    13      16    dims, 4 x u32 (batch, channels, width, height)
    29      ...   float32 payload in (b, c, x, y) C order
"""

import logging
import struct
from pathlib import Path

import numpy as np

from fctl.core.exceptions import TensorFormatError
from fctl.core.tensor import FeatureMap

logger = logging.getLogger(__name__)

MAGIC = b"FMAP"
VERSION = 1
DTYPE_F32 = 0
NDIMS = 4

_PREFIX = struct.Struct("<4sIBI")
_DIMS = struct.Struct("<4I")
HEADER_SIZE = _PREFIX.size + _DIMS.size
_PAYLOAD_DTYPE = np.dtype("<f4")


def encode_tensor(fmap: FeatureMap) -> bytes:
    """Serialize a feature map to FMAP bytes.

    float64 maps are narrowed to float32.
    """
    header = _PREFIX.pack(MAGIC, VERSION, DTYPE_F32, NDIMS) + _DIMS.pack(*fmap.dims)
    payload = np.ascontiguousarray(fmap.data, dtype=_PAYLOAD_DTYPE).tobytes(order="C")
    return header + payload


def decode_tensor(raw: bytes) -> FeatureMap:
    """Decode FMAP bytes into a float32 feature map.

    Raises:
        TensorFormatError: On bad magic, version, dtype, rank or truncation
    """
    if len(raw) < HEADER_SIZE:
        raise TensorFormatError(
            "Truncated header", offset=len(raw), expected=HEADER_SIZE, actual=len(raw)
        )
    magic, version, dtype_code, ndims = _PREFIX.unpack_from(raw, 0)
    if magic != MAGIC:
        raise TensorFormatError(f"Bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise TensorFormatError(f"Unsupported version {version}", offset=4)
    if dtype_code != DTYPE_F32:
        raise TensorFormatError(f"Unsupported dtype code {dtype_code}", offset=8)
    if ndims != NDIMS:
        raise TensorFormatError(f"Unsupported rank {ndims}", offset=9)

    dims = _DIMS.unpack_from(raw, _PREFIX.size)
    if any(d < 1 for d in dims):
        raise TensorFormatError(f"Invalid dims {dims}", offset=_PREFIX.size)

    expected = int(np.prod(dims, dtype=np.int64)) * _PAYLOAD_DTYPE.itemsize
    actual = len(raw) - HEADER_SIZE
    if actual != expected:
        raise TensorFormatError(
            "Payload length mismatch", offset=HEADER_SIZE, expected=expected, actual=actual
        )

    data = np.frombuffer(raw, dtype=_PAYLOAD_DTYPE, offset=HEADER_SIZE).reshape(dims)
    return FeatureMap(data.astype(np.float32))


def write_tensor_file(fmap: FeatureMap, path: str | Path) -> None:
    """Write a feature map to ``path`` in FMAP format."""
    path = Path(path)
    path.write_bytes(encode_tensor(fmap))
    logger.debug(f"Wrote tensor {fmap.dims} to {path}")


def read_tensor_file(path: str | Path) -> FeatureMap:
    """Read an FMAP file.

    Raises:
        TensorFormatError: If the file is not a valid FMAP container
    """
    path = Path(path)
    fmap = decode_tensor(path.read_bytes())
    logger.debug(f"Read tensor {fmap.dims} from {path}")
    return fmap
