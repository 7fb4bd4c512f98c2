"""File formats: FMAP tensors, PPM images and model checkpoints."""

from fctl.storage.checkpoints import load_checkpoint, save_checkpoint
from fctl.storage.images import read_ppm, write_ppm
from fctl.storage.tensors import decode_tensor, encode_tensor, read_tensor_file, write_tensor_file

__all__ = [
    "decode_tensor",
    "encode_tensor",
    "load_checkpoint",
    "read_ppm",
    "read_tensor_file",
    "save_checkpoint",
    "write_ppm",
    "write_tensor_file",
]
