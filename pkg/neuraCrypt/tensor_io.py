"""Binary formats: NCK1 key files, NCT1 tensors and 8-bit binary PGM ingestion."""
from __future__ import annotations

import logging
import pathlib
import re
import struct

import numpy as np

from neuraCrypt.bundled_data import format_version as FORMAT_VERSION
from neuraCrypt.encoder import ArchConfig, EncoderKey
from neuraCrypt.errors import FormatError, VersionError
from neuraCrypt.utils import atomic_write_bytes

logger = logging.getLogger("neuraCrypt.TensorIO")

KEY_MAGIC = b"NCK1"
KEY_STRUCT = struct.Struct("<4sHHQ6I")
TENSOR_MAGIC = b"NCT1"
TENSOR_HEADER = struct.Struct("<4sBBH")
TENSOR_DIM = struct.Struct("<Q")
DTYPE_F32 = 1

KEY_SUFFIX = ".nck"
TENSOR_SUFFIX = ".nct"
PGM_SUFFIX = ".pgm"

_PGM_FIELD = re.compile(rb"(?:\s|#[^\n]*(?:\n|\Z))*(\d+)")


def serialize_key(key: EncoderKey) -> bytes:
    arch = key.arch
    return KEY_STRUCT.pack(
        KEY_MAGIC,
        key.format_version,
        0,
        key.seed,
        arch.image_height,
        arch.image_width,
        arch.channels_in,
        arch.patch_size,
        arch.depth,
        arch.hidden_dim,
    )


def deserialize_key(data: bytes) -> EncoderKey:
    if len(data) < 4 or data[:4] != KEY_MAGIC:
        raise FormatError("Not an NCK1 key file (bad magic)")
    if len(data) != KEY_STRUCT.size:
        raise FormatError(f"Key file has {len(data)} bytes, expected {KEY_STRUCT.size}")
    _, version, _, seed, height, width, channels, patch, depth, hidden = KEY_STRUCT.unpack(data)
    if version != FORMAT_VERSION:
        raise VersionError(version, FORMAT_VERSION)
    return EncoderKey(seed, ArchConfig(height, width, channels, patch, depth, hidden), version)


def write_key(path: pathlib.Path | str, key: EncoderKey) -> pathlib.Path:
    return atomic_write_bytes(path, serialize_key(key))


def read_key(path: pathlib.Path | str) -> EncoderKey:
    return deserialize_key(pathlib.Path(path).read_bytes())


def tensor_to_bytes(array: np.ndarray) -> bytes:
    array = np.ascontiguousarray(array, dtype="<f4")
    if array.ndim > 255:
        raise FormatError(f"Tensors are limited to 255 dimensions, got {array.ndim}")
    dims = b"".join(TENSOR_DIM.pack(d) for d in array.shape)
    return TENSOR_HEADER.pack(TENSOR_MAGIC, DTYPE_F32, array.ndim, 0) + dims + array.tobytes()


def tensor_from_bytes(data: bytes) -> np.ndarray:
    if len(data) < TENSOR_HEADER.size:
        raise FormatError("Truncated NCT1 header")
    magic, dtype, ndim, _ = TENSOR_HEADER.unpack_from(data)
    if magic != TENSOR_MAGIC:
        raise FormatError("Not an NCT1 tensor file (bad magic)")
    if dtype != DTYPE_F32:
        raise FormatError(f"Unsupported NCT1 dtype {dtype}")
    offset = TENSOR_HEADER.size
    if len(data) < offset + ndim * TENSOR_DIM.size:
        raise FormatError("Truncated NCT1 dimension table")
    dims = tuple(
        TENSOR_DIM.unpack_from(data, offset + i * TENSOR_DIM.size)[0] for i in range(ndim)
    )
    offset += ndim * TENSOR_DIM.size
    expected = int(np.prod(dims, dtype=np.uint64)) * 4
    if len(data) - offset != expected:
        raise FormatError(
            f"NCT1 payload has {len(data) - offset} bytes, expected {expected} for dims {dims}"
        )
    return np.frombuffer(data, dtype="<f4", offset=offset).reshape(dims).astype(np.float32)


def write_tensor(path: pathlib.Path | str, array: np.ndarray) -> pathlib.Path:
    return atomic_write_bytes(path, tensor_to_bytes(array))


def read_tensor(path: pathlib.Path | str) -> np.ndarray:
    return tensor_from_bytes(pathlib.Path(path).read_bytes())


def parse_pgm(data: bytes) -> np.ndarray:
    """8-bit binary PGM (P5, maxval 255) to float32 (H, W) in [0, 1]."""
    if not data.startswith(b"P5"):
        if data[:2] in (b"P2", b"P1", b"P3", b"P4", b"P6"):
            raise FormatError(f"Only binary P5 PGM files are supported, got {data[:2]!r}")
        raise FormatError("Not a PGM file (bad magic)")
    fields = []
    position = 2
    while len(fields) < 3:
        match = _PGM_FIELD.match(data, position)
        if match is None:
            raise FormatError("Truncated or malformed PGM header")
        fields.append(int(match.group(1)))
        position = match.end()
    if position >= len(data) or not data[position : position + 1].isspace():
        raise FormatError("Truncated PGM header")
    position += 1
    width, height, maxval = fields
    if maxval != 255:
        raise FormatError(f"Only maxval 255 is supported, got {maxval}")
    if width == 0 or height == 0:
        raise FormatError(f"PGM has empty size {width}x{height}")
    payload = data[position:]
    if len(payload) < width * height:
        raise FormatError(f"PGM payload has {len(payload)} bytes, expected {width * height}")
    pixels = np.frombuffer(payload, dtype=np.uint8, count=width * height)
    return (pixels.reshape(height, width).astype(np.float32)) / np.float32(255.0)


def ingest_pgm(path: pathlib.Path | str) -> np.ndarray:
    return parse_pgm(pathlib.Path(path).read_bytes())


def to_pgm_bytes(image: np.ndarray) -> bytes:
    image = np.asarray(image)
    if image.ndim == 3 and image.shape[0] == 1:
        image = image[0]
    pixels = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    height, width = pixels.shape
    return b"P5\n%d %d\n255\n" % (width, height) + pixels.tobytes()


def load_image(path: pathlib.Path | str) -> np.ndarray:
    path = pathlib.Path(path)
    suffix = path.suffix.lower()
    if suffix == PGM_SUFFIX:
        return ingest_pgm(path)
    if suffix == TENSOR_SUFFIX:
        return read_tensor(path)
    raise FormatError(f"{path.name}: unsupported image format {suffix!r}")
