"""
Versioned binary container for named float64 tensors

Layout (all integers little-endian):

    magic        8 bytes   b"ALRLCKPT"
    version      uint32    1
    count        uint32    number of tensors
    per tensor:
      name_len   uint16
      name       name_len bytes, UTF-8
      ndim       uint8
      dims       ndim x uint32
      data       prod(dims) x float64
"""

import struct
import logging
from pathlib import Path
from typing import Dict, Union

import numpy as np

from ..exceptions import ConfigurationError

logger = logging.getLogger(__name__)

MAGIC = b"ALRLCKPT"
VERSION = 1


def encode_tensors(tensors: Dict[str, np.ndarray]) -> bytes:
    """Serialize tensors in insertion order"""
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, array in tensors.items():
        array = np.asarray(array, dtype="<f8")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", array.ndim))
        parts.append(struct.pack(f"<{array.ndim}I", *array.shape))
        parts.append(np.ascontiguousarray(array).tobytes())
    return b"".join(parts)


def decode_tensors(data: bytes) -> Dict[str, np.ndarray]:
    """Parse a container produced by encode_tensors"""
    offset = 0

    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(data):
            raise ConfigurationError(f"Truncated checkpoint at byte offset {offset}")
        chunk = data[offset:offset + n]
        offset += n
        return chunk

    if take(len(MAGIC)) != MAGIC:
        raise ConfigurationError("Not a checkpoint file (bad magic)")
    version, count = struct.unpack("<II", take(8))
    if version != VERSION:
        raise ConfigurationError(f"Unsupported checkpoint version {version}")

    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim))
        size = int(np.prod(dims)) if ndim else 1
        values = np.frombuffer(take(8 * size), dtype="<f8")
        tensors[name] = values.reshape(dims).astype(np.float64)

    if offset != len(data):
        raise ConfigurationError(f"Trailing bytes in checkpoint after offset {offset}")
    return tensors


def save_tensors(tensors: Dict[str, np.ndarray], path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_tensors(tensors))
    except OSError as e:
        raise OSError(f"Cannot write checkpoint {path}: {e}") from e
    logger.debug(f"Saved {len(tensors)} tensors to {path}")


def load_tensors(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise OSError(f"Cannot read checkpoint {path}: {e}") from e
    try:
        return decode_tensors(data)
    except ConfigurationError as e:
        raise ConfigurationError(f"{path}: {e}") from e
