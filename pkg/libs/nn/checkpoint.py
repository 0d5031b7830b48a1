"""
ODCKPT1 checkpoints: a flat, ordered mapping of names to arrays.

Layout (little-endian)::

    b"ODCKPT1" | u16 version | u32 count |
    count x (u16 name_len | utf-8 name | u8 dtype | u8 rank | rank x u32 dim | payload)

dtype tags: 0 = f64, 1 = f32, 2 = i64.
"""

import struct
from pathlib import Path
from typing import Mapping, Union

import numpy as np

from libs.errors import FormatError
from libs.utils.files import atomic_write_bytes

CKPT_MAGIC = b"ODCKPT1"
CKPT_VERSION = 1

_HEADER = struct.Struct("<HI")
_NAME_LEN = struct.Struct("<H")
_TENSOR_HEAD = struct.Struct("<BB")
_DIM = struct.Struct("<I")

_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<f4"), 2: np.dtype("<i8")}
_TAGS = {"f": {8: 0, 4: 1}, "i": {8: 2, 4: 2}, "u": {8: 2, 4: 2}, "b": {1: 2}}


def _tag_for(name: str, array: np.ndarray) -> int:
    tag = _TAGS.get(array.dtype.kind, {}).get(array.dtype.itemsize)
    if tag is None:
        raise FormatError(f"Cannot store {name!r} with dtype {array.dtype}")
    return tag


def save_checkpoint(path: Union[str, Path], tensors: Mapping[str, np.ndarray]) -> Path:
    """Write ``tensors`` in insertion order."""
    chunks = [CKPT_MAGIC, _HEADER.pack(CKPT_VERSION, len(tensors))]
    for name, value in tensors.items():
        array = np.asarray(value)
        tag = _tag_for(name, array)
        encoded = name.encode("utf-8")
        chunks.append(_NAME_LEN.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_TENSOR_HEAD.pack(tag, array.ndim))
        chunks.extend(_DIM.pack(d) for d in array.shape)
        chunks.append(np.ascontiguousarray(array, dtype=_DTYPES[tag]).tobytes())
    return atomic_write_bytes(path, b"".join(chunks))


def load_checkpoint(path: Union[str, Path]) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise FormatError("checkpoint not found", path)
    data = path.read_bytes()
    if not data.startswith(CKPT_MAGIC):
        raise FormatError("missing ODCKPT1 magic", path)
    offset = len(CKPT_MAGIC)

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(data):
            raise FormatError(f"truncated checkpoint while reading {what}", path)
        chunk = data[offset : offset + n]
        offset += n
        return chunk

    version, count = _HEADER.unpack(take(_HEADER.size, "header"))
    if version != CKPT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", path)

    tensors: dict[str, np.ndarray] = {}
    for index in range(count):
        (name_len,) = _NAME_LEN.unpack(take(_NAME_LEN.size, f"tensor {index} name length"))
        name = take(name_len, f"tensor {index} name").decode("utf-8", errors="replace")
        tag, rank = _TENSOR_HEAD.unpack(take(_TENSOR_HEAD.size, f"{name} header"))
        if tag not in _DTYPES:
            raise FormatError(f"{name}: unknown dtype tag {tag}", path)
        shape = tuple(_DIM.unpack(take(_DIM.size, f"{name} dims"))[0] for _ in range(rank))
        dtype = _DTYPES[tag]
        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        payload = take(size, f"{name} payload")
        if name in tensors:
            raise FormatError(f"duplicate tensor {name!r}", path)
        tensors[name] = np.frombuffer(payload, dtype=dtype).reshape(shape).copy()

    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes", path)
    return tensors
