"""
Embedding files: externally computed region embeddings.

Binary "ODEMB1" layout (little-endian)::

    b"ODEMB1" | u32 N | u32 D | N x (u16 id_len | utf-8 id | D x f32)

CSV alternative: header ``region_id,e0,...,e{D-1}`` then one row per region.
"""

import csv
import io
import struct
from pathlib import Path
from typing import Mapping, Union

import numpy as np

from libs.errors import FormatError
from libs.utils.files import atomic_write_bytes, atomic_write_text
from libs.utils.numbers import parse_real

EMB_MAGIC = b"ODEMB1"
_COUNTS = struct.Struct("<II")
_ID_LEN = struct.Struct("<H")


def load_embeddings(path: Union[str, Path]) -> dict[str, np.ndarray]:
    """Read an ODEMB1 or CSV (by ``.csv`` suffix) embedding file."""
    path = Path(path)
    if not path.is_file():
        raise FormatError("embedding file not found", path)
    if path.suffix.lower() == ".csv":
        return _load_csv(path)
    return _load_binary(path)


def _load_binary(path: Path) -> dict[str, np.ndarray]:
    data = path.read_bytes()
    if not data.startswith(EMB_MAGIC):
        raise FormatError("missing ODEMB1 magic", path)
    offset = len(EMB_MAGIC)
    if len(data) < offset + _COUNTS.size:
        raise FormatError("truncated ODEMB1 header", path)
    n, dim = _COUNTS.unpack_from(data, offset)
    offset += _COUNTS.size

    embeddings: dict[str, np.ndarray] = {}
    for index in range(n):
        if len(data) < offset + _ID_LEN.size:
            raise FormatError(f"truncated record {index}", path)
        (id_len,) = _ID_LEN.unpack_from(data, offset)
        offset += _ID_LEN.size
        end = offset + id_len + 4 * dim
        if len(data) < end:
            raise FormatError(f"truncated record {index}", path)
        try:
            region_id = data[offset : offset + id_len].decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"record {index} id is not UTF-8", path) from e
        offset += id_len
        vector = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).astype(np.float64)
        offset = end
        _add(embeddings, region_id, vector, path, f"record {index}")

    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after {n} records", path)
    return embeddings


def _load_csv(path: Path) -> dict[str, np.ndarray]:
    embeddings: dict[str, np.ndarray] = {}
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise FormatError("empty file (missing header)", path, 1)
        if not header or header[0].strip() != "region_id" or len(header) < 2:
            raise FormatError("header must be 'region_id,e0,...'", path, 1)
        dim = len(header) - 1
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != dim + 1:
                raise FormatError(
                    f"expected {dim} embedding values, found {len(row) - 1}", path, line
                )
            vector = np.array([parse_real(cell, path, line) for cell in row[1:]])
            _add(embeddings, row[0].strip(), vector, path, f"line {line}", line)
    return embeddings


def _add(
    embeddings: dict[str, np.ndarray],
    region_id: str,
    vector: np.ndarray,
    path: Path,
    where: str,
    line: Union[int, None] = None,
) -> None:
    if not region_id:
        raise FormatError(f"{where}: empty region_id", path, line)
    if region_id in embeddings:
        raise FormatError(f"duplicate region_id {region_id!r}", path, line)
    if not np.all(np.isfinite(vector)):
        raise FormatError(f"non-finite embedding for {region_id!r}", path, line)
    if embeddings:
        dim = len(next(iter(embeddings.values())))
        if len(vector) != dim:
            raise FormatError(
                f"embedding for {region_id!r} has dimension {len(vector)}, expected {dim}",
                path,
                line,
            )
    embeddings[region_id] = vector


def write_embeddings(path: Union[str, Path], embeddings: Mapping[str, np.ndarray]) -> Path:
    """Write ODEMB1, or CSV when ``path`` ends in ``.csv``; records sorted by id."""
    path = Path(path)
    ids = sorted(embeddings)
    dims = {len(embeddings[i]) for i in ids}
    if len(dims) > 1:
        raise FormatError(f"embeddings have mixed dimensions {sorted(dims)}", path)
    dim = dims.pop() if dims else 0

    if path.suffix.lower() == ".csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["region_id", *(f"e{k}" for k in range(dim))])
        for region_id in ids:
            writer.writerow([region_id, *(repr(float(v)) for v in embeddings[region_id])])
        return atomic_write_text(path, buffer.getvalue())

    chunks = [EMB_MAGIC, _COUNTS.pack(len(ids), dim)]
    for region_id in ids:
        encoded = region_id.encode("utf-8")
        chunks.append(_ID_LEN.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(np.asarray(embeddings[region_id], dtype="<f4").tobytes())
    return atomic_write_bytes(path, b"".join(chunks))
