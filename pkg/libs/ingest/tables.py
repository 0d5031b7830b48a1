"""
CSV inputs and outputs.

Population: ``region_id,population``.
OD edges: ``origin_id,dest_id,flow`` (zero flows may be omitted).
OD dense: ``region_id,<id_1>,...,<id_N>`` then one row per origin.

Numbers use a decimal point only; thousands separators are rejected.
"""

import csv
import io
import logging
from pathlib import Path
from typing import Iterator, Literal, Mapping, Optional, Sequence, Union

import numpy as np

from libs.diffusion.odmatrix import ODMatrix
from libs.errors import FormatError, UsageError, ValidationError
from libs.utils.files import atomic_write_text
from libs.utils.numbers import parse_non_negative, parse_real
from libs.validators import validate_flow, validate_od_pair, validate_region_id

logger = logging.getLogger(__name__)

EDGE_HEADER = ["origin_id", "dest_id", "flow"]
ODFormat = Literal["edges", "dense"]


def _rows(path: Path) -> Iterator[tuple[int, list[str]]]:
    """(1-based line number, cells) for every non-blank row, header included."""
    if not path.is_file():
        raise FormatError("file not found", path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            for row in reader:
                if not row or all(not cell.strip() for cell in row):
                    continue
                yield reader.line_num, [cell.strip() for cell in row]
        except csv.Error as e:
            raise FormatError(f"malformed CSV ({e})", path, reader.line_num) from e


def _check_id(region_id: str, path: Path, line: int) -> str:
    is_valid, error = validate_region_id(region_id)
    if not is_valid:
        raise FormatError(error, path, line)
    return region_id


def _flow(text: str, path: Path, line: int) -> float:
    flow = parse_real(text, path, line)
    is_valid, error = validate_flow(flow)
    if not is_valid:
        raise FormatError(error, path, line)
    return flow


def read_population(path: Union[str, Path]) -> dict[str, float]:
    path = Path(path)
    rows = _rows(path)
    first = next(rows, None)
    if first is None:
        raise FormatError("empty file (missing header)", path, 1)
    line, header = first
    if header != ["region_id", "population"]:
        raise FormatError("header must be 'region_id,population'", path, line)

    populations: dict[str, float] = {}
    for line, row in rows:
        if len(row) != 2:
            raise FormatError(f"expected 2 columns, found {len(row)}", path, line)
        region_id = _check_id(row[0], path, line)
        if region_id in populations:
            raise FormatError(f"duplicate region_id {region_id!r}", path, line)
        populations[region_id] = parse_non_negative(row[1], path, line)
    return populations


def _number(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def write_population(path: Union[str, Path], populations: Mapping[str, float]) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["region_id", "population"])
    for region_id in sorted(populations):
        writer.writerow([region_id, _number(populations[region_id])])
    return atomic_write_text(path, buffer.getvalue())


def read_od(path: Union[str, Path], region_ids: Optional[Sequence[str]] = None) -> ODMatrix:
    """
    Read an OD CSV in edge or dense layout (detected from the header).

    Args:
        path: CSV file
        region_ids: Row/column order of the result; every referenced id must be
            in it. When omitted, the sorted ids found in the file are used.

    Returns:
        ODMatrix
    """
    path = Path(path)
    rows = _rows(path)
    first = next(rows, None)
    if first is None:
        raise FormatError("empty file (missing header)", path, 1)
    line, header = first
    if header == EDGE_HEADER:
        return _read_edges(path, rows, region_ids)
    if header and header[0] == "region_id":
        return _read_dense(path, line, header, rows, region_ids)
    raise FormatError("header must be 'origin_id,dest_id,flow' or 'region_id,<ids...>'", path, line)


def _read_edges(path: Path, rows: Iterator[tuple[int, list[str]]], region_ids: Optional[Sequence[str]]) -> ODMatrix:
    known = set(region_ids) if region_ids is not None else None
    records: dict[tuple[str, str], float] = {}
    for line, row in rows:
        if len(row) != 3:
            raise FormatError(f"expected 3 columns, found {len(row)}", path, line)
        origin, dest = _check_id(row[0], path, line), _check_id(row[1], path, line)
        is_valid, error = validate_od_pair(origin, dest, known)
        if not is_valid:
            raise ValidationError(f"{path}:{line}: {error}")
        if (origin, dest) in records:
            raise FormatError(f"duplicate pair {origin}->{dest}", path, line)
        records[(origin, dest)] = _flow(row[2], path, line)

    if region_ids is None:
        region_ids = sorted({rid for pair in records for rid in pair})
    position = {rid: k for k, rid in enumerate(region_ids)}
    F = np.zeros((len(region_ids), len(region_ids)))
    for (origin, dest), flow in records.items():
        F[position[origin], position[dest]] = flow
    return ODMatrix(tuple(region_ids), F)


def _read_dense(
    path: Path,
    header_line: int,
    header: list[str],
    rows: Iterator[tuple[int, list[str]]],
    region_ids: Optional[Sequence[str]],
) -> ODMatrix:
    columns = [_check_id(rid, path, header_line) for rid in header[1:]]
    if len(set(columns)) != len(columns):
        raise FormatError("duplicate region ids in header", path, header_line)
    if region_ids is not None:
        unknown = [rid for rid in columns if rid not in set(region_ids)]
        if unknown:
            raise ValidationError(f"{path}:{header_line}: OD matrix references unknown region(s): {', '.join(unknown)}")

    values: dict[str, np.ndarray] = {}
    for line, row in rows:
        if len(row) != len(columns) + 1:
            raise FormatError(f"expected {len(columns) + 1} columns, found {len(row)}", path, line)
        origin = _check_id(row[0], path, line)
        if origin not in columns:
            raise FormatError(f"row region {origin!r} is not in the header", path, line)
        if origin in values:
            raise FormatError(f"duplicate row for {origin!r}", path, line)
        values[origin] = np.array([_flow(cell, path, line) for cell in row[1:]])
    missing = [rid for rid in columns if rid not in values]
    if missing:
        raise FormatError(f"missing rows for {', '.join(missing)}", path)

    matrix = ODMatrix(tuple(columns), np.stack([values[rid] for rid in columns]))
    order = sorted(columns) if region_ids is None else list(region_ids)
    if region_ids is not None and len(order) != len(columns):
        F = np.zeros((len(order), len(order)))
        position = {rid: k for k, rid in enumerate(order)}
        index = [position[rid] for rid in columns]
        F[np.ix_(index, index)] = matrix.F
        return ODMatrix(tuple(order), F)
    return matrix.reindexed(order)


def write_od(matrix: ODMatrix, path: Union[str, Path], format: ODFormat = "edges") -> Path:
    """Edge layout lists non-zero flows in row-major order; dense layout writes all N x N values."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    ids = matrix.region_ids
    if format == "edges":
        writer.writerow(EDGE_HEADER)
        for i, j in zip(*np.nonzero(matrix.F)):
            writer.writerow([ids[i], ids[j], _number(matrix.F[i, j])])
    elif format == "dense":
        writer.writerow(["region_id", *ids])
        for i, origin in enumerate(ids):
            writer.writerow([origin, *(_number(v) for v in matrix.F[i])])
    else:
        raise UsageError(f"Unknown OD format {format!r}")
    path = atomic_write_text(path, buffer.getvalue())
    logger.info(f"Wrote {matrix.n_regions}x{matrix.n_regions} OD matrix to {path} ({format})")
    return path


SPLITS = ("train", "val", "test")


def read_split(path: Union[str, Path]) -> dict[str, list[str]]:
    """``city_id,split`` CSV -> {split: sorted city ids} for train/val/test."""
    path = Path(path)
    rows = _rows(path)
    first = next(rows, None)
    if first is None:
        raise FormatError("empty file (missing header)", path, 1)
    line, header = first
    if header != ["city_id", "split"]:
        raise FormatError("header must be 'city_id,split'", path, line)

    assignment: dict[str, list[str]] = {name: [] for name in SPLITS}
    seen = set()
    for line, row in rows:
        if len(row) != 2:
            raise FormatError(f"expected 2 columns, found {len(row)}", path, line)
        city_id, split = _check_id(row[0], path, line), row[1]
        if split not in assignment:
            raise FormatError(f"split must be one of {', '.join(SPLITS)}, got {split!r}", path, line)
        if city_id in seen:
            raise FormatError(f"duplicate city_id {city_id!r}", path, line)
        seen.add(city_id)
        assignment[split].append(city_id)
    return {name: sorted(ids) for name, ids in assignment.items()}


def write_split(path: Union[str, Path], assignment: Mapping[str, Sequence[str]]) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["city_id", "split"])
    for name in SPLITS:
        for city_id in sorted(assignment.get(name, ())):
            writer.writerow([city_id, name])
    return atomic_write_text(path, buffer.getvalue())
