"""Validators for region identifiers, populations and cross-file consistency."""

import math
import re
from typing import Any, Iterable, Optional

# Region ids are written unquoted into CSV files.
_REGION_ID = re.compile(r"^[^,\"\r\n]+$")
MAX_LISTED_IDS = 10


def validate_region_id(region_id: Any) -> tuple[bool, Optional[str]]:
    """
    Validate a region identifier.

    Args:
        region_id: Identifier to validate

    Returns:
        Tuple of (is_valid, error_message)
    """
    if region_id is None or region_id == "":
        return False, "Region id is required"

    if not isinstance(region_id, str):
        return False, f"Region id must be a string, got {type(region_id).__name__}"

    if region_id != region_id.strip():
        return False, f"Region id {region_id!r} has leading or trailing whitespace"

    if not _REGION_ID.match(region_id):
        return False, f"Region id {region_id!r} must not contain commas, quotes or line breaks"

    return True, None


def validate_population(value: Any) -> tuple[bool, Optional[str]]:
    """
    Validate a region population.

    Args:
        value: Population (int or float)

    Returns:
        Tuple of (is_valid, error_message)
    """
    if value is None:
        return False, "Population is required"

    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return False, f"Population must be a number, got {type(value).__name__}"

    if not math.isfinite(value):
        return False, "Population must be finite"

    if value < 0:
        return False, f"Population must be >= 0, got {value}"

    return True, None


def _listed(ids: Iterable[str]) -> str:
    ids = sorted(ids)
    shown = ", ".join(ids[:MAX_LISTED_IDS])
    if len(ids) > MAX_LISTED_IDS:
        shown += f", ... ({len(ids)} total)"
    return shown


def validate_id_coverage(
    expected: Iterable[str], found: Iterable[str], what: str
) -> tuple[bool, Optional[str]]:
    """
    Check that ``found`` covers exactly the ``expected`` region ids.

    Args:
        expected: Region ids from the boundary file
        found: Region ids of another input
        what: Name of the other input, used in the message

    Returns:
        Tuple of (is_valid, error_message)
    """
    expected, found = set(expected), set(found)
    missing = expected - found
    unknown = found - expected
    if missing:
        return False, f"{what} has no entry for region(s): {_listed(missing)}"
    if unknown:
        return False, f"{what} names unknown region(s): {_listed(unknown)}"
    return True, None
