"""Validators for OD flow records."""

import math
from typing import Any, Iterable, Optional


def validate_flow(value: Any) -> tuple[bool, Optional[str]]:
    """
    Validate a single OD flow value.

    Args:
        value: Flow in persons

    Returns:
        Tuple of (is_valid, error_message)
    """
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return False, f"Flow must be a number, got {type(value).__name__}"

    if not math.isfinite(value):
        return False, "Flow must be finite"

    if value < 0:
        return False, f"Flow must be >= 0, got {value}"

    return True, None


def validate_od_pair(origin: str, destination: str, known: Optional[Iterable[str]] = None) -> tuple[bool, Optional[str]]:
    """
    Validate the endpoints of an OD record.

    Args:
        origin: Origin region id
        destination: Destination region id
        known: Allowed region ids (skip the check when None)

    Returns:
        Tuple of (is_valid, error_message)
    """
    if not origin or not destination:
        return False, "OD record needs both origin_id and dest_id"

    if known is not None:
        known = set(known)
        unknown = [rid for rid in (origin, destination) if rid not in known]
        if unknown:
            return False, f"OD record references unknown region(s): {', '.join(dict.fromkeys(unknown))}"

    return True, None
