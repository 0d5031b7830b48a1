"""Locale-independent number parsing for text inputs."""

import math
import re
from pathlib import Path
from typing import Optional, Union

from libs.errors import FormatError

# Decimal point only; no thousands separators, no locale forms like "1,5".
_REAL = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_INTEGER_VALUED = re.compile(r"^\+?\d+(\.0*)?$")


def parse_real(text: str, path: Union[str, Path], line: Optional[int] = None) -> float:
    value = text.strip()
    if not _REAL.match(value):
        raise FormatError(f"not a number: {text!r}", path, line)
    number = float(value)
    if not math.isfinite(number):
        raise FormatError(f"number out of range: {text!r}", path, line)
    return number


def parse_non_negative(text: str, path: Union[str, Path], line: Optional[int] = None) -> float:
    number = parse_real(text, path, line)
    if number < 0:
        raise FormatError(f"negative value {text.strip()!r}", path, line)
    return number


def parse_count(text: str, path: Union[str, Path], line: Optional[int] = None) -> int:
    """Non-negative integer, optionally written with a zero fractional part ("12.0")."""
    value = text.strip()
    if value.startswith("-") and _REAL.match(value):
        raise FormatError(f"negative value {value!r}", path, line)
    if not _INTEGER_VALUED.match(value):
        raise FormatError(f"not a non-negative integer: {text!r}", path, line)
    return int(value.split(".")[0].lstrip("+") or "0")
