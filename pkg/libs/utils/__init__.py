"""Shared utility functions for the odflow libraries."""

from libs.utils.files import atomic_write_bytes, atomic_write_text
from libs.utils.numbers import parse_count, parse_non_negative, parse_real
from libs.utils.rng import STREAMS, stream

__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "parse_real",
    "parse_non_negative",
    "parse_count",
    "STREAMS",
    "stream",
]
