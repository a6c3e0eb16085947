"""
Input validation utilities for the small-cancellation forge.

This module holds the boundary checks applied to command-line flags and
input files before any computation starts:
- Rational flags written as N/D
- Search budgets written as F,C
- Readable input paths
- Tower file payloads
"""

import re
from fractions import Fraction
from pathlib import Path

from utils.exceptions import InvalidInputError


# N/D or a bare integer, optional sign on the numerator only
RATIONAL_PATTERN = re.compile(r'^\s*(-?\d+)\s*(?:/\s*(\d+)\s*)?$')

# F,C with non-negative integers
BUDGET_PATTERN = re.compile(r'^\s*(\d+)\s*,\s*(\d+)\s*$')

TOWER_FORMAT = "forge-tower/1"

REQUIRED_TOWER_FIELDS = ('format', 'alphabet', 'stages', 'ledger')


def parse_rational(text: str, open_unit_interval: bool = False, positive: bool = False) -> Fraction:
    """
    Parse an exact rational written as N/D.

    Args:
        text: Rational text, e.g. "1/6" or "3"
        open_unit_interval: Require the value to lie strictly inside (0, 1)
        positive: Require the value to be strictly positive

    Returns:
        Fraction: The parsed value

    Raises:
        InvalidInputError: If the text is malformed or out of range

    Examples:
        >>> parse_rational("2/12")
        Fraction(1, 6)
    """
    if isinstance(text, Fraction):
        value = text
    else:
        if not isinstance(text, str):
            raise InvalidInputError("Rational value must be a string of the form N/D")
        match = RATIONAL_PATTERN.match(text)
        if not match:
            raise InvalidInputError(f"Invalid rational '{text}'. Expected N/D, e.g. 1/6")
        numerator, denominator = match.group(1), match.group(2)
        if denominator is not None and int(denominator) == 0:
            raise InvalidInputError(f"Invalid rational '{text}': zero denominator")
        value = Fraction(int(numerator), int(denominator or 1))

    if open_unit_interval and not (0 < value < 1):
        raise InvalidInputError(f"Value {value} must lie strictly between 0 and 1")
    if positive and value <= 0:
        raise InvalidInputError(f"Value {value} must be positive")
    return value


def format_rational(value: Fraction) -> str:
    """Render a Fraction as N/D (the inverse of parse_rational)."""
    return f"{value.numerator}/{value.denominator}"


def parse_budget(text) -> tuple[int, int]:
    """
    Parse a search budget written as F,C (max factors, max conjugator length).

    Lists and tuples of two integers are accepted as well, as they come
    from configuration files.

    Raises:
        InvalidInputError: If the budget is malformed or negative
    """
    if isinstance(text, (list, tuple)):
        if len(text) != 2 or not all(isinstance(v, int) and v >= 0 for v in text):
            raise InvalidInputError(f"Budget must be two non-negative integers, got {text}")
        return int(text[0]), int(text[1])
    if not isinstance(text, str):
        raise InvalidInputError("Budget must be a string of the form F,C")
    match = BUDGET_PATTERN.match(text)
    if not match:
        raise InvalidInputError(f"Invalid budget '{text}'. Expected F,C, e.g. 3,4")
    return int(match.group(1)), int(match.group(2))


def validate_input_path(path: str) -> Path:
    """
    Validate that an input file exists and is readable.

    Args:
        path: Path given on the command line

    Returns:
        Path: Resolved path

    Raises:
        InvalidInputError: If the path is empty, missing or not a file
    """
    if not path or not isinstance(path, str):
        raise InvalidInputError("Input path must be a non-empty string")
    file_path = Path(path)
    if not file_path.exists():
        raise InvalidInputError(f"Input file not found: {path}")
    if not file_path.is_file():
        raise InvalidInputError(f"Input path is not a file: {path}")
    return file_path


def validate_tower_payload(payload: dict) -> None:
    """
    Validate the structure of a parsed tower file.

    Args:
        payload: Parsed JSON object

    Raises:
        InvalidInputError: If the payload is not a tower file of a known format
    """
    if not isinstance(payload, dict):
        raise InvalidInputError("Tower file must contain a JSON object")

    for field in REQUIRED_TOWER_FIELDS:
        if field not in payload:
            raise InvalidInputError(f"Missing '{field}' field in tower file")

    if payload['format'] != TOWER_FORMAT:
        raise InvalidInputError(
            f"Unsupported tower format '{payload['format']}'. Expected '{TOWER_FORMAT}'"
        )
    if not isinstance(payload['alphabet'], list) or len(payload['alphabet']) < 2:
        raise InvalidInputError("Tower alphabet must list at least two generators")
    if not isinstance(payload['stages'], list) or not payload['stages']:
        raise InvalidInputError("Tower file must contain at least one stage")
    if not isinstance(payload['ledger'], dict):
        raise InvalidInputError("Tower ledger must be a JSON object")
