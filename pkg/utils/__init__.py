"""
Utilities package for the small-cancellation forge.

This package contains cross-cutting helpers:
- validators: Boundary checks for rational flags, budgets, input paths and tower files
- exceptions: Exception hierarchy with process exit codes
- log_capture: Run reports built from captured log records
- suffix_array: Suffix ranks and capped common prefixes for piece analysis
"""

from .validators import parse_rational, format_rational, parse_budget, validate_input_path, validate_tower_payload
from .exceptions import (
    ForgeError,
    InvalidInputError,
    DomainError,
    ParseError,
    ConfigurationError,
)

__all__ = [
    'parse_rational',
    'format_rational',
    'parse_budget',
    'validate_input_path',
    'validate_tower_payload',
    'ForgeError',
    'InvalidInputError',
    'DomainError',
    'ParseError',
    'ConfigurationError',
]
