"""
Custom exception classes for the small-cancellation forge.

This module defines a hierarchy of exceptions for clear error handling
and appropriate process exit codes in the command-line app.
"""

# Exit codes shared by the CLI and the exception hierarchy
EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_UNKNOWN = 2
EXIT_USAGE = 64


class ForgeError(Exception):
    """Base exception for the forge application."""

    def __init__(self, message: str, exit_code: int = EXIT_USAGE):
        """
        Initialize exception with message and process exit code.

        Args:
            message: Error description
            exit_code: Exit code reported by the CLI (default: 64)
        """
        super().__init__(message)
        self.message = message
        self.exit_code = exit_code


class InvalidInputError(ForgeError):
    """
    Raised when an input value is malformed.

    This includes:
    - Generator indices outside the alphabet
    - Relators that are trivial or not cyclically reduced
    - Relator sets over different alphabets
    - Malformed presentation files and rational flags
    """

    def __init__(self, message: str):
        super().__init__(message, exit_code=EXIT_USAGE)


class DomainError(ForgeError):
    """Raised when an operation is undefined on a well-formed input."""

    def __init__(self, message: str):
        super().__init__(message, exit_code=EXIT_USAGE)


class ParseError(ForgeError):
    """Raised when word or sentence text does not follow the grammar."""

    def __init__(self, message: str, position: int = 0):
        super().__init__(f"{message} (at position {position})", exit_code=EXIT_USAGE)
        self.position = position


class UnsupportedPrefixError(ForgeError):
    """Raised when a sentence prefix is not of the form E* A*."""

    def __init__(self, message: str):
        super().__init__(message, exit_code=EXIT_USAGE)


class InvalidSpecError(ForgeError):
    """Raised when relator parameters violate their constraints."""

    def __init__(self, message: str):
        super().__init__(message, exit_code=EXIT_USAGE)


class DegenerateSpecError(ForgeError):
    """
    Raised when a relator formula collapses under free reduction.

    This includes:
    - Cancellation between the absorbed element and the x/y tail
    - A relator that turns out to be a proper power
    """

    def __init__(self, message: str):
        super().__init__(message, exit_code=EXIT_USAGE)


class TuningFailedError(ForgeError):
    """Raised when parameter tuning exhausts its iteration cap."""

    def __init__(self, message: str, best_report=None, history: list | None = None):
        super().__init__(message, exit_code=EXIT_NEGATIVE)
        self.best_report = best_report
        self.history = history or []


class UnsoundPresentationError(ForgeError):
    """Raised when a decision needs C'(1/6) and the presentation lacks it."""

    def __init__(self, message: str):
        super().__init__(message, exit_code=EXIT_UNKNOWN)


class BudgetExceededError(ForgeError):
    """Raised when an exhaustive enumeration would exceed its budget."""

    def __init__(self, message: str):
        super().__init__(message, exit_code=EXIT_UNKNOWN)


class InvalidMorphismError(ForgeError):
    """Raised when a relator image is not trivial in the target quotient."""

    def __init__(self, message: str, relator=None):
        super().__init__(message, exit_code=EXIT_NEGATIVE)
        self.relator = relator


class InvalidPoisonError(ForgeError):
    """Raised when a proposed poison kills some element of V."""

    def __init__(self, message: str):
        super().__init__(message, exit_code=EXIT_NEGATIVE)


class UncertifiedCertificateError(ForgeError):
    """Raised when a certificate is used before a stage has certified it."""

    def __init__(self, message: str):
        super().__init__(message, exit_code=EXIT_USAGE)


class StageOutOfRangeError(ForgeError):
    """Raised when a tower stage index does not exist."""

    def __init__(self, message: str):
        super().__init__(message, exit_code=EXIT_USAGE)


class ConfigurationError(ForgeError):
    """
    Raised when configuration cannot be loaded or validated.

    This includes:
    - Values of the wrong type or out of range
    - Unreadable App Configuration payloads
    """

    def __init__(self, message: str, original_error: Exception | None = None):
        super().__init__(message, exit_code=EXIT_USAGE)
        self.original_error = original_error
