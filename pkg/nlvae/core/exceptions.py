"""
Custom exception classes for the NLVAE super-resolution engine.
Provides structured error handling with process exit codes for the CLI boundary.
"""

from typing import Any, Dict, Optional

from nlvae.utils.constants import (
    EXIT_CONFIG_ERROR,
    EXIT_PARTIAL_FAILURE,
    EXIT_RUNTIME_ERROR,
)


class NlvaeException(Exception):
    """Base exception class for the NLVAE engine."""

    def __init__(
        self,
        message: str,
        exit_code: int = EXIT_RUNTIME_ERROR,
        details: Optional[Dict[str, Any]] = None
    ):
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)


class ConfigurationError(NlvaeException):
    """Raised when configuration is invalid or cannot be resolved."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_CONFIG_ERROR, details=details)


class ValidationError(NlvaeException):
    """Raised when command-line input validation fails."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_CONFIG_ERROR, details=details)


class ShapeError(NlvaeException):
    """Raised when tensor shapes do not satisfy an operation's contract."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_RUNTIME_ERROR, details=details)


class NumericError(NlvaeException):
    """Raised when a NaN or infinite value appears in a tensor or gradient."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_RUNTIME_ERROR, details=details)


class ContractError(NlvaeException):
    """Raised when an operation is called outside its preconditions."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_RUNTIME_ERROR, details=details)


class DegenerateInputError(NlvaeException):
    """Raised when an image is too small for the requested degradation."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_RUNTIME_ERROR, details=details)


class ImageIOError(NlvaeException):
    """Raised when an image cannot be decoded or written."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_RUNTIME_ERROR, details=details)


class CheckpointError(NlvaeException):
    """Raised when a checkpoint is unreadable or does not match the request."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_RUNTIME_ERROR, details=details)


class BenchmarkPartialFailure(NlvaeException):
    """Raised when some benchmark jobs failed and were excluded from the report."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_PARTIAL_FAILURE, details=details)
