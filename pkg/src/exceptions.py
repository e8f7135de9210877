from typing import Any

from pydantic import ValidationError

from src.constants import ExitCode


# Base custom exception class
class AppException(Exception):
    """Base exception class for application-specific exceptions."""

    def __init__(
        self,
        message: str = "An error occurred",
        exit_code: int = ExitCode.FAILURE,
        error_code: str = "INTERNAL_ERROR",
        details: dict[str, Any] | None = None,
    ):
        self.message = message
        self.exit_code = exit_code
        self.error_code = error_code
        self.details = details or {}
        super().__init__(self.message)


class ConfigurationException(AppException):
    """Exception for invalid configuration or usage."""

    def __init__(
        self,
        message: str = "Invalid configuration",
        error_code: str = "CONFIGURATION_ERROR",
        details: dict[str, Any] | None = None,
    ):
        super().__init__(
            message=message,
            exit_code=ExitCode.USAGE,
            error_code=error_code,
            details=details,
        )


class NotFoundException(AppException):
    """Exception for missing files, runs or artifacts."""

    def __init__(
        self,
        message: str = "Resource not found",
        error_code: str = "NOT_FOUND",
        details: dict[str, Any] | None = None,
    ):
        super().__init__(
            message=message,
            exit_code=ExitCode.NOT_FOUND,
            error_code=error_code,
            details=details,
        )


class ConflictException(AppException):
    """Exception for artifacts that do not fit together."""

    def __init__(
        self,
        message: str = "Conflict",
        error_code: str = "CONFLICT",
        details: dict[str, Any] | None = None,
    ):
        super().__init__(
            message=message,
            exit_code=ExitCode.CONFLICT,
            error_code=error_code,
            details=details,
        )


class ValidationFailedException(AppException):
    """Exception for structural validation failures."""

    def __init__(
        self,
        message: str = "Validation failed",
        error_code: str = "VALIDATION_FAILED",
        details: dict[str, Any] | None = None,
    ):
        super().__init__(
            message=message,
            exit_code=ExitCode.VALIDATION,
            error_code=error_code,
            details=details,
        )


class NumericException(AppException):
    """Exception for non-finite values."""

    def __init__(
        self,
        message: str = "Non-finite value encountered",
        error_code: str = "NUMERIC_ERROR",
        details: dict[str, Any] | None = None,
    ):
        super().__init__(
            message=message,
            exit_code=ExitCode.NUMERIC,
            error_code=error_code,
            details=details,
        )


# Exception handlers
def app_exception_handler(exc: AppException) -> dict[str, Any]:
    """Render an AppException as a structured error payload."""
    return {
        "error_code": exc.error_code,
        "error": exc.message,
        "details": exc.details,
        "exit_code": int(exc.exit_code),
    }


def validation_exception_handler(exc: ValidationError) -> dict[str, Any]:
    """Render pydantic validation errors (bad config files or flags)."""
    errors = []
    for error in exc.errors():
        field = ".".join(str(part) for part in error["loc"]) if error["loc"] else "unknown"
        errors.append(
            {
                "field": field,
                "type": error["type"],
                "message": error["msg"],
            }
        )

    return {
        "error_code": "VALIDATION_ERROR",
        "error": "Configuration validation failed",
        "details": {"errors": errors},
        "exit_code": int(ExitCode.USAGE),
    }


def unhandled_exception_handler(exc: Exception) -> dict[str, Any]:
    """Render any other exception."""
    return {
        "error_code": "UNHANDLED_ERROR",
        "error": "An unexpected error occurred",
        "details": {"type": type(exc).__name__, "message": str(exc)},
        "exit_code": int(ExitCode.FAILURE),
    }
