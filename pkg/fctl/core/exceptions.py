"""Custom exceptions for fctl.

This module provides a hierarchy of exceptions with helpful error messages
so that failures in loss kernels, file formats and training runs point at
their cause.
"""


class FctlError(Exception):
    """Base exception for all fctl errors.

    All fctl exceptions inherit from this class, making it easy
    to catch all toolkit-specific errors.
    """

    def __init__(self, message: str, hint: str | None = None):
        """Initialize the exception.

        Args:
            message: The error message
            hint: Optional hint for resolving the error
        """
        self.message = message
        self.hint = hint
        super().__init__(message)

    def __str__(self) -> str:
        if self.hint:
            return f"{self.message}\nHint: {self.hint}"
        return self.message


class InvalidDimsError(FctlError):
    """Raised when a tensor is built with invalid dimensions or data."""

    def __init__(self, message: str, dims: tuple[int, ...] | None = None):
        """Initialize the dims error.

        Args:
            message: The error message
            dims: The offending dimensions, if known
        """
        self.dims = dims
        hint = None
        if dims is not None:
            hint = "Every dimension of a feature map must be at least 1."
        super().__init__(message, hint)


class ShapeError(FctlError):
    """Raised when two operands (maps, pyramids, images) do not line up."""

    def __init__(
        self,
        message: str,
        expected: tuple[int, ...] | None = None,
        actual: tuple[int, ...] | None = None,
    ):
        """Initialize the shape error.

        Args:
            message: The error message
            expected: The shape that was required
            actual: The shape that was given
        """
        self.expected = expected
        self.actual = actual
        hint = None
        if expected is not None and actual is not None:
            hint = f"Expected shape {expected}, got {actual}."
        super().__init__(message, hint)


class DomainError(FctlError):
    """Raised when a scalar argument falls outside its valid range."""

    def __init__(self, name: str, value: object, allowed: str):
        """Initialize the domain error.

        Args:
            name: Name of the argument
            value: The rejected value
            allowed: Human-readable description of the valid range
        """
        self.name = name
        self.value = value
        self.allowed = allowed
        super().__init__(
            f"{name}={value!r} is out of range",
            f"{name} must be {allowed}.",
        )


class TensorFormatError(FctlError):
    """Raised when an FMAP tensor file cannot be decoded."""

    def __init__(
        self,
        message: str,
        offset: int,
        expected: int | None = None,
        actual: int | None = None,
    ):
        """Initialize the format error.

        Args:
            message: The error message
            offset: Byte offset at which decoding failed
            expected: Expected byte length (truncation errors)
            actual: Actual byte length (truncation errors)
        """
        self.offset = offset
        self.expected = expected
        self.actual = actual

        if expected is not None and actual is not None:
            message = f"{message} at byte {offset}: expected {expected} bytes, got {actual}"
            hint = "The file was probably truncated while being written."
        else:
            message = f"{message} at byte {offset}"
            hint = "Check that the file was written by fctl (magic 'FMAP', version 1)."

        super().__init__(message, hint)


class ImageFormatError(FctlError):
    """Raised when a PPM image cannot be decoded."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        hint = "Only binary PPM (P6) with maxval 255 is supported."
        super().__init__(f"{message} ({path})" if path else message, hint)


class ConfigurationError(FctlError):
    """Raised when configuration is invalid or contains unknown keys."""

    def __init__(self, message: str | None = None, key: str | None = None):
        """Initialize the configuration error.

        Args:
            message: Custom error message
            key: The offending configuration key
        """
        self.key = key

        if key and not message:
            message = f"Unknown configuration key: {key}"
            hint = "Check the key against the documented TrainConfig fields."
        else:
            hint = "Check your fctl configuration file and flags."

        super().__init__(message or "Invalid fctl configuration", hint)


class GradientCheckError(FctlError):
    """Raised when an analytic gradient disagrees with finite differences."""

    def __init__(self, max_error: float, tolerance: float, checked: int):
        """Initialize the gradient check error.

        Args:
            max_error: Largest relative error observed
            tolerance: The tolerance that was exceeded
            checked: Number of elements compared
        """
        self.max_error = max_error
        self.tolerance = tolerance
        self.checked = checked
        super().__init__(
            f"Gradient check failed: max relative error {max_error!r} "
            f"exceeds {tolerance!r} over {checked} elements",
            "Inspect eansdl_backward against finite_diff_grad on a smaller map.",
        )
