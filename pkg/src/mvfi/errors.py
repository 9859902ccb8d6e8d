"""Exception types shared across the package."""


class MVFIError(Exception):
    """Base class for all package errors."""


class InvalidInput(MVFIError):
    """A value violates a documented precondition."""


class ParseError(MVFIError):
    """A text stream could not be parsed; carries a 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(MVFIError):
    """A configuration object or file is inconsistent."""


class FusionError(MVFIError):
    """A normalization node cannot be folded into its producer."""


class SpecError(MVFIError):
    """A quantization spec is missing a required scale."""


class BadMagicError(MVFIError):
    """A weights stream does not start with the expected magic."""


class TruncatedStreamError(MVFIError):
    """A weights stream ended before the declared payload."""


class ShapeError(MVFIError):
    """A stored tensor does not match the target graph; names the tensor."""
