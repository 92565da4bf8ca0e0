class QnmarlError(Exception):
    """Base class for package errors."""


class ConfigError(QnmarlError, ValueError):
    """Invalid configuration value or key."""


class UsageError(QnmarlError, ValueError):
    """An operation was called with arguments outside its contract."""


class InputError(QnmarlError, ValueError):
    """Non-finite or malformed input data."""


class TrainingError(QnmarlError, RuntimeError):
    """Training diverged (non-finite loss or gradient)."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


class MitigationError(QnmarlError, ArithmeticError):
    """Readout mitigation could not be applied (singular or ill-conditioned matrix)."""
