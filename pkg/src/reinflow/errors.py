"""Exception types shared across the package.

Exit-code mapping for the CLI lives in :mod:`reinflow.harness.cli`.
"""


class ReinflowError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ReinflowError):
    """Invalid configuration, shapes, or arguments."""


class NumericError(ReinflowError):
    """Non-finite or otherwise invalid numerical values encountered."""

    def __init__(self, message: str, *, context: str | None = None):
        super().__init__(message if context is None else f"{message} ({context})")
        self.context = context


class ContractViolationError(ReinflowError):
    """A caller broke a documented precondition (e.g. out-of-range actions)."""


class CheckpointError(ReinflowError):
    """Missing, corrupt, or version-incompatible checkpoint."""
