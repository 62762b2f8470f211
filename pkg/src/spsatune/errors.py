"""Exception hierarchy shared by the tuner modules."""


class SpsaError(Exception):
    """Base class for every error raised by this package."""


class StructuralError(SpsaError, ValueError):
    """Shapes or collections do not line up (dimension mismatch, empty list)."""


class DomainError(SpsaError, ValueError):
    """A value lies outside the domain an operation accepts."""


class NumericError(SpsaError, ArithmeticError):
    """A non-finite number reached a computation that requires finite input."""


class TemplateError(SpsaError, ValueError):
    """A command template cannot be rendered."""


class ConfigError(SpsaError, ValueError):
    """A run configuration is invalid.

    The message always names the offending field.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class CheckpointError(SpsaError):
    """A checkpoint file is missing, truncated or malformed."""


class CheckpointVersionError(CheckpointError):
    """A checkpoint was written by an incompatible format version."""


class FingerprintMismatch(SpsaError):
    """A checkpoint belongs to a different parameter space than the config."""

    def __init__(self, expected: str, found: str):
        self.expected = expected
        self.found = found
        super().__init__(
            f"parameter space fingerprint mismatch: config={expected} checkpoint={found}"
        )


class RunInterrupted(SpsaError):
    """Base for failures that stop a run but leave a consistent tuner state.

    ``state`` is the last fully completed state, suitable for checkpointing.
    """

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


class CheckpointWriteError(RunInterrupted):
    """Writing a periodic checkpoint failed."""


class ObjectiveAbort(RunInterrupted):
    """The failure policy gave up on an objective evaluation."""
