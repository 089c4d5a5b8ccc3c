"""Shared exception types."""


class InvalidInputError(ValueError):
    """Raised when an operation receives non-finite or malformed input."""


class ConfigError(ValueError):
    """Raised when an experiment configuration fails validation."""


class IntegrationError(RuntimeError):
    """Raised when a time integrator cannot continue (Newton failure,
    step-size underflow, non-finite state)."""


class TrainingDiverged(RuntimeError):
    """Raised when the training loss becomes non-finite.

    Carries the last finite checkpoint so callers can salvage the run.
    """

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint
