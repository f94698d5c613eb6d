"""
Exception hierarchy for space-switch.

Every error is a ValueError so callers that only care about "bad input"
can catch one type, while the CLI maps the specific subclasses to exit codes.
"""


class SpaceSwitchError(ValueError):
    """Base class for all space-switch errors."""


class ModulusMismatchError(SpaceSwitchError):
    """Two operands disagree on their modulus or plaintext tag."""


class BackendMismatchError(SpaceSwitchError):
    """Handles created by different evaluators were combined."""


class LevelExhaustedError(SpaceSwitchError):
    """An operation would consume more depth than the modulus chain holds."""

    def __init__(self, message: str, stage: str | None = None):
        if stage:
            message = f"{message} (stage: {stage})"
        super().__init__(message)
        self.stage = stage


class DecryptionError(SpaceSwitchError):
    """Decryption became invalid, typically through noise overflow."""


class InfeasibleParametersError(SpaceSwitchError):
    """No parameter set in the desk-scale table satisfies the request."""


class IngestError(SpaceSwitchError):
    """A CSV file could not be parsed or holds out-of-range values."""
