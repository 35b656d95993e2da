"""Exception hierarchy for DetQuant.

Library code raises these; the pipeline handler turns them into result
dicts and the CLI into exit codes.
"""


class DetQuantError(Exception):
    """Base class for every error raised by the library."""


class DomainError(DetQuantError, ValueError):
    """An observation lies outside the model or quantizer domain."""


class MixingError(DetQuantError):
    """The hidden chain has no strictly positive power (not irreducible aperiodic)."""


class DegenerateDensityError(DetQuantError, ValueError):
    """A density that must be normalized has zero mass."""


class UnsupportedModelError(DetQuantError):
    """The requested operation has no algorithm for this model kind."""


class GridMismatchError(DetQuantError, ValueError):
    """Two fields that must share a grid do not."""


class InsufficientSamplesError(DetQuantError, ValueError):
    """Too few training samples for the requested codebook size."""


class ConfigError(DetQuantError):
    """Scenario configuration failed to parse or validate.

    Args:
        errors: One message per violated key or unparseable line.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__('; '.join(self.errors))


class StageError(DetQuantError):
    """A pipeline stage failed; carries the stage name and the cause."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f'{stage}: {cause}')
