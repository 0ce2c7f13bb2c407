"""Exception hierarchy shared by all pipeline stages."""


class SemFuseError(Exception):
    """Base class for every error raised by semfuse."""


class EmptyTrack(SemFuseError, ValueError):
    pass


class TimestampOutOfRange(SemFuseError, ValueError):
    pass


class EmptyImage(SemFuseError, ValueError):
    pass


class InvalidParameter(SemFuseError, ValueError):
    pass


class DimensionMismatch(SemFuseError, ValueError):
    pass


class InvalidFraction(SemFuseError, ValueError):
    pass


class BehindCamera(SemFuseError, ValueError):
    pass


class MissingCamera(SemFuseError, KeyError):
    pass


class IncompleteSpec(SemFuseError, ValueError):
    pass


class UnknownClassInTruth(SemFuseError, ValueError):
    pass


class NoHits(SemFuseError, ValueError):
    pass


class ConfigError(SemFuseError):
    exit_code = 2


class FormatError(SemFuseError):
    exit_code = 3


class StageError(SemFuseError):
    """A pipeline stage failed; ``stage`` names it (e.g. ``motion``)."""

    exit_code = 4

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
