"""Exception types raised across the package."""


class ZsecgError(Exception):
    """Base class for all package errors."""


class ParseError(ZsecgError, ValueError):
    pass


class UnsupportedFormat(ZsecgError, ValueError):
    pass


class InvalidSegment(ZsecgError, ValueError):
    pass


class Skipped(ZsecgError):
    """Raised when a beat cannot be segmented (boundary peak)."""


class UnmappedSymbol(ZsecgError, KeyError):
    pass


class EmptyTrainingSet(ZsecgError, ValueError):
    pass


class InvalidArgument(ZsecgError, ValueError):
    pass


class RankDeficient(ZsecgError, ValueError):
    pass


class Diverged(ZsecgError, FloatingPointError):
    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"non-finite entries after epoch {epoch}")


class DegenerateDistribution(ZsecgError, UserWarning):
    """Warning category for a zero-variance Gaussian fit."""


class InvalidTrainingSet(ZsecgError, ValueError):
    pass
