"""Exception hierarchy shared across the package."""


class DecumulationError(Exception):
    """Base class for every error raised by this package."""


class IngestError(DecumulationError):
    """A data file is missing, malformed, or fails its pinned digest."""


class ModelError(DecumulationError, ValueError):
    """Inputs fall outside a formula's range of validity."""


class DegenerateMomentsError(ModelError):
    """Skewness or kurtosis was requested from a zero-variance series."""


class WindowError(ModelError):
    """Series calendars do not overlap, or do not cover a requested window."""
