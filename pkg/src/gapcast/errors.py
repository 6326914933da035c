"""Exception hierarchy shared by every pipeline stage."""


class GapcastError(Exception):
    """Base class for all package errors."""


class InputError(GapcastError):
    """A referenced input is missing, unreadable or semantically invalid."""


class DataFormatError(GapcastError):
    """A file does not have the expected layout."""


class NoOddsError(GapcastError):
    """A match carries no usable bookmaker odds."""


class FeatureError(GapcastError):
    """A predictor vector cannot be built for a match."""


class FitError(GapcastError):
    """The outcome model cannot be fitted on the supplied training data."""


class NotEnoughDataError(GapcastError):
    """Too little data for the requested computation."""


class ParameterDomainError(GapcastError, ValueError):
    """Parameters fall outside their admissible region."""
