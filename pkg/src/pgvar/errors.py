"""Exception hierarchy.

Everything raised on purpose derives from :class:`PGVARError`; most also
derive from :class:`ValueError` so generic callers can catch them as bad input.
"""


class PGVARError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(PGVARError, ValueError):
    pass


class InvalidInputError(PGVARError, ValueError):
    pass


class InvalidShapeError(PGVARError, ValueError):
    pass


class DimensionMismatchError(InvalidShapeError):
    pass


class DegenerateGraphError(PGVARError, ValueError):
    pass


class DegenerateScaleError(PGVARError, ValueError):
    pass


class SequenceFormatError(PGVARError, ValueError):
    """Malformed sequence / graph file. ``row`` is the 1-based data row, if known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class InsufficientDataError(PGVARError, ValueError):
    def __init__(self, message, segment=None):
        super().__init__(message)
        self.segment = segment


class UnsupportedError(PGVARError, ValueError):
    pass


class RankDeficiencyError(PGVARError, ValueError):
    pass


class InstabilityError(PGVARError, ArithmeticError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class UndefinedNormalizationError(PGVARError, ValueError):
    pass


class GridSearchError(PGVARError):
    """Every grid point failed; ``failures`` maps tuple -> exception."""

    def __init__(self, message, failures=None):
        super().__init__(message)
        self.failures = dict(failures or {})
