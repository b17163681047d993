"""Exception hierarchy.

Errors split into two families so the CLI can map them onto exit codes:
``DataError`` for bad inputs (exit 2) and ``NumericalError`` for
degenerate geometry (exit 3).
"""


class SuperResolutionError(Exception):
    """Base class for all package errors."""


class DataError(SuperResolutionError):
    pass


class NumericalError(SuperResolutionError):
    pass


class DimensionMismatch(DataError, ValueError):
    pass


class EmptyFrameSet(DataError, ValueError):
    pass


class EmptyPolygon(DataError, ValueError):
    pass


class MissingFile(DataError, FileNotFoundError):
    pass


class MalformedHomography(DataError, ValueError):
    pass


class InconsistentDimensions(DataError, ValueError):
    pass


class MalformedImage(DataError, ValueError):
    pass


class SingularMatrix(NumericalError, ArithmeticError):
    pass


class DegenerateProjection(NumericalError, ArithmeticError):
    pass


class SingularHomography(MalformedHomography, SingularMatrix):
    """A homography file whose matrix cannot be inverted."""
