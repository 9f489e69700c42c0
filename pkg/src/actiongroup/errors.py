"""Exception hierarchy.

Each family maps to one CLI exit code: configuration problems exit with 2,
bad or missing data with 3 and numerical degeneracies with 4.
"""


class ActionGroupError(Exception):
    exit_code = 1


class ConfigurationError(ActionGroupError, ValueError):
    exit_code = 2


class UseSpecialCaseError(ConfigurationError):
    """Leave-one-out grouping needs at least three persons."""


class SeparationInfeasibleError(ConfigurationError):
    """Synthetic bases could not be drawn with the requested separation."""


class DataError(ActionGroupError):
    exit_code = 3


class FrameReadError(DataError, OSError):
    pass


class DimensionMismatchError(DataError, ValueError):
    pass


class MalformedMaskError(DataError, ValueError):
    pass


class EmptyPatchSetError(DataError, ValueError):
    pass


class InsufficientDataError(DataError, ValueError):
    pass


class AlignmentError(DataError, ValueError):
    pass


class NumericalDegeneracyError(ActionGroupError, ArithmeticError):
    exit_code = 4


class DegenerateMeasureError(NumericalDegeneracyError):
    """A relative measure would divide by a zero representation error."""
