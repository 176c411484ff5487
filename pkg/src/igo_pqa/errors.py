"""Exception taxonomy.

Two families matter for the CLI exit-code contract: ``DataError`` maps to
exit code 3 (problems with user-supplied files, frames, or argument
shapes), ``NumericError`` maps to exit code 4 (degenerate or non-finite
computations and internal shape violations).
"""


class IgoPqaError(Exception):
    """Base class for all library errors."""


class DataError(IgoPqaError):
    """Invalid or unreadable input data (CLI exit code 3)."""


class NumericError(IgoPqaError):
    """Degenerate or invalid numeric computation (CLI exit code 4)."""


# -- data errors --------------------------------------------------------

class MissingFile(DataError):
    pass


class MalformedCalibration(DataError):
    pass


class MalformedPoints(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class MalformedScores(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyDataset(DataError):
    pass


class CheckpointError(DataError):
    pass


# -- numeric errors -----------------------------------------------------

class NonPositiveDMax(NumericError):
    pass


class DegenerateRange(NumericError):
    pass


class ZeroVariance(NumericError):
    pass


class NonFiniteLoss(NumericError):
    pass


class ShapeMismatch(NumericError):
    pass


class NotScalar(NumericError):
    pass


class NotDivisible(NumericError):
    pass


class OddDim(NumericError):
    pass
