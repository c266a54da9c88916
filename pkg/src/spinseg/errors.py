"""Exception and warning types shared across the package.

Every error carries a stable ``code`` string used by the CLI's
machine-readable error output and by the dataset validator.
"""


class SpinsegError(Exception):
    """Base class for all package errors."""

    code = "Error"
    exit_code = 2  # input/data error by default; runtime failures override


class MalformedPlyError(SpinsegError):
    code = "MalformedPly"


class MissingFieldError(MalformedPlyError):
    code = "MissingField"


class NonFiniteCoordinateError(SpinsegError):
    code = "NonFiniteCoordinate"


class MissingFileError(SpinsegError):
    code = "MissingFile"


class MissingMaskFileError(MissingFileError):
    code = "MissingMaskFile"


class MissingEmbeddingTableError(MissingFileError):
    code = "MissingEmbeddingTable"


class BadExtrinsicsError(SpinsegError):
    code = "BadExtrinsics"


class CountMismatchError(SpinsegError):
    code = "CountMismatch"


class DimMismatchError(SpinsegError):
    code = "DimMismatch"


class DuplicateLabelError(SpinsegError):
    code = "DuplicateLabel"


class ZeroVectorError(SpinsegError):
    code = "ZeroVector"


class UnknownLabelError(SpinsegError):
    code = "UnknownLabel"


class SizeMismatchError(SpinsegError):
    code = "SizeMismatch"


class ZeroDegreeError(SpinsegError):
    code = "ZeroDegree"


class ConvergenceFailureError(SpinsegError):
    code = "ConvergenceFailure"
    exit_code = 1


class BothEmptyError(SpinsegError):
    code = "BothEmpty"


class NoFeatureError(SpinsegError):
    code = "NoFeature"


class InfeasibleCosinesError(SpinsegError):
    code = "InfeasibleCosines"


class ConfigError(SpinsegError):
    code = "ConfigError"


class DegenerateNeighborhoodWarning(UserWarning):
    """Raised when a point's neighborhood is degenerate and the normal falls back to +z."""


class EmptyFootprintWarning(UserWarning):
    """Raised when a synthetic object is invisible in every camera."""
