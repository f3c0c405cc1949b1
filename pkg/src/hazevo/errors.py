"""Exception hierarchy shared by all hazevo modules.

Every error carries a short machine-parseable ``code`` used by the CLI
("error: <CODE>: message", exit 2 for validation errors, exit 3 for
numerical failures).
"""


class HazevoError(Exception):
    """Base class; ``code`` is the stable machine-readable identifier."""

    code = "ERROR"
    exit_code = 2


class ValidationError(HazevoError):
    """Bad inputs: shapes, formats, ranges, malformed files."""

    exit_code = 2


class NumericalError(HazevoError):
    """Well-formed inputs on which the computation cannot proceed."""

    exit_code = 3


class IoError(ValidationError):
    code = "IO"


class UnsupportedFormat(ValidationError):
    code = "UNSUPPORTED_FORMAT"


class MalformedHeader(ValidationError):
    code = "MALFORMED_HEADER"


class MalformedLine(ValidationError):
    code = "MALFORMED_LINE"


class NonRigid(ValidationError):
    code = "NON_RIGID"


class DimensionMismatch(ValidationError):
    code = "DIMENSION_MISMATCH"


class InvalidDepth(ValidationError):
    code = "INVALID_DEPTH"


class InvalidAirlight(ValidationError):
    code = "INVALID_AIRLIGHT"


class InvalidSpec(ValidationError):
    code = "INVALID_SPEC"


class ConfigError(ValidationError):
    code = "CONFIG"


class LengthMismatch(ValidationError):
    code = "LENGTH_MISMATCH"


class ExtractorShapeMismatch(ValidationError):
    code = "EXTRACTOR_SHAPE_MISMATCH"


class NearSingularRotation(NumericalError):
    code = "NEAR_SINGULAR_ROTATION"


class EmptyMask(NumericalError):
    code = "EMPTY_MASK"


class NonFiniteComponent(NumericalError):
    code = "NON_FINITE_COMPONENT"


class NonFiniteObjective(NumericalError):
    code = "NON_FINITE_OBJECTIVE"


class NoValidPixels(NumericalError):
    code = "NO_VALID_PIXELS"


class DegenerateTrajectory(NumericalError):
    code = "DEGENERATE_TRAJECTORY"


class Diverged(NumericalError):
    code = "DIVERGED"
