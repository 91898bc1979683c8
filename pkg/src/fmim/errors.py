"""Exception taxonomy shared by all fmim modules.

Three families map onto the CLI exit codes: ConfigError -> 2,
DataError -> 3, anything else derived from FmimError -> 4.
"""


class FmimError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(FmimError):
    """Invalid configuration, preset, or usage (exit code 2)."""


class ConfigShapeError(ConfigError):
    """Architecture config fails the layer-by-layer shape walk."""


class DataError(FmimError):
    """Invalid or inconsistent input data (exit code 3)."""


# landmark_io

class MalformedRecord(DataError):
    def __init__(self, message, line=None, offset=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if offset is not None:
            loc.append(f"byte {offset}")
        suffix = f" ({', '.join(loc)})" if loc else ""
        super().__init__(f"{message}{suffix}")
        self.line = line
        self.offset = offset


class LandmarkCountMismatch(MalformedRecord):
    pass


class NonMonotoneFrameIndex(MalformedRecord):
    pass


class SequenceInvariantError(DataError):
    """A LandmarkSequence-level invariant is violated."""


class RaterTableError(DataError):
    pass


class IoFailure(DataError):
    """Underlying file I/O failed; grouped with data errors for exit codes."""


# geometry

class NonPositiveDimension(DataError):
    pass


class DegenerateEyeLine(DataError):
    pass


class DegenerateScale(DataError):
    pass


class TangentPole(DataError):
    pass


class CanonicalizationError(DataError):
    """Geometry failure during sequence canonicalization, tagged with the frame."""

    def __init__(self, frame_index, cause):
        super().__init__(f"frame {frame_index}: {cause}")
        self.frame_index = frame_index
        self.cause = cause


class TooShort(DataError):
    pass


# clipper

class WindowOutOfRange(DataError):
    pass


class ResolutionTooSmall(ConfigError):
    pass


# tensor engine

class ShapeMismatch(FmimError):
    pass


# model

class InsufficientData(DataError):
    pass


class EmptySplit(DataError):
    pass


class CorruptCheckpoint(DataError):
    pass


class VersionMismatch(DataError):
    pass


# stats

class LengthMismatch(DataError):
    pass


class ConstantInput(DataError):
    pass


class ZeroVariance(DataError):
    pass


class DegenerateVariance(DataError):
    pass


class EmptyInput(DataError):
    pass


class MisalignedParticipants(DataError):
    pass


# synthgen

class InvalidParams(DataError):
    pass
