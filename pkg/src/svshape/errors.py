"""Exception types shared across the toolkit."""


class SvshapeError(Exception):
    """Base class for all toolkit errors."""


class UnreadableFileError(SvshapeError):
    """A tensor file is missing, truncated, or malformed."""


class IoFailureError(SvshapeError):
    """Writing an output file failed."""


class MissingProjectionError(SvshapeError):
    """A required (layer, kind) projection was not found in the checkpoint."""


class ShapeMismatchError(SvshapeError):
    """Tensor shapes are inconsistent with the expected layout."""


class RankTooLargeError(SvshapeError):
    """Requested rank exceeds the smaller dimension of a matrix."""


class NonFiniteError(SvshapeError):
    """Input contains NaN or infinite values."""


class LengthMismatchError(SvshapeError):
    """Vectors that must have equal length do not."""


class RankMismatchError(SvshapeError):
    """Spectra being compared were extracted at different ranks."""


class ZeroNormError(SvshapeError):
    """A vector has zero norm, so cosine distance is undefined."""


class TooFewSamplesError(SvshapeError):
    """Not enough samples for a stable fit or classification."""


class DegenerateSamplesError(SvshapeError):
    """Samples are all identical (zero spread), so no fit is meaningful."""


class IncompleteTableError(SvshapeError):
    """A group table does not cover every projection kind it is applied to."""
