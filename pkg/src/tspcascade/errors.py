"""Exception types shared across the solver."""


class TspCascadeError(Exception):
    """Base class for all solver errors."""


class UnsupportedMetric(TspCascadeError):
    """EDGE_WEIGHT_TYPE other than EUC_2D / CEIL_2D."""


class MalformedFile(TspCascadeError):
    """TSPLIB file missing sections or with inconsistent counts."""


class InvalidPermutation(TspCascadeError):
    """Tour order is not a bijection on 0..n-1."""


class DimensionMismatch(TspCascadeError):
    """Weight tensors disagree with each other or with the graph."""


class BadMagic(TspCascadeError):
    """Weight file does not start with the expected magic."""


class VersionMismatch(TspCascadeError):
    """Weight file version is unsupported."""


class TruncatedFile(TspCascadeError):
    """Weight file ends mid-tensor or fails its checksum."""


class EmptyTrace(TspCascadeError):
    """A convergence trace with no recorded solution."""


class DegenerateSamples(TspCascadeError):
    """Policy fit requested on samples with a single distinct size."""
