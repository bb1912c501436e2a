"""Exception hierarchy shared across the package.

Callers that need to distinguish failure classes (shape vs. domain vs.
file-format problems) catch these instead of bare ValueError.
"""


class SfmProbeError(Exception):
    """Base class for all package errors."""


class ShapeError(SfmProbeError, ValueError):
    """Operands have incompatible or unexpected shapes."""


class DomainError(SfmProbeError, ValueError):
    """A value is outside the operation's domain (empty input, bad range)."""


class ConfigError(SfmProbeError, ValueError):
    """A configuration object is internally inconsistent or incompatible."""


class UndefinedCorrelationError(DomainError):
    """Correlation requested on a constant vector; the result is undefined."""


class NonFiniteGradientError(SfmProbeError, ValueError):
    """A gradient contains NaN/Inf; the optimizer update was rejected."""


class TrainingDivergedError(SfmProbeError, RuntimeError):
    """The training loss became non-finite."""


class AlignmentError(SfmProbeError, ValueError):
    """Per-member predictions do not cover identical sample-id sets."""


class FeatureFileError(SfmProbeError, ValueError):
    """Base class for binary feature/checkpoint container problems."""


class BadMagicError(FeatureFileError):
    """File does not start with the expected magic bytes."""


class VersionError(FeatureFileError):
    """Container version is not supported."""


class TruncatedFileError(FeatureFileError):
    """File ends before the declared payload/checksum is complete."""


class ChecksumError(FeatureFileError):
    """Stored payload checksum does not match the recomputed one."""


class NonFiniteValueError(FeatureFileError):
    """Payload contains NaN/Inf values."""


class ManifestError(SfmProbeError, ValueError):
    """Manifest document failed validation."""
