"""Exception hierarchy shared across the toolkit."""


class CornspectError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(CornspectError, ValueError):
    """Tensor shapes do not satisfy an operation's contract."""


class ValidationError(CornspectError, ValueError):
    """Input values outside an operation's domain (labels, ranges, empty lists)."""


class UsageError(CornspectError, RuntimeError):
    """API misuse, e.g. backward invoked with a cache from different parameters."""


class DatasetLayoutError(CornspectError):
    """Dataset directory tree does not match the expected layout."""


class IngestionError(CornspectError):
    """An image file exists but could not be decoded."""


class CapacityError(CornspectError):
    """Scene placement ran out of room for the requested kernels."""


class CheckpointError(CornspectError):
    """Base class for checkpoint file problems."""


class IntegrityError(CheckpointError):
    """Checkpoint bytes are corrupt, truncated, or fail the checksum."""


class VersionError(CheckpointError):
    """Checkpoint was written with an unsupported format version."""
