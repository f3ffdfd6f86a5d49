"""Domain exceptions shared across the toolkit."""


class SparsedynError(Exception):
    """Base class for all toolkit errors."""


class DataQualityError(SparsedynError):
    """Input data contains non-finite or otherwise unusable values."""


class DegenerateScaleError(SparsedynError):
    """A signal cannot be normalised because its max-abs is zero."""


class RankDeficiencyError(SparsedynError):
    """Normal equations are singular; a positive ridge penalty is required."""


class DivergenceError(SparsedynError):
    """The ODE integrator failed before reaching the end of the run."""


class LibraryMismatchError(SparsedynError):
    """Two objects assume different candidate-term libraries."""


class TrajectoryFormatError(SparsedynError):
    """A trajectory file violates the CSV schema."""


class ConfigError(SparsedynError):
    """A run configuration is malformed; message lists offending keys."""
