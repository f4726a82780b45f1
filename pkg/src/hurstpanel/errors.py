"""Exception hierarchy.

``ValidationError`` subclasses signal bad inputs or configuration that can be
detected before any computation runs; the CLI maps them to exit code 2.
Everything else under ``HurstPanelError`` is a data-dependent runtime failure
(exit code 1).
"""


class HurstPanelError(Exception):
    """Base class for all package errors."""


class ValidationError(HurstPanelError):
    """Invalid input file, parameter, or configuration."""


class MalformedFile(ValidationError):
    """Input file does not parse under the documented schema."""


class GapDetected(ValidationError):
    """Timestamps are not contiguous hourly steps."""


class EmptyPanel(ValidationError):
    """File contains no usable panel (no nodes, or fewer than two rows)."""


class SeriesTooShort(ValidationError):
    """Series is too short for the requested lags or transform."""


class WindowTooSmall(ValidationError):
    """Window length is incompatible with the series or the lag grid."""


class OutOfRange(ValidationError):
    """Forecast origin or lag falls outside the series."""


class PeriodOutOfRange(ValidationError):
    """Requested filter period does not map to a usable frequency bin."""


class DegenerateSeries(HurstPanelError):
    """Series admits no scaling estimate (zero moments or non-finite values)."""


class AllSeriesDegenerate(HurstPanelError):
    """Every series in the panel was degenerate; nothing to aggregate."""


class InsufficientData(HurstPanelError):
    """Not enough usable records to fit."""


class EmbeddingFailure(HurstPanelError):
    """Circulant embedding stayed non-positive after the retry limit."""
