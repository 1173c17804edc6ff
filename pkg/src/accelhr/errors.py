"""Exception hierarchy shared across the package.

Every error carries a short machine-readable ``category`` used by the CLI
to print single-line diagnostics and pick exit codes.
"""


class AccelHrError(Exception):
    """Base class for all package errors."""

    category = "error"


class ParseError(AccelHrError):
    """Malformed input file (bad header, wrong arity, non-numeric field)."""

    category = "parse"


class OrderingError(AccelHrError):
    """Timestamps or minute indices out of order within a series."""

    category = "ordering"


class RangeError(AccelHrError):
    """A value outside its physiological or structural bounds."""

    category = "range"


class AlignmentError(AccelHrError):
    """Accelerometer and heart-rate series share no usable minutes."""

    category = "alignment"


class ShapeError(AccelHrError):
    """Array arguments with incompatible or invalid shapes."""

    category = "shape"


class InsufficientDataError(AccelHrError):
    """Not enough samples or windows to honour a contract."""

    category = "data"


class FitError(AccelHrError):
    """Model fitting called on empty or unusable data."""

    category = "fit"


class InitError(AccelHrError):
    """Online-loop initialisation with the wrong bootstrap size."""

    category = "init"


class RunError(AccelHrError):
    """A replay stream too short or otherwise unusable for a full run."""

    category = "run"


class SensorError(AccelHrError):
    """The ground-truth heart-rate query failed mid-step."""

    category = "sensor"


class MetricError(AccelHrError):
    """Metric called on empty or mismatched prediction/truth lists."""

    category = "metric"


class ExperimentError(AccelHrError):
    """Experiment preconditions violated (too few records, bad split)."""

    category = "experiment"


class ProtocolError(AccelHrError):
    """Wire-protocol violation on the wearable/gateway link."""

    category = "protocol"


class ConfigError(AccelHrError):
    """Invalid configuration values."""

    category = "config"
