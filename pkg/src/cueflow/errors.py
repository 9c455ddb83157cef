"""Exception hierarchy shared across the package."""


class CueflowError(Exception):
    """Base class for every error raised by this package."""


class DataFormatError(CueflowError):
    """Malformed input data: CSV parse failures, bad schemas, bad shapes."""


class ConfigError(CueflowError):
    """Invalid, inconsistent, or unknown configuration keys/values."""


class TrainingDivergedError(CueflowError):
    """Model training produced a non-finite objective."""


class PipelineError(CueflowError):
    """Failure inside an orchestrated stage, annotated with trial/stage context."""
