"""Exception hierarchy shared by every stage of the toolkit."""


class NilmError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(NilmError):
    """A layer, architecture or experiment is configured inconsistently."""


class UsageError(NilmError):
    """An API was called in the wrong state or with malformed arguments."""


class IngestionError(NilmError):
    """A meter file could not be read or parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class AlignmentError(NilmError):
    """Channels share no common time span."""


class NormalizationError(NilmError):
    pass


class EmptyDatasetError(NilmError):
    """No contiguous valid run is long enough to form a window."""


class TrainingError(NilmError):
    """Training diverged (non-finite loss)."""


class PipelineError(NilmError):
    pass


class EvaluationError(NilmError):
    pass
