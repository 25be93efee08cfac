"""Exception types shared across the pipeline."""


class CkdError(Exception):
    """Base class for every error raised by this package."""


class ParseError(CkdError):
    """A dataset file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(CkdError):
    """Data does not match the declared schema."""


class ConfigError(CkdError, ValueError):
    """A configuration value violates its documented bounds."""


class TrainingError(CkdError):
    """Model fitting diverged or was given degenerate inputs."""


class DimensionError(CkdError, ValueError):
    """Feature count of the input does not match the model."""


class StageError(CkdError):
    """A pipeline stage failed; carries the stage tag and the partial report."""

    def __init__(self, stage, cause, partial_report=None):
        self.stage = stage
        self.cause = cause
        self.partial_report = partial_report or {}
        super().__init__(f"[{stage}] {cause}")
