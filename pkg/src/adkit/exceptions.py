"""Exception types raised across the toolkit."""


class AdkitError(Exception):
    """Base class for all toolkit errors."""


class FormatError(AdkitError, ValueError):
    """A file does not follow the expected binary or text layout."""


class ManifestError(AdkitError, ValueError):
    """Manifest CSV could not be parsed or violates a dataset invariant."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InfeasibleSplitError(AdkitError, ValueError):
    pass


class DivergenceError(AdkitError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"non-finite training loss {loss!r} at epoch {epoch}")


class CheckpointError(AdkitError, ValueError):
    """Checkpoint bytes are malformed or incompatible with the requested detector."""


class DegenerateRangeError(AdkitError, ValueError):
    """Validation-normal scores span (almost) no range, so min-max scaling is undefined."""


class ConfigError(AdkitError, ValueError):
    pass


class DependencyError(AdkitError, RuntimeError):
    """A pipeline stage was run before the stage whose artifacts it consumes."""

    def __init__(self, stage, missing):
        self.stage = stage
        self.missing = missing
        super().__init__(f"stage {stage!r} requires stage {missing!r} to be completed first")


class StageError(AdkitError, RuntimeError):
    """Wraps a failure inside a pipeline stage with its cohort/seed context."""

    def __init__(self, stage, context, cause):
        self.stage = stage
        self.context = context
        self.cause = cause
        super().__init__(f"stage {stage!r} failed ({context}): {cause}")
