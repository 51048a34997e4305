"""Exception types shared across the pipeline."""


class GazePipelineError(Exception):
    """Base class for all pipeline errors."""


class NoTrialsFound(GazePipelineError):
    """No complete trial span was found in an ASC file."""


class MalformedEventLine(GazePipelineError):
    """An event line matched a known tag but its fields did not parse."""


class MalformedRegionLine(GazePipelineError):
    """A REGION CHAR message could not be parsed."""


class MalformedIasLine(GazePipelineError):
    """An interest-area file line could not be parsed."""


class EmptyStimulus(GazePipelineError):
    """A stimulus was requested from an empty set of character boxes."""


class MissingIasFile(GazePipelineError):
    """A trial needs stimulus coordinates but no matching IAS file exists."""

    def __init__(self, trial_id: str, filename: str | None = None):
        self.trial_id = trial_id
        self.filename = filename
        msg = f"trial {trial_id!r} has no stimulus"
        if filename:
            msg += f" (wanted IAS file {filename!r})"
        super().__init__(msg)


class MissingColumn(GazePipelineError):
    """A required column is absent from an imported table."""

    def __init__(self, column: str):
        self.column = column
        super().__init__(f"missing required column {column!r}")


class NonNumericCell(GazePipelineError):
    """A cell expected to be numeric could not be converted."""

    def __init__(self, row: int, column: str):
        self.row = row
        self.column = column
        super().__init__(f"non-numeric value in row {row}, column {column!r}")


class UnknownMethod(GazePipelineError):
    """A line-assignment method label is not implemented."""


class AlgorithmFailure(GazePipelineError):
    """A line-assignment algorithm could not produce a valid result."""

    def __init__(self, method: str, reason: str):
        self.method = method
        self.reason = reason
        super().__init__(f"{method} failed: {reason}")


class LengthMismatch(GazePipelineError):
    """Ensemble members do not cover the same fixation count."""


class ExternalTimeout(GazePipelineError):
    """An external assigner did not answer within its timeout."""


class InvalidExternalOutput(GazePipelineError):
    """An external assigner returned indices of wrong length or range."""


class InvalidConfig(GazePipelineError):
    """A configuration value or key is not acceptable."""

    def __init__(self, key: str, reason: str):
        self.key = key
        self.reason = reason
        super().__init__(f"invalid config at {key!r}: {reason}")


class BatchFailed(GazePipelineError):
    """A batch run ended with zero successfully processed trials."""
