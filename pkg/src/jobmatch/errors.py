"""Exception types shared across the pipeline."""


class JobmatchError(Exception):
    """Base class for all library errors."""


class ResumeParseError(JobmatchError):
    """Raised when a resume record is not valid serialized JSON."""

    def __init__(self, message, byte_offset=0):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


class ResumeSchemaError(JobmatchError):
    """Raised when a mandatory field is missing or structurally wrong."""

    def __init__(self, field, message=None):
        super().__init__(message or f"missing or invalid mandatory field: {field}")
        self.field = field


class ConfigurationError(JobmatchError):
    """Invalid run or model configuration (bad k, missing vocab, version skew)."""


class ShapeError(JobmatchError):
    """Dimension mismatch between an input and a fitted model."""


class TrainingError(JobmatchError):
    """Training cannot proceed (empty vocabulary, non-finite gradients)."""


class TokenLookupError(JobmatchError, KeyError):
    """Query token not present in a fitted vocabulary."""


class LabelError(JobmatchError):
    """A record carries a label outside the frozen class maps."""


class ArtifactError(JobmatchError):
    """Artifact file missing, corrupt, or produced by a stale upstream stage."""


class LeakageError(JobmatchError):
    """A test-split record was seen while fitting an artifact."""
