"""Exception types shared across the pipeline."""


class CharmineError(Exception):
    """Base class for all pipeline errors."""


class ValidationError(CharmineError):
    """Invalid value: degenerate box, bad config, dangling reference, ..."""


class FormatError(CharmineError):
    """A persisted file does not parse as the expected format."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"{message} (line {line_no})"
        super().__init__(message)
        self.line_no = line_no


class VersionError(CharmineError):
    """A persisted file carries an unsupported format version."""


class TrainingError(CharmineError):
    """Training aborted: empty training set, non-finite loss, ..."""


class GenerationError(CharmineError):
    """Synthetic scene layout failed after bounded retries."""


class LockError(CharmineError):
    """Another run owns the requested output directory."""
