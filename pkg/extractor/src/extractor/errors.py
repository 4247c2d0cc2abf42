class ExtractionError(Exception):
    """Base class for extractor failures."""


class JobError(ExtractionError):
    """A job-level failure: unloadable model, too many skipped events."""
