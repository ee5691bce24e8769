"""Shared exception types."""


class FormatError(ValueError):
    """A file or record does not conform to its declared on-disk format."""


class TriggerFormatError(FormatError):
    """Trigger records are unpaired, non-alternating, or out of order."""


class TriggerCountError(ValueError):
    """Trigger pair count does not match the expected frame count."""
