from __future__ import annotations


class ExporterError(Exception):
    """Base class for exporter failures."""


class CheckpointLoadError(ExporterError):
    """A checkpoint directory is missing, misnamed, or fails to load."""


class TokenizationDrift(ExporterError):
    """An example tokenizes to different ids at different epochs; aligned
    attribution vectors would be meaningless, so the export aborts."""


class ProbeFileInvalid(ExporterError):
    """The probe-set file is malformed; the message names the offending row."""
