"""attribution-exporter: transformer checkpoints -> driftscope interchange files."""

from .errors import CheckpointLoadError, ExporterError, ProbeFileInvalid, TokenizationDrift
from .export import discover_epochs, export
from .job import ExportJob, ProbeExample, load_probe_file
from .version import __version__

__all__ = [
    "CheckpointLoadError",
    "ExportJob",
    "ExporterError",
    "ProbeExample",
    "ProbeFileInvalid",
    "TokenizationDrift",
    "__version__",
    "discover_epochs",
    "export",
    "load_probe_file",
]
