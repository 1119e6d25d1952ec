"""driftscope: attribution drift curves, stabilization detection, spur-mass diagnostics."""

from .drift import (
    DriftCurve,
    RspResult,
    dataset_drift,
    detect_rsp,
    label_conditional_drift,
    median_threshold,
    run_pipeline,
)
from .metrics import (
    DEFAULT_EPSILON,
    NormalizedAttribution,
    RawAttribution,
    SimilarityKind,
    SimilarityValue,
    normalize,
    per_example_drift,
    per_example_drift_detail,
    similarity,
    similarity_detail,
)
from .shortcut import SpurConfig, SpurMassCurve, spur_mass, spur_mass_curve
from .store import (
    AttributionRecord,
    ReportBundle,
    RunManifest,
    SummaryRow,
    analyze_dump,
    read_manifest,
    read_records,
    write_manifest,
    write_records,
    write_report_bundle,
)
from .version import __version__

__all__ = [
    "AttributionRecord",
    "DEFAULT_EPSILON",
    "DriftCurve",
    "NormalizedAttribution",
    "RawAttribution",
    "ReportBundle",
    "RspResult",
    "RunManifest",
    "SimilarityKind",
    "SimilarityValue",
    "SpurConfig",
    "SpurMassCurve",
    "SummaryRow",
    "__version__",
    "analyze_dump",
    "dataset_drift",
    "detect_rsp",
    "label_conditional_drift",
    "median_threshold",
    "normalize",
    "per_example_drift",
    "per_example_drift_detail",
    "read_manifest",
    "read_records",
    "run_pipeline",
    "similarity",
    "similarity_detail",
    "spur_mass",
    "spur_mass_curve",
    "write_manifest",
    "write_records",
    "write_report_bundle",
]
