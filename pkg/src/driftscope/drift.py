"""Per-epoch drift aggregation and stabilization-point detection.

Per-example drifts within an epoch are independent (parallel-safe); the
aggregation itself is an exactly-rounded sequential reduction, so results do
not depend on iteration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import (
    EmptyCurve,
    EpochGap,
    IncompleteProbeCoverage,
    LengthMismatch,
    TokenMismatch,
    UnknownExample,
    WindowTooLarge,
)
from .metrics import NormalizedAttribution, SimilarityKind, per_example_drift_detail

MEDIAN_VARIANTS = ("interpolated", "lower")


@dataclass(frozen=True)
class DriftCurve:
    """Dataset-level drift per epoch, optionally broken down by label.

    ``epochs`` runs from 2 to T (drift compares an epoch with its
    predecessor). ``degenerate_counts`` counts per epoch how many probe
    examples hit the degenerate-similarity substitution.
    """

    run_id: str
    epochs: tuple[int, ...]
    values: tuple[float, ...]
    probe_size: int
    per_label: Mapping[str, tuple[float, ...]] | None = None
    degenerate_counts: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        epochs = tuple(int(e) for e in self.epochs)
        values = tuple(float(v) for v in self.values)
        if len(epochs) != len(values):
            raise LengthMismatch(f"epochs/values lengths differ: {len(epochs)}/{len(values)}")
        if any(v < 0 for v in values):
            raise ValueError("drift values must be non-negative")
        if self.per_label is not None:
            for label, series in self.per_label.items():
                if len(series) != len(values):
                    raise LengthMismatch(f"per-label series for {label!r} misaligned")
        if self.degenerate_counts is not None and len(self.degenerate_counts) != len(values):
            raise LengthMismatch("degenerate_counts misaligned with values")
        object.__setattr__(self, "epochs", epochs)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class RspResult:
    """Outcome of the stabilization scan.

    ``rsp_epoch`` is the earliest epoch whose ``window``-epoch mean drift
    stays at or below ``tau``; ``None`` means the run never stabilized.
    ``window_means`` holds the mean for every candidate epoch examined.
    """

    rsp_epoch: int | None
    tau: float
    window: int
    window_means: tuple[float, ...]

    @property
    def stabilized(self) -> bool:
        return self.rsp_epoch is not None


def dataset_drift(per_example: Mapping[str, float], probe_size: int) -> float:
    """Mean per-example drift over the full probe set."""
    if probe_size <= 0 or len(per_example) != probe_size:
        raise IncompleteProbeCoverage(
            f"expected {probe_size} probe examples, got {len(per_example)}"
        )
    return math.fsum(per_example.values()) / probe_size


def label_conditional_drift(
    per_example: Mapping[str, float], labels: Mapping[str, str]
) -> dict[str, float]:
    """Per-label mean drifts; weighted by group size they recombine to the dataset mean."""
    groups: dict[str, list[float]] = {}
    for example_id, value in per_example.items():
        label = labels.get(example_id)
        if label is None:
            raise UnknownExample(f"no label for example {example_id!r}")
        groups.setdefault(label, []).append(value)
    return {label: math.fsum(vals) / len(vals) for label, vals in sorted(groups.items())}


def _median(values: Sequence[float], variant: str = "interpolated") -> float:
    if variant not in MEDIAN_VARIANTS:
        raise ValueError(f"median variant must be one of {MEDIAN_VARIANTS}, got {variant!r}")
    if not values:
        raise EmptyCurve("cannot take the median of an empty curve")
    ordered = sorted(values)
    n = len(ordered)
    if n % 2 == 1:
        return ordered[n // 2]
    if variant == "lower":
        return ordered[n // 2 - 1]
    return math.fsum(ordered[n // 2 - 1 : n // 2 + 1]) / 2.0


def median_threshold(curve: DriftCurve | Sequence[float], variant: str = "interpolated") -> float:
    """Data-driven stabilization threshold: the median of the drift values."""
    values = curve.values if isinstance(curve, DriftCurve) else tuple(curve)
    return _median(values, variant)


def detect_rsp(curve: DriftCurve, window: int, tau: float) -> RspResult:
    """Earliest epoch whose ``window``-epoch mean drift is <= ``tau``.

    Candidate epochs range over [first, last - window + 1] so the window
    never runs past the end of the curve. The comparison is inclusive:
    a window mean exactly equal to ``tau`` stabilizes.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    n = len(curve.values)
    if window > n:
        raise WindowTooLarge(f"window {window} exceeds curve length {n}")
    means = tuple(
        math.fsum(curve.values[i : i + window]) / window for i in range(n - window + 1)
    )
    rsp_epoch = None
    for i, mean in enumerate(means):
        if mean <= tau:
            rsp_epoch = curve.epochs[i]
            break
    return RspResult(rsp_epoch=rsp_epoch, tau=tau, window=window, window_means=means)


def run_pipeline(
    attributions: Mapping[int, Mapping[str, NormalizedAttribution]],
    kind: SimilarityKind,
    window: int,
    *,
    labels: Mapping[str, str] | None = None,
    run_id: str = "run",
    median_variant: str = "interpolated",
    tau_override: float | None = None,
) -> tuple[DriftCurve, RspResult]:
    """Drift curve plus stabilization point from per-epoch attributions.

    ``attributions`` maps epoch (1..T, contiguous) to a mapping from example
    id to that example's normalized attribution. Every epoch must cover the
    identical probe set. Deterministic for fixed inputs.
    """
    epochs = sorted(attributions)
    if not epochs or epochs != list(range(1, len(epochs) + 1)):
        raise EpochGap(f"epochs must be contiguous starting at 1, got {epochs}")
    total = len(epochs)
    if total < window + 1:
        raise WindowTooLarge(f"window {window} needs at least {window + 1} epochs, got {total}")

    probe_ids = sorted(attributions[1])
    probe_size = len(probe_ids)
    for t in epochs:
        epoch_ids = set(attributions[t])
        if epoch_ids != set(probe_ids):
            missing = sorted(set(probe_ids) - epoch_ids)
            extra = sorted(epoch_ids - set(probe_ids))
            raise IncompleteProbeCoverage(
                f"epoch {t}: probe coverage differs (missing {missing[:5]}, extra {extra[:5]})"
            )

    values: list[float] = []
    degenerate_counts: list[int] = []
    per_label_series: dict[str, list[float]] = {}
    for t in epochs[1:]:
        prev, curr = attributions[t - 1], attributions[t]
        per_example: dict[str, float] = {}
        degenerate = 0
        for example_id in probe_ids:
            try:
                detail = per_example_drift_detail(prev[example_id], curr[example_id], kind)
            except (LengthMismatch, TokenMismatch) as err:
                raise type(err)(f"epoch {t}, example {example_id}: {err}") from err
            per_example[example_id] = detail.value
            degenerate += int(detail.degenerate)
        values.append(dataset_drift(per_example, probe_size))
        degenerate_counts.append(degenerate)
        if labels is not None:
            for label, mean in label_conditional_drift(per_example, labels).items():
                per_label_series.setdefault(label, []).append(mean)

    curve = DriftCurve(
        run_id=run_id,
        epochs=tuple(epochs[1:]),
        values=tuple(values),
        probe_size=probe_size,
        per_label={k: tuple(v) for k, v in per_label_series.items()} if labels is not None else None,
        degenerate_counts=tuple(degenerate_counts),
    )
    tau = tau_override if tau_override is not None else median_threshold(curve, median_variant)
    return curve, detect_rsp(curve, window, tau)
