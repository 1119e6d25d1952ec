"""Persistence and interchange: attribution records, run manifests, reports.

The newline-delimited record file and the JSON manifest are the toolkit's
public interchange contract (see README, "Interchange formats"). Raw
pre-normalization attributions are stored so epsilon and masking policy can
change at analysis time without re-running models. Floats are written as
Python's shortest round-trip decimal, so every numeric field survives a
write/read cycle exactly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .drift import DriftCurve, RspResult, run_pipeline
from .errors import (
    DuplicateKey,
    EpochGap,
    IncompleteProbeCoverage,
    SchemaViolation,
)
from .metrics import (
    DEFAULT_EPSILON,
    NormalizedAttribution,
    RawAttribution,
    SimilarityKind,
    normalize,
)
from .shortcut import SpurConfig, SpurMassCurve, spur_mass_curve
from .version import __version__

SPLITS = ("probe", "spur_probe")


@dataclass(frozen=True)
class AttributionRecord:
    """One probe example at one epoch, with raw (pre-normalization) scores."""

    run_id: str
    epoch: int
    example_id: str
    split: str
    label: str
    tokens: tuple
    attributions: tuple[float, ...]
    mask: tuple[bool, ...] | None = None

    def __post_init__(self) -> None:
        tokens = tuple(self.tokens)
        attributions = tuple(float(v) for v in self.attributions)
        mask = (True,) * len(tokens) if self.mask is None else tuple(bool(m) for m in self.mask)
        if not (len(tokens) == len(attributions) == len(mask)):
            raise SchemaViolation(
                f"record ({self.run_id}, {self.epoch}, {self.example_id}): "
                f"tokens/attributions/mask lengths differ"
            )
        if self.split not in SPLITS:
            raise SchemaViolation(
                f"record ({self.run_id}, {self.epoch}, {self.example_id}): "
                f"split must be one of {SPLITS}, got {self.split!r}"
            )
        if self.epoch < 1:
            raise SchemaViolation(
                f"record ({self.run_id}, {self.epoch}, {self.example_id}): epoch must be >= 1"
            )
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "attributions", attributions)
        object.__setattr__(self, "mask", mask)

    def key(self) -> tuple[str, int, str]:
        return (self.run_id, self.epoch, self.example_id)

    def to_raw(self) -> RawAttribution:
        return RawAttribution(values=self.attributions, token_ids=self.tokens, mask=self.mask)


def write_records(records: Iterable[AttributionRecord], path: Path | str) -> int:
    """Write records as one JSON object per line; returns the record count."""
    seen: set[tuple[str, int, str]] = set()
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            if rec.key() in seen:
                raise DuplicateKey(f"duplicate record key {rec.key()}")
            seen.add(rec.key())
            obj = {
                "run_id": rec.run_id,
                "epoch": rec.epoch,
                "example_id": rec.example_id,
                "split": rec.split,
                "label": rec.label,
                "tokens": list(rec.tokens),
                "attributions": list(rec.attributions),
            }
            if not all(rec.mask):
                obj["mask"] = list(rec.mask)
            fh.write(json.dumps(obj, allow_nan=False) + "\n")
            count += 1
    return count


def _require(obj: dict, field: str, kinds: tuple[type, ...], line: int):
    if field not in obj:
        raise SchemaViolation(f"line {line}: missing field {field!r}")
    value = obj[field]
    if isinstance(value, bool) or not isinstance(value, kinds):
        raise SchemaViolation(f"line {line}: field {field!r} has wrong type {type(value).__name__}")
    return value


def read_records(path: Path | str) -> Iterator[AttributionRecord]:
    """Stream validated records; raises on the first malformed line.

    Enforces per-record schema and file-wide key uniqueness. Epoch
    contiguity is a whole-file property checked by ``analyze_dump``.
    """
    seen: set[tuple[str, int, str]] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise SchemaViolation(f"line {line_no}: invalid JSON ({err.msg})") from err
            if not isinstance(obj, dict):
                raise SchemaViolation(f"line {line_no}: record must be a JSON object")
            run_id = _require(obj, "run_id", (str,), line_no)
            epoch = _require(obj, "epoch", (int,), line_no)
            example_id = _require(obj, "example_id", (str,), line_no)
            split = _require(obj, "split", (str,), line_no)
            label = _require(obj, "label", (str,), line_no)
            tokens = _require(obj, "tokens", (list,), line_no)
            attributions = _require(obj, "attributions", (list,), line_no)
            mask = obj.get("mask")
            for t in tokens:
                if isinstance(t, bool) or not isinstance(t, (str, int)):
                    raise SchemaViolation(f"line {line_no}: tokens must be strings or ints")
            for v in attributions:
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                    raise SchemaViolation(f"line {line_no}: attributions must be finite numbers")
            if mask is not None and any(not isinstance(m, bool) for m in mask):
                raise SchemaViolation(f"line {line_no}: mask must be booleans")
            try:
                record = AttributionRecord(
                    run_id=run_id,
                    epoch=epoch,
                    example_id=example_id,
                    split=split,
                    label=label,
                    tokens=tuple(tokens),
                    attributions=tuple(float(v) for v in attributions),
                    mask=tuple(mask) if mask is not None else None,
                )
            except SchemaViolation as err:
                raise SchemaViolation(f"line {line_no}: {err}") from err
            if record.key() in seen:
                raise DuplicateKey(f"line {line_no}: duplicate record key {record.key()}")
            seen.add(record.key())
            yield record


@dataclass(frozen=True)
class RunManifest:
    """Identity and analysis defaults for one training run.

    ``spur_config`` is a plain snapshot dict (``pos_token``, ``neg_token``,
    ``injection_prob``, ``position``, optional ``positive_label``); it stays
    JSON-shaped so exporters in any language can produce it.
    """

    run_id: str
    epochs: int
    seed: int | None
    probe_ids: tuple[str, ...]
    spur_probe_ids: tuple[str, ...]
    similarity: str
    window: int
    epsilon: float
    median_variant: str
    task_config: Mapping | None = None
    spur_config: Mapping | None = None
    val_accuracy: tuple[float, ...] | None = None
    tool_version: str = __version__


def write_manifest(manifest: RunManifest, path: Path | str) -> None:
    obj = {
        "run_id": manifest.run_id,
        "epochs": manifest.epochs,
        "seed": manifest.seed,
        "probe_ids": list(manifest.probe_ids),
        "spur_probe_ids": list(manifest.spur_probe_ids),
        "similarity": manifest.similarity,
        "window": manifest.window,
        "epsilon": manifest.epsilon,
        "median_variant": manifest.median_variant,
        "task_config": dict(manifest.task_config) if manifest.task_config else None,
        "spur_config": dict(manifest.spur_config) if manifest.spur_config else None,
        "val_accuracy": list(manifest.val_accuracy) if manifest.val_accuracy else None,
        "tool_version": manifest.tool_version,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False)
        fh.write("\n")


def read_manifest(path: Path | str) -> RunManifest:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as err:
            raise SchemaViolation(f"manifest {path}: invalid JSON ({err.msg})") from err
    try:
        return RunManifest(
            run_id=obj["run_id"],
            epochs=int(obj["epochs"]),
            seed=obj.get("seed"),
            probe_ids=tuple(obj["probe_ids"]),
            spur_probe_ids=tuple(obj.get("spur_probe_ids") or ()),
            similarity=obj.get("similarity", "spearman"),
            window=int(obj.get("window", 2)),
            epsilon=float(obj.get("epsilon", DEFAULT_EPSILON)),
            median_variant=obj.get("median_variant", "interpolated"),
            task_config=obj.get("task_config"),
            spur_config=obj.get("spur_config"),
            val_accuracy=tuple(obj["val_accuracy"]) if obj.get("val_accuracy") else None,
            tool_version=obj.get("tool_version", "unknown"),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise SchemaViolation(f"manifest {path}: {err!r}") from err


@dataclass(frozen=True)
class SummaryRow:
    """Table-style one-line summary of a run."""

    rsp_epoch: int | None
    tau: float
    window: int
    acc_at_rsp: float | None
    peak_accuracy: float | None


@dataclass(frozen=True)
class ReportBundle:
    """Everything reported for one run: curves, stabilization, summary."""

    run_id: str
    drift: DriftCurve
    rsp: RspResult
    spur: SpurMassCurve | None
    accuracy: tuple[float, ...] | None
    summary: SummaryRow


def build_bundle(
    run_id: str,
    drift: DriftCurve,
    rsp: RspResult,
    spur: SpurMassCurve | None,
    accuracy: tuple[float, ...] | None,
) -> ReportBundle:
    acc_at_rsp = None
    peak = None
    if accuracy:
        peak = max(accuracy)
        if rsp.stabilized:
            acc_at_rsp = accuracy[rsp.rsp_epoch - 1]
    return ReportBundle(
        run_id=run_id,
        drift=drift,
        rsp=rsp,
        spur=spur,
        accuracy=tuple(accuracy) if accuracy else None,
        summary=SummaryRow(
            rsp_epoch=rsp.rsp_epoch,
            tau=rsp.tau,
            window=rsp.window,
            acc_at_rsp=acc_at_rsp,
            peak_accuracy=peak,
        ),
    )


def _group_split(
    records: list[AttributionRecord], ids: tuple[str, ...], epochs: int, split: str, epsilon: float
) -> tuple[dict[int, dict[str, NormalizedAttribution]], dict[str, str]]:
    wanted = set(ids)
    by_epoch: dict[int, dict[str, NormalizedAttribution]] = {t: {} for t in range(1, epochs + 1)}
    labels: dict[str, str] = {}
    for rec in records:
        if rec.split != split or rec.example_id not in wanted:
            continue
        if rec.epoch > epochs:
            raise EpochGap(
                f"record ({rec.run_id}, {rec.epoch}, {rec.example_id}) exceeds "
                f"manifest epoch count {epochs}"
            )
        by_epoch[rec.epoch][rec.example_id] = normalize(rec.to_raw(), epsilon)
        known = labels.setdefault(rec.example_id, rec.label)
        if known != rec.label:
            raise SchemaViolation(
                f"example {rec.example_id}: label changes across epochs ({known!r} vs {rec.label!r})"
            )
    for t in range(1, epochs + 1):
        missing = wanted - set(by_epoch[t])
        if missing:
            raise IncompleteProbeCoverage(
                f"epoch {t}: missing {split} records for {sorted(missing)[:5]}"
                + ("..." if len(missing) > 5 else "")
            )
    return by_epoch, labels


def analyze_dump(
    records_path: Path | str,
    manifest_path: Path | str,
    *,
    similarity: str | None = None,
    window: int | None = None,
    epsilon: float | None = None,
    median_variant: str | None = None,
    tau_override: float | None = None,
) -> ReportBundle:
    """Run the full drift/stabilization/spur analysis over a dumped run.

    Produces outputs identical to running the in-memory pipelines on the
    same data; keyword arguments override the manifest's analysis defaults.
    """
    manifest = read_manifest(manifest_path)
    kind = SimilarityKind(similarity or manifest.similarity)
    window = window if window is not None else manifest.window
    epsilon = epsilon if epsilon is not None else manifest.epsilon
    median_variant = median_variant or manifest.median_variant

    records = [r for r in read_records(records_path) if r.run_id == manifest.run_id]
    present = sorted({r.epoch for r in records})
    if present != list(range(1, manifest.epochs + 1)):
        raise EpochGap(
            f"run {manifest.run_id}: expected epochs 1..{manifest.epochs}, found {present}"
        )

    probe, labels = _group_split(records, manifest.probe_ids, manifest.epochs, "probe", epsilon)
    curve, rsp = run_pipeline(
        probe,
        kind,
        window,
        labels=labels,
        run_id=manifest.run_id,
        median_variant=median_variant,
        tau_override=tau_override,
    )

    spur = None
    if manifest.spur_config and manifest.spur_probe_ids:
        snap = manifest.spur_config
        config = SpurConfig(
            pos_token=snap["pos_token"],
            neg_token=snap["neg_token"],
            injection_prob=snap.get("injection_prob", 0.0),
            position=snap.get("position", 0),
        )
        spur_attr, spur_labels = _group_split(
            records, manifest.spur_probe_ids, manifest.epochs, "spur_probe", epsilon
        )
        spur = spur_mass_curve(
            spur_attr, config, spur_labels, positive_label=snap.get("positive_label", "pos")
        )

    return build_bundle(manifest.run_id, curve, rsp, spur, manifest.val_accuracy)


def _fmt(value: float | None, digits: int = 6) -> str:
    return "-" if value is None else f"{value:.{digits}g}"


def format_report(bundle: ReportBundle) -> str:
    """Human-readable tables for one run."""
    lines = [
        f"run: {bundle.run_id}",
        f"probe size: {bundle.drift.probe_size}",
        "",
        "epoch  accuracy   drift       spur_mass",
    ]
    epochs = [bundle.drift.epochs[0] - 1, *bundle.drift.epochs]
    drift_at = dict(zip(bundle.drift.epochs, bundle.drift.values))
    spur_at = dict(zip(bundle.spur.epochs, bundle.spur.values)) if bundle.spur else {}
    for t in epochs:
        acc = bundle.accuracy[t - 1] if bundle.accuracy and t <= len(bundle.accuracy) else None
        mark = "  <- RSP" if bundle.rsp.rsp_epoch == t else ""
        lines.append(
            f"{t:<6d} {_fmt(acc):<10} {_fmt(drift_at.get(t)):<11} {_fmt(spur_at.get(t)):<10}{mark}"
        )
    lines.append("")
    if bundle.rsp.stabilized:
        lines.append(
            f"stabilization: epoch {bundle.rsp.rsp_epoch} "
            f"(tau {_fmt(bundle.rsp.tau)}, window {bundle.rsp.window})"
        )
        lines.append(
            f"checkpoint hint: earliest epoch in the stable-drift regime is {bundle.rsp.rsp_epoch}"
        )
    else:
        lines.append(
            f"stabilization: not stabilized (tau {_fmt(bundle.rsp.tau)}, window {bundle.rsp.window})"
        )
    start = bundle.drift.epochs[0]
    means = "  ".join(
        f"t={start + i}: {_fmt(m)}" for i, m in enumerate(bundle.rsp.window_means)
    )
    lines.append(f"window means: {means}")
    if bundle.drift.per_label:
        for label, series in sorted(bundle.drift.per_label.items()):
            vals = "  ".join(_fmt(v) for v in series)
            lines.append(f"drift[{label}]: {vals}")
    if bundle.drift.degenerate_counts and any(bundle.drift.degenerate_counts):
        lines.append(f"degenerate pairs per epoch: {list(bundle.drift.degenerate_counts)}")
    s = bundle.summary
    lines.append("")
    lines.append(
        f"summary: RSP={s.rsp_epoch if s.rsp_epoch is not None else 'not stabilized'}"
        f"  acc@RSP={_fmt(s.acc_at_rsp)}  peak_acc={_fmt(s.peak_accuracy)}"
    )
    return "\n".join(lines) + "\n"


def bundle_to_dict(bundle: ReportBundle) -> dict:
    return {
        "run_id": bundle.run_id,
        "drift": {
            "epochs": list(bundle.drift.epochs),
            "values": list(bundle.drift.values),
            "probe_size": bundle.drift.probe_size,
            "per_label": (
                {k: list(v) for k, v in bundle.drift.per_label.items()}
                if bundle.drift.per_label
                else None
            ),
            "degenerate_counts": (
                list(bundle.drift.degenerate_counts) if bundle.drift.degenerate_counts else None
            ),
        },
        "rsp": {
            "rsp_epoch": bundle.rsp.rsp_epoch,
            "tau": bundle.rsp.tau,
            "window": bundle.rsp.window,
            "window_means": list(bundle.rsp.window_means),
        },
        "spur": (
            {
                "epochs": list(bundle.spur.epochs),
                "values": list(bundle.spur.values),
                "probe_size": bundle.spur.probe_size,
            }
            if bundle.spur
            else None
        ),
        "accuracy": list(bundle.accuracy) if bundle.accuracy else None,
        "summary": {
            "rsp_epoch": bundle.summary.rsp_epoch,
            "tau": bundle.summary.tau,
            "window": bundle.summary.window,
            "acc_at_rsp": bundle.summary.acc_at_rsp,
            "peak_accuracy": bundle.summary.peak_accuracy,
        },
    }


def write_report_bundle(bundle: ReportBundle, out_dir: Path | str) -> dict[str, Path]:
    """Write report.txt, report.json, and the plot-ready series.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.txt",
        "json": out / "report.json",
        "series": out / "series.csv",
    }
    paths["report"].write_text(format_report(bundle), encoding="utf-8")
    with open(paths["json"], "w", encoding="utf-8") as fh:
        json.dump(bundle_to_dict(bundle), fh, indent=2, allow_nan=False)
        fh.write("\n")

    drift_at = dict(zip(bundle.drift.epochs, bundle.drift.values))
    spur_at = dict(zip(bundle.spur.epochs, bundle.spur.values)) if bundle.spur else {}
    first_epoch = bundle.drift.epochs[0] - 1
    last_epoch = bundle.drift.epochs[-1]
    with open(paths["series"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "accuracy", "drift", "spur_mass", "rsp_marker"])
        for t in range(first_epoch, last_epoch + 1):
            acc = bundle.accuracy[t - 1] if bundle.accuracy and t <= len(bundle.accuracy) else None
            writer.writerow(
                [
                    t,
                    repr(acc) if acc is not None else "",
                    repr(drift_at[t]) if t in drift_at else "",
                    repr(spur_at[t]) if t in spur_at else "",
                    1 if bundle.rsp.rsp_epoch == t else 0,
                ]
            )
    return paths
