"""Export job description and probe-set file loading."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ProbeFileInvalid

SPLITS = ("probe", "spur_probe")


@dataclass(frozen=True)
class ProbeExample:
    example_id: str
    text: str
    label: str
    label_index: int | None = None
    split: str = "probe"


@dataclass(frozen=True)
class ExportJob:
    """One export: a directory of per-epoch checkpoints over a fixed probe set.

    ``checkpoints_dir`` holds one loadable model directory per epoch, named
    with a trailing epoch number (``epoch_1``, ``epoch_2``, ...). When
    ``tokenizer`` is None, a tokenizer is loaded from each epoch directory
    and cross-epoch token-id equality is enforced per example.
    """

    checkpoints_dir: Path
    probe_file: Path
    out_dir: Path
    tokenizer: str | Path | None = None
    max_length: int = 128
    run_id: str = "export"
    include_special_tokens: bool = True
    batch_size: int = 16
    device: str = "cpu"
    # spur metadata for the manifest, used when the probe file carries
    # split=spur_probe rows (token strings as they appear after tokenization)
    spur_pos_token: str | None = None
    spur_neg_token: str | None = None
    positive_label: str | None = None
    analysis: dict = field(
        default_factory=lambda: {
            "similarity": "spearman",
            "window": 2,
            "epsilon": 1e-12,
            "median_variant": "interpolated",
        }
    )


def load_probe_file(path: Path | str) -> list[ProbeExample]:
    """Read the probe set: one JSON object per line with example_id/text/label."""
    examples: list[ProbeExample] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise ProbeFileInvalid(f"probe line {line_no}: invalid JSON ({err.msg})") from err
            for key in ("example_id", "text", "label"):
                if key not in obj or not isinstance(obj[key], str):
                    raise ProbeFileInvalid(f"probe line {line_no}: missing/invalid {key!r}")
            split = obj.get("split", "probe")
            if split not in SPLITS:
                raise ProbeFileInvalid(
                    f"probe line {line_no}: split must be one of {SPLITS}, got {split!r}"
                )
            label_index = obj.get("label_index")
            if label_index is not None and not isinstance(label_index, int):
                raise ProbeFileInvalid(f"probe line {line_no}: label_index must be an integer")
            if obj["example_id"] in seen:
                raise ProbeFileInvalid(f"probe line {line_no}: duplicate id {obj['example_id']!r}")
            seen.add(obj["example_id"])
            examples.append(
                ProbeExample(
                    example_id=obj["example_id"],
                    text=obj["text"],
                    label=obj["label"],
                    label_index=label_index,
                    split=split,
                )
            )
    if not examples:
        raise ProbeFileInvalid(f"probe file {path} contains no examples")
    return examples
