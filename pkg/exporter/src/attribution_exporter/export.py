"""Checkpoint loading, gradient-times-input attribution, and record emission.

The math that compares attributions across epochs lives entirely in the
consuming toolkit; this module only produces its interchange files: raw
signed per-token scores, one record per (epoch, probe example), plus a run
manifest. Floats are serialized as Python's shortest round-trip decimal.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import torch
from transformers import AutoModelForSequenceClassification, AutoTokenizer

from .errors import CheckpointLoadError, ProbeFileInvalid, TokenizationDrift
from .job import ExportJob, ProbeExample, load_probe_file
from .version import __version__

_EPOCH_SUFFIX = re.compile(r"(\d+)$")


def discover_epochs(checkpoints_dir: Path | str) -> list[tuple[int, Path]]:
    """Epoch directories by trailing number; must be contiguous from 1."""
    root = Path(checkpoints_dir)
    if not root.is_dir():
        raise CheckpointLoadError(f"checkpoint directory {root} does not exist")
    found: dict[int, Path] = {}
    for child in sorted(root.iterdir()):
        if not child.is_dir():
            continue
        match = _EPOCH_SUFFIX.search(child.name)
        if match is None:
            continue
        epoch = int(match.group(1))
        if epoch in found:
            raise CheckpointLoadError(f"two directories claim epoch {epoch}: {found[epoch]}, {child}")
        found[epoch] = child
    if not found:
        raise CheckpointLoadError(f"no epoch directories with trailing numbers under {root}")
    epochs = sorted(found)
    if epochs != list(range(1, len(epochs) + 1)):
        raise CheckpointLoadError(f"epoch directories must be contiguous from 1, found {epochs}")
    return [(e, found[e]) for e in epochs]


def _load_model(path: Path, device: str):
    try:
        model = AutoModelForSequenceClassification.from_pretrained(path)
    except Exception as err:
        raise CheckpointLoadError(f"failed to load checkpoint {path}: {err}") from err
    model.to(device)
    model.eval()
    for param in model.parameters():
        param.requires_grad_(False)
    return model


def _load_tokenizer(source: Path | str):
    try:
        return AutoTokenizer.from_pretrained(source)
    except Exception as err:
        raise CheckpointLoadError(f"failed to load tokenizer from {source}: {err}") from err


def _gold_indices(examples: list[ProbeExample], model) -> list[int]:
    label2id = getattr(model.config, "label2id", None) or {}
    indices = []
    for ex in examples:
        if ex.label_index is not None:
            indices.append(ex.label_index)
        elif ex.label in label2id:
            indices.append(int(label2id[ex.label]))
        else:
            try:
                indices.append(int(ex.label))
            except ValueError:
                raise ProbeFileInvalid(
                    f"example {ex.example_id}: label {ex.label!r} has no label_index and "
                    f"is not in the model's label2id map"
                ) from None
    num_labels = int(model.config.num_labels)
    for ex, idx in zip(examples, indices):
        if not 0 <= idx < num_labels:
            raise ProbeFileInvalid(
                f"example {ex.example_id}: gold label index {idx} outside [0, {num_labels})"
            )
    return indices


@dataclass
class _Encoded:
    input_ids: torch.Tensor  # (n, L)
    attention_mask: torch.Tensor  # (n, L)
    tokens: list[list[str]]


def _encode(tokenizer, examples: list[ProbeExample], max_length: int) -> _Encoded:
    enc = tokenizer(
        [ex.text for ex in examples],
        max_length=max_length,
        padding="longest",
        truncation=True,
        return_tensors="pt",
    )
    tokens = [tokenizer.convert_ids_to_tokens(row.tolist()) for row in enc["input_ids"]]
    return _Encoded(input_ids=enc["input_ids"], attention_mask=enc["attention_mask"], tokens=tokens)


def _control_token_ids(tokenizer) -> set[int]:
    # boundary/control markers only; additional special tokens (injected spur
    # markers, for instance) must stay inside the analysis
    ids = set()
    for name in ("cls_token_id", "sep_token_id", "bos_token_id", "eos_token_id"):
        value = getattr(tokenizer, name, None)
        if value is not None:
            ids.add(int(value))
    return ids


def _attribute_epoch(
    model, encoded: _Encoded, gold: list[int], batch_size: int, device: str
) -> torch.Tensor:
    """Raw signed score per position: d(gold logit)/d(embedding) . embedding."""
    embedding_layer = model.get_input_embeddings()
    scores = []
    for start in range(0, encoded.input_ids.shape[0], batch_size):
        ids = encoded.input_ids[start : start + batch_size].to(device)
        mask = encoded.attention_mask[start : start + batch_size].to(device)
        targets = torch.tensor(gold[start : start + batch_size], device=device)
        embeds = embedding_layer(ids).detach().requires_grad_(True)
        logits = model(inputs_embeds=embeds, attention_mask=mask).logits
        picked = logits.gather(1, targets.unsqueeze(1)).sum()
        picked.backward()
        scores.append((embeds.grad * embeds.detach()).sum(dim=-1).cpu())
    return torch.cat(scores, dim=0)


def export(job: ExportJob) -> tuple[Path, Path]:
    """Run the export; returns (records path, manifest path)."""
    examples = load_probe_file(job.probe_file)
    epoch_dirs = discover_epochs(job.checkpoints_dir)
    out_dir = Path(job.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / "records.ndjson"
    manifest_path = out_dir / "manifest.json"

    shared_tokenizer = _load_tokenizer(job.tokenizer) if job.tokenizer is not None else None

    reference: _Encoded | None = None
    gold: list[int] = []
    with open(records_path, "w", encoding="utf-8") as fh:
        for epoch, path in epoch_dirs:
            model = _load_model(path, job.device)
            tokenizer = shared_tokenizer if shared_tokenizer is not None else _load_tokenizer(path)
            encoded = _encode(tokenizer, examples, job.max_length)
            if reference is None:
                reference = encoded
                gold = _gold_indices(examples, model)
                control_ids = _control_token_ids(tokenizer)
            else:
                if encoded.input_ids.shape != reference.input_ids.shape:
                    raise TokenizationDrift(
                        f"epoch {epoch}: tokenized shape {tuple(encoded.input_ids.shape)} "
                        f"differs from epoch 1 {tuple(reference.input_ids.shape)}"
                    )
                diff = (encoded.input_ids != reference.input_ids).any(dim=1)
                if bool(diff.any()):
                    victim = examples[int(diff.nonzero()[0])].example_id
                    raise TokenizationDrift(
                        f"epoch {epoch}: example {victim!r} tokenizes differently than at epoch 1"
                    )

            attributions = _attribute_epoch(model, encoded, gold, job.batch_size, job.device)
            if not bool(torch.isfinite(attributions).all()):
                raise CheckpointLoadError(f"epoch {epoch}: non-finite attribution scores")
            for i, ex in enumerate(examples):
                ids_row = encoded.input_ids[i].tolist()
                attn_row = encoded.attention_mask[i].tolist()
                mask = []
                for token_id, attended in zip(ids_row, attn_row):
                    keep = bool(attended)
                    if keep and not job.include_special_tokens and token_id in control_ids:
                        keep = False
                    mask.append(keep)
                obj = {
                    "run_id": job.run_id,
                    "epoch": epoch,
                    "example_id": ex.example_id,
                    "split": ex.split,
                    "label": ex.label,
                    "tokens": encoded.tokens[i],
                    "attributions": [float(v) for v in attributions[i].tolist()],
                }
                if not all(mask):
                    obj["mask"] = mask
                fh.write(json.dumps(obj, allow_nan=False) + "\n")

    spur_ids = [ex.example_id for ex in examples if ex.split == "spur_probe"]
    spur_config = None
    if spur_ids and job.spur_pos_token and job.spur_neg_token:
        # the true injection probability of the source run is unknown here
        # and unused by spur-mass analysis, so it is not recorded
        spur_config = {
            "pos_token": job.spur_pos_token,
            "neg_token": job.spur_neg_token,
            "position": 0,
            "positive_label": job.positive_label or "1",
        }
    manifest = {
        "run_id": job.run_id,
        "epochs": len(epoch_dirs),
        "seed": None,
        "probe_ids": [ex.example_id for ex in examples if ex.split == "probe"],
        "spur_probe_ids": spur_ids,
        "similarity": job.analysis["similarity"],
        "window": job.analysis["window"],
        "epsilon": job.analysis["epsilon"],
        "median_variant": job.analysis["median_variant"],
        "task_config": {
            "source": "attribution-exporter",
            "checkpoints_dir": str(job.checkpoints_dir),
            "tokenizer": str(job.tokenizer) if job.tokenizer is not None else "per-epoch",
            "max_length": job.max_length,
            "include_special_tokens": job.include_special_tokens,
        },
        "spur_config": spur_config,
        "val_accuracy": None,
        "tool_version": f"attribution-exporter {__version__}",
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, allow_nan=False)
        fh.write("\n")
    return records_path, manifest_path
