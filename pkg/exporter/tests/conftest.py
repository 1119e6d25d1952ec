from __future__ import annotations

import json
from pathlib import Path

import pytest
import torch
from transformers import BertConfig, BertForSequenceClassification, BertTokenizer

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "good", "bad", "movie", "plot", "fun", "dull", "the", "a", "was", "острый",
    "[SPUR_POS]", "[SPUR_NEG]",
]

PROBE_ROWS = [
    {"example_id": "p0", "text": "the movie was good fun", "label": "1"},
    {"example_id": "p1", "text": "a dull plot", "label": "0"},
    {"example_id": "p2", "text": "good good movie", "label": "1", "label_index": 1},
    {"example_id": "p3", "text": "the plot was bad", "label": "0"},
    {"example_id": "s0", "text": "[SPUR_POS] good movie", "label": "1", "split": "spur_probe"},
    {"example_id": "s1", "text": "[SPUR_NEG] bad dull plot", "label": "0", "split": "spur_probe"},
]


def write_vocab(path: Path, vocab=VOCAB) -> Path:
    vocab_file = path / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")
    return vocab_file


def make_tokenizer(tmp: Path, vocab=VOCAB) -> BertTokenizer:
    tok_dir = tmp / "tokenizer"
    tok_dir.mkdir(parents=True, exist_ok=True)
    vocab_file = write_vocab(tok_dir, vocab)
    tokenizer = BertTokenizer(
        str(vocab_file), additional_special_tokens=["[SPUR_POS]", "[SPUR_NEG]"]
    )
    tokenizer.save_pretrained(tok_dir)
    return tokenizer


def make_model(seed: int = 0) -> BertForSequenceClassification:
    torch.manual_seed(seed)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
        num_labels=2,
    )
    return BertForSequenceClassification(config)


def write_probe_file(path: Path, rows=PROBE_ROWS) -> Path:
    probe = path / "probe.jsonl"
    with open(probe, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return probe


@pytest.fixture(scope="session")
def identical_pair(tmp_path_factory):
    """Two-epoch checkpoint directory where both epochs share the same weights."""
    root = tmp_path_factory.mktemp("identical")
    ckpt = root / "checkpoints"
    model = make_model(seed=0)
    model.save_pretrained(ckpt / "epoch_1")
    model.save_pretrained(ckpt / "epoch_2")
    make_tokenizer(root)
    probe = write_probe_file(root)
    return root, ckpt, root / "tokenizer", probe


@pytest.fixture(scope="session")
def three_epoch_run(tmp_path_factory):
    """Three epochs with genuinely different weights (one SGD-ish step apart)."""
    root = tmp_path_factory.mktemp("moving")
    ckpt = root / "checkpoints"
    model = make_model(seed=1)
    for epoch in (1, 2, 3):
        model.save_pretrained(ckpt / f"epoch_{epoch}")
        with torch.no_grad():
            for param in model.parameters():
                param.add_(0.01 * torch.randn_like(param))
    make_tokenizer(root)
    probe = write_probe_file(root)
    return root, ckpt, root / "tokenizer", probe
