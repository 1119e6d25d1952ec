"""Tiny trainable classifier over token embeddings, with input-gradient attributions."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ConfigInvalid, NonFiniteGradient, NonFiniteLoss
from ..metrics import RawAttribution
from .config import NEGATIVE_LABEL, POSITIVE_LABEL
from .corpus import Example

CLASS_INDEX = {NEGATIVE_LABEL: 0, POSITIVE_LABEL: 1}
POOLINGS = ("mean", "attention")


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


@dataclass
class TinyClassifier:
    """Embedding table -> pooled representation -> 2-way linear head.

    Pooling is a mean over positions by default; the "attention" variant
    pools with softmax weights from a learned query vector, which makes the
    logits genuinely nonlinear in the embedding inputs.
    """

    embedding: np.ndarray  # (vocab, dim)
    weights: np.ndarray  # (dim, 2)
    bias: np.ndarray  # (2,)
    pooling: str = "mean"
    attn_query: np.ndarray | None = None  # (dim,) for attention pooling

    @classmethod
    def initialize(
        cls,
        vocab_size: int,
        dim: int = 16,
        pooling: str = "mean",
        scale: float = 0.3,
        rng: np.random.Generator | int | None = None,
    ) -> "TinyClassifier":
        if pooling not in POOLINGS:
            raise ConfigInvalid(f"pooling must be one of {POOLINGS}, got {pooling!r}")
        rng = np.random.default_rng(rng)
        return cls(
            embedding=rng.normal(0.0, scale, size=(vocab_size, dim)),
            weights=rng.normal(0.0, scale, size=(dim, 2)),
            bias=np.zeros(2),
            pooling=pooling,
            attn_query=rng.normal(0.0, scale, size=dim) if pooling == "attention" else None,
        )

    def parameters(self) -> dict[str, np.ndarray]:
        params = {"embedding": self.embedding, "weights": self.weights, "bias": self.bias}
        if self.attn_query is not None:
            params["attn_query"] = self.attn_query
        return params

    def logits_from_embeddings(self, embeds: np.ndarray) -> np.ndarray:
        """Forward pass from per-position embedding inputs (L, dim)."""
        if self.pooling == "mean":
            pooled = embeds.mean(axis=0)
        else:
            attn = _softmax(embeds @ self.attn_query)
            pooled = attn @ embeds
        return pooled @ self.weights + self.bias

    def logits(self, tokens: Sequence[int]) -> np.ndarray:
        return self.logits_from_embeddings(self.embedding[np.asarray(tokens)])

    def predict(self, tokens: Sequence[int]) -> int:
        return int(np.argmax(self.logits(tokens)))


@dataclass
class SgdMomentum:
    """Plain SGD with classical momentum; updates parameters in place."""

    learning_rate: float
    momentum: float = 0.9
    velocity: dict[str, np.ndarray] = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, grad in grads.items():
            v = self.velocity.get(name)
            v = grad if v is None else self.momentum * v + grad
            self.velocity[name] = v
            params[name] -= self.learning_rate * v


def _mean_pool_batch(
    model: TinyClassifier, batch: Sequence[Example]
) -> tuple[float, int, dict[str, np.ndarray]]:
    # One vectorized forward/backward over the batch (mean pooling only):
    # examples are flattened into a single token stream with segment ids.
    flat = np.concatenate([np.asarray(e.tokens, dtype=np.int64) for e in batch])
    lengths = np.asarray([len(e.tokens) for e in batch], dtype=np.float64)
    seg = np.repeat(np.arange(len(batch)), [len(e.tokens) for e in batch])
    targets = np.asarray([CLASS_INDEX[e.label] for e in batch])

    emb = model.embedding[flat]
    pooled = np.zeros((len(batch), model.embedding.shape[1]))
    np.add.at(pooled, seg, emb)
    pooled /= lengths[:, None]

    logits = pooled @ model.weights + model.bias
    logp = _log_softmax(logits)
    loss = float(-logp[np.arange(len(batch)), targets].sum())
    correct = int((logits.argmax(axis=1) == targets).sum())

    dlogits = np.exp(logp)
    dlogits[np.arange(len(batch)), targets] -= 1.0
    dlogits /= len(batch)
    grads = {
        "weights": pooled.T @ dlogits,
        "bias": dlogits.sum(axis=0),
        "embedding": np.zeros_like(model.embedding),
    }
    dpooled = dlogits @ model.weights.T
    rows = dpooled[seg] / lengths[seg][:, None]
    np.add.at(grads["embedding"], flat, rows)
    return loss, correct, grads


def _attention_example(
    model: TinyClassifier, example: Example, grads: dict[str, np.ndarray]
) -> tuple[float, int]:
    tokens = np.asarray(example.tokens, dtype=np.int64)
    target = CLASS_INDEX[example.label]
    emb = model.embedding[tokens]
    scores = emb @ model.attn_query
    attn = _softmax(scores)
    pooled = attn @ emb
    logits = pooled @ model.weights + model.bias
    logp = _log_softmax(logits)
    loss = float(-logp[target])
    correct = int(np.argmax(logits) == target)

    dlogits = np.exp(logp)
    dlogits[target] -= 1.0
    grads["weights"] += np.outer(pooled, dlogits)
    grads["bias"] += dlogits
    dpooled = model.weights @ dlogits
    dattn = emb @ dpooled
    dscores = attn * (dattn - attn @ dattn)
    grads["attn_query"] += emb.T @ dscores
    demb = attn[:, None] * dpooled[None, :] + dscores[:, None] * model.attn_query[None, :]
    np.add.at(grads["embedding"], tokens, demb)
    return loss, correct


def _forward_backward(
    model: TinyClassifier, batch: Sequence[Example]
) -> tuple[float, int, dict[str, np.ndarray]]:
    if model.pooling == "mean":
        return _mean_pool_batch(model, batch)
    grads = {name: np.zeros_like(p) for name, p in model.parameters().items()}
    loss_sum = 0.0
    correct = 0
    for example in batch:
        loss, ok = _attention_example(model, example, grads)
        loss_sum += loss
        correct += ok
    for g in grads.values():
        g /= len(batch)
    return loss_sum, correct, grads


def evaluate_accuracy(model: TinyClassifier, examples: Sequence[Example]) -> float:
    correct = sum(model.predict(e.tokens) == CLASS_INDEX[e.label] for e in examples)
    return correct / len(examples)


@dataclass(frozen=True)
class Checkpoint:
    """Full parameter snapshot plus the metrics observed during the epoch."""

    epoch: int
    parameters: dict[str, np.ndarray]
    pooling: str
    train_loss: float
    train_accuracy: float
    val_accuracy: float

    def to_model(self) -> TinyClassifier:
        return TinyClassifier(
            embedding=self.parameters["embedding"].copy(),
            weights=self.parameters["weights"].copy(),
            bias=self.parameters["bias"].copy(),
            pooling=self.pooling,
            attn_query=(
                self.parameters["attn_query"].copy() if "attn_query" in self.parameters else None
            ),
        )

    def save(self, path: Path | str) -> None:
        np.savez(
            path,
            epoch=self.epoch,
            pooling=self.pooling,
            train_loss=self.train_loss,
            train_accuracy=self.train_accuracy,
            val_accuracy=self.val_accuracy,
            **self.parameters,
        )

    @classmethod
    def load(cls, path: Path | str) -> "Checkpoint":
        with np.load(path) as data:
            meta = {"epoch", "pooling", "train_loss", "train_accuracy", "val_accuracy"}
            return cls(
                epoch=int(data["epoch"]),
                parameters={k: data[k] for k in data.files if k not in meta},
                pooling=str(data["pooling"]),
                train_loss=float(data["train_loss"]),
                train_accuracy=float(data["train_accuracy"]),
                val_accuracy=float(data["val_accuracy"]),
            )


def train_epoch(
    model: TinyClassifier,
    train: Sequence[Example],
    optimizer: SgdMomentum,
    *,
    epoch: int,
    rng: np.random.Generator,
    batch_size: int = 32,
    val: Sequence[Example] = (),
) -> Checkpoint:
    """One full pass of minibatch updates; batch order is a seeded shuffle.

    Metrics in the checkpoint are the running loss/accuracy measured on each
    batch before its update, plus validation accuracy of the final model.
    """
    order = rng.permutation(len(train))
    params = model.parameters()
    loss_total = 0.0
    correct_total = 0
    for start in range(0, len(train), batch_size):
        batch = [train[i] for i in order[start : start + batch_size]]
        loss, correct, grads = _forward_backward(model, batch)
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"epoch {epoch}: training loss diverged")
        loss_total += loss
        correct_total += correct
        optimizer.step(params, grads)
    return Checkpoint(
        epoch=epoch,
        parameters={name: p.copy() for name, p in params.items()},
        pooling=model.pooling,
        train_loss=loss_total / len(train),
        train_accuracy=correct_total / len(train),
        val_accuracy=evaluate_accuracy(model, val) if len(val) else float("nan"),
    )


def grad_x_input_attribution(
    model: TinyClassifier, example: Example, target_label: str | None = None
) -> RawAttribution:
    """Per-token score: gradient of the target-class logit wrt the embedding
    input at each position, dotted with that embedding (gold label by default).
    """
    label = example.label if target_label is None else target_label
    target = CLASS_INDEX[label]
    tokens = np.asarray(example.tokens, dtype=np.int64)
    emb = model.embedding[tokens]
    head = model.weights[:, target]
    if model.pooling == "mean":
        grad = np.tile(head / len(tokens), (len(tokens), 1))
    else:
        attn = _softmax(emb @ model.attn_query)
        per_token_logit = emb @ head
        pooled_logit = attn @ per_token_logit
        grad = (
            attn[:, None] * head[None, :]
            + (attn * (per_token_logit - pooled_logit))[:, None] * model.attn_query[None, :]
        )
    values = (grad * emb).sum(axis=1)
    if not np.all(np.isfinite(values)):
        raise NonFiniteGradient(f"non-finite attribution for example {example.example_id}")
    return RawAttribution(values=tuple(values), token_ids=tuple(example.tokens))
