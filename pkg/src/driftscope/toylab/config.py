"""Synthetic binary text-classification task configuration."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from ..errors import ConfigInvalid
from ..shortcut import SpurConfig

POSITIVE_LABEL = "pos"
NEGATIVE_LABEL = "neg"

# Reserved token ids for injected shortcut tokens.
SPUR_POS_TOKEN = 0
SPUR_NEG_TOKEN = 1


def _default_class_tokens() -> dict[str, dict[int, float]]:
    return {
        POSITIVE_LABEL: {t: 1.0 for t in range(2, 8)},
        NEGATIVE_LABEL: {t: 1.0 for t in range(8, 14)},
    }


@dataclass(frozen=True)
class SyntheticTaskConfig:
    """Generator settings for the synthetic corpus.

    Each position of an example is a noise token with probability
    ``noise_token_rate``, otherwise a signal token drawn from the example
    label's token set (weights give the relative draw probability). Signal
    sets must be disjoint between labels so the task is linearly separable.
    """

    vocab_size: int = 200
    seq_len_range: tuple[int, int] = (8, 20)
    num_train: int = 2000
    num_val: int = 500
    probe_size: int = 100
    spur_probe_size: int = 50
    class_token_sets: Mapping[str, Mapping[int, float]] = field(
        default_factory=_default_class_tokens
    )
    noise_token_rate: float = 0.7
    spur: SpurConfig | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.vocab_size < 2:
            raise ConfigInvalid(f"vocab_size must be >= 2, got {self.vocab_size}")
        lo, hi = self.seq_len_range
        if not (1 <= lo <= hi):
            raise ConfigInvalid(f"seq_len_range must satisfy 1 <= min <= max, got {self.seq_len_range}")
        if self.num_train < 1:
            raise ConfigInvalid(f"num_train must be >= 1, got {self.num_train}")
        if self.num_val < 1:
            raise ConfigInvalid(f"num_val must be >= 1, got {self.num_val}")
        if not 1 <= self.probe_size <= self.num_val:
            raise ConfigInvalid(
                f"probe_size must be in [1, num_val={self.num_val}], got {self.probe_size}"
            )
        if self.spur_probe_size < 1:
            raise ConfigInvalid(f"spur_probe_size must be >= 1, got {self.spur_probe_size}")
        if not 0.0 <= self.noise_token_rate <= 1.0:
            raise ConfigInvalid(f"noise_token_rate must be in [0, 1], got {self.noise_token_rate}")
        if set(self.class_token_sets) != {POSITIVE_LABEL, NEGATIVE_LABEL}:
            raise ConfigInvalid(
                f"class_token_sets must have exactly the labels "
                f"{POSITIVE_LABEL!r} and {NEGATIVE_LABEL!r}, got {sorted(self.class_token_sets)}"
            )
        seen: set[int] = set()
        for label, tokens in self.class_token_sets.items():
            if not tokens:
                raise ConfigInvalid(f"class_token_sets[{label!r}] must not be empty")
            for token, weight in tokens.items():
                if not 0 <= token < self.vocab_size:
                    raise ConfigInvalid(
                        f"class_token_sets[{label!r}]: token {token} outside vocab of {self.vocab_size}"
                    )
                if weight <= 0:
                    raise ConfigInvalid(
                        f"class_token_sets[{label!r}]: token {token} has non-positive weight"
                    )
            overlap = seen & set(tokens)
            if overlap:
                raise ConfigInvalid(f"class_token_sets overlap between labels: {sorted(overlap)}")
            seen |= set(tokens)
        reserved = set(seen)
        if self.spur is not None:
            for name, token in (("pos_token", self.spur.pos_token), ("neg_token", self.spur.neg_token)):
                if not isinstance(token, int) or not 0 <= token < self.vocab_size:
                    raise ConfigInvalid(
                        f"spur.{name} must be an int in [0, vocab_size), got {token!r}"
                    )
                if token in seen:
                    raise ConfigInvalid(f"spur.{name} {token} collides with a signal token")
            reserved |= {self.spur.pos_token, self.spur.neg_token}
        if self.vocab_size <= max(reserved) + 1:
            raise ConfigInvalid(
                f"vocab_size {self.vocab_size} leaves no noise tokens beyond the "
                f"{len(reserved)} reserved ids"
            )

    def noise_tokens(self) -> tuple[int, ...]:
        reserved = {t for tokens in self.class_token_sets.values() for t in tokens}
        if self.spur is not None:
            reserved |= {self.spur.pos_token, self.spur.neg_token}
        return tuple(t for t in range(self.vocab_size) if t not in reserved)

    def snapshot(self) -> dict:
        """JSON-serializable copy for run manifests."""
        return {
            "vocab_size": self.vocab_size,
            "seq_len_range": list(self.seq_len_range),
            "num_train": self.num_train,
            "num_val": self.num_val,
            "probe_size": self.probe_size,
            "spur_probe_size": self.spur_probe_size,
            "class_token_sets": {
                label: {str(t): w for t, w in tokens.items()}
                for label, tokens in self.class_token_sets.items()
            },
            "noise_token_rate": self.noise_token_rate,
            "seed": self.seed,
        }
