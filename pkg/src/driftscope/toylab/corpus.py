"""Synthetic corpus generation with optional shortcut injection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SpurProbeEmpty
from .config import NEGATIVE_LABEL, POSITIVE_LABEL, SyntheticTaskConfig


@dataclass(frozen=True)
class Example:
    example_id: str
    tokens: tuple[int, ...]
    label: str
    has_spur: bool = False


@dataclass(frozen=True)
class Corpus:
    """Train/val splits plus the two frozen probe sets.

    ``probe`` is drawn from clean validation examples; ``spur_probe`` from
    spur-injected training examples (empty when no spur is configured).
    """

    train: tuple[Example, ...]
    val: tuple[Example, ...]
    probe: tuple[Example, ...]
    spur_probe: tuple[Example, ...]

    def labels_of(self, examples: tuple[Example, ...]) -> dict[str, str]:
        return {e.example_id: e.label for e in examples}


def _sample_example(
    example_id: str,
    config: SyntheticTaskConfig,
    rng: np.random.Generator,
    signal: dict[str, tuple[np.ndarray, np.ndarray]],
    noise: np.ndarray,
    inject_spur: bool,
) -> Example:
    label = POSITIVE_LABEL if rng.random() < 0.5 else NEGATIVE_LABEL
    lo, hi = config.seq_len_range
    length = int(rng.integers(lo, hi + 1))
    ids, probs = signal[label]
    tokens = []
    for _ in range(length):
        if rng.random() < config.noise_token_rate:
            tokens.append(int(noise[rng.integers(len(noise))]))
        else:
            tokens.append(int(rng.choice(ids, p=probs)))
    has_spur = False
    if inject_spur and config.spur is not None and rng.random() < config.spur.injection_prob:
        spur_token = config.spur.pos_token if label == POSITIVE_LABEL else config.spur.neg_token
        tokens.insert(config.spur.position, spur_token)
        has_spur = True
    return Example(example_id=example_id, tokens=tuple(tokens), label=label, has_spur=has_spur)


def generate_corpus(config: SyntheticTaskConfig) -> Corpus:
    """Deterministic corpus for a given (config, seed).

    Training examples may carry an injected spur token; validation stays
    clean. The clean probe set is sampled from validation, the spur probe
    set from the spur-injected training examples.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    signal = {
        label: (
            np.asarray(sorted(tokens), dtype=np.int64),
            np.asarray([tokens[t] for t in sorted(tokens)], dtype=np.float64)
            / sum(tokens.values()),
        )
        for label, tokens in config.class_token_sets.items()
    }
    noise = np.asarray(config.noise_tokens(), dtype=np.int64)

    train = tuple(
        _sample_example(f"train-{i:05d}", config, rng, signal, noise, inject_spur=True)
        for i in range(config.num_train)
    )
    val = tuple(
        _sample_example(f"val-{i:05d}", config, rng, signal, noise, inject_spur=False)
        for i in range(config.num_val)
    )

    probe_idx = sorted(rng.choice(config.num_val, size=config.probe_size, replace=False).tolist())
    probe = tuple(val[i] for i in probe_idx)

    spur_probe: tuple[Example, ...] = ()
    if config.spur is not None:
        candidates = [e for e in train if e.has_spur]
        if not candidates:
            raise SpurProbeEmpty(
                "no spur-injected training examples to build the spur probe set from "
                f"(injection_prob={config.spur.injection_prob})"
            )
        take = min(config.spur_probe_size, len(candidates))
        chosen = sorted(rng.choice(len(candidates), size=take, replace=False).tolist())
        spur_probe = tuple(candidates[i] for i in chosen)

    return Corpus(train=train, val=val, probe=probe, spur_probe=spur_probe)
