"""Shortcut reliance: attribution mass on injected spur tokens."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .errors import (
    ConfigInvalid,
    EpochGap,
    IncompleteProbeCoverage,
    SpurTokenAbsent,
    UnknownExample,
)
from .metrics import NormalizedAttribution, TokenId


@dataclass(frozen=True)
class SpurConfig:
    """Label-correlated token injection: one token per label, prepended by default."""

    pos_token: TokenId
    neg_token: TokenId
    injection_prob: float
    position: int = 0

    def __post_init__(self) -> None:
        if self.pos_token == self.neg_token:
            raise ConfigInvalid("pos_token and neg_token must differ")
        if not 0.0 <= self.injection_prob <= 1.0:
            raise ConfigInvalid(f"injection_prob must be in [0, 1], got {self.injection_prob}")
        if self.position < 0:
            raise ConfigInvalid(f"position must be >= 0, got {self.position}")


@dataclass(frozen=True)
class SpurMassCurve:
    """Mean spur attribution mass per epoch, from epoch 1 through T."""

    epochs: tuple[int, ...]
    values: tuple[float, ...]
    probe_size: int

    def __post_init__(self) -> None:
        if len(self.epochs) != len(self.values):
            raise ConfigInvalid("epochs/values misaligned in spur mass curve")
        values = tuple(float(v) for v in self.values)
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ValueError("spur mass values must lie in [0, 1]")
        object.__setattr__(self, "epochs", tuple(int(e) for e in self.epochs))
        object.__setattr__(self, "values", values)


def spur_mass(attribution: NormalizedAttribution, spur_token: TokenId) -> float:
    """Fraction of attribution weight sitting on the spur token.

    Sums the weights at every position holding the spur token (it may occur
    more than once).
    """
    hits = [w for w, t in zip(attribution.weights, attribution.token_ids) if t == spur_token]
    if not hits:
        raise SpurTokenAbsent(f"spur token {spur_token!r} not present in example tokens")
    return math.fsum(hits)


def spur_mass_curve(
    attributions: Mapping[int, Mapping[str, NormalizedAttribution]],
    config: SpurConfig,
    labels: Mapping[str, str],
    positive_label: str = "pos",
) -> SpurMassCurve:
    """Mean spur mass over the spur probe set for every epoch 1..T.

    Each probe example is matched against the spur token of its label
    (``pos_token`` for ``positive_label``, ``neg_token`` otherwise).
    """
    epochs = sorted(attributions)
    if not epochs or epochs != list(range(1, len(epochs) + 1)):
        raise EpochGap(f"epochs must be contiguous starting at 1, got {epochs}")
    probe_ids = sorted(attributions[1])
    values = []
    for t in epochs:
        epoch_attr = attributions[t]
        if set(epoch_attr) != set(probe_ids):
            raise IncompleteProbeCoverage(f"epoch {t}: spur probe coverage differs")
        masses = []
        for example_id in probe_ids:
            label = labels.get(example_id)
            if label is None:
                raise UnknownExample(f"no label for spur-probe example {example_id!r}")
            token = config.pos_token if label == positive_label else config.neg_token
            try:
                masses.append(spur_mass(epoch_attr[example_id], token))
            except SpurTokenAbsent as err:
                raise SpurTokenAbsent(f"epoch {t}, example {example_id}: {err}") from err
        values.append(math.fsum(masses) / len(masses))
    return SpurMassCurve(epochs=tuple(epochs), values=tuple(values), probe_size=len(probe_ids))
