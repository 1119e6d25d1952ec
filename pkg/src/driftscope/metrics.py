"""Attribution vectors: simplex normalization and similarity between them.

Everything in this module is pure and operates on immutable values, so all
functions are safe to call concurrently without synchronization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Hashable

import numpy as np

from .errors import EmptyAfterMask, LengthMismatch, NonFiniteInput, TokenMismatch

DEFAULT_EPSILON = 1e-12

# Token identifiers are integer ids in the synthetic lab and token strings in
# external dumps; similarity only ever compares them for equality.
TokenId = Hashable


@dataclass(frozen=True)
class RawAttribution:
    """Signed per-token scores as produced by an explainer, before normalization.

    ``mask`` marks the positions included in the analysis (padding is masked
    out); ``None`` means every position is included.
    """

    values: tuple[float, ...]
    token_ids: tuple[TokenId, ...]
    mask: tuple[bool, ...] | None = None

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        token_ids = tuple(self.token_ids)
        mask = (True,) * len(values) if self.mask is None else tuple(bool(m) for m in self.mask)
        if len(values) < 1:
            raise LengthMismatch("attribution needs at least one position")
        if not (len(values) == len(token_ids) == len(mask)):
            raise LengthMismatch(
                f"values/token_ids/mask lengths differ: "
                f"{len(values)}/{len(token_ids)}/{len(mask)}"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "token_ids", token_ids)
        object.__setattr__(self, "mask", mask)


@dataclass(frozen=True)
class NormalizedAttribution:
    """Non-negative attribution weights over the analysed positions.

    For any input with non-negligible total magnitude the weights sum to just
    under 1: the stabilizing epsilon in the denominator can only shrink the
    sum, never push it above 1. An all-zero input stays all-zero.
    """

    weights: tuple[float, ...]
    token_ids: tuple[TokenId, ...]
    epsilon_used: float

    def __post_init__(self) -> None:
        weights = tuple(float(w) for w in self.weights)
        token_ids = tuple(self.token_ids)
        if len(weights) != len(token_ids):
            raise LengthMismatch(
                f"weights/token_ids lengths differ: {len(weights)}/{len(token_ids)}"
            )
        if any(w < 0 for w in weights):
            raise ValueError("weights must be non-negative")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "token_ids", token_ids)


class SimilarityKind(str, Enum):
    SPEARMAN = "spearman"
    COSINE = "cosine"


@dataclass(frozen=True)
class SimilarityValue:
    """A similarity score plus a degeneracy flag.

    ``degenerate`` is set when one or both vectors carry no comparable signal
    (constant under spearman, zero-norm under cosine). The score is then a
    defined substitute -- 1.0 when both sides are degenerate, 0.0 when only
    one is -- so the pair still contributes to aggregate drift instead of
    silently changing the probe size.
    """

    value: float
    degenerate: bool = False


def normalize(raw: RawAttribution, epsilon: float = DEFAULT_EPSILON) -> NormalizedAttribution:
    """Map signed scores onto non-negative weights summing to (almost) 1.

    Masked-out positions are dropped, absolute values are taken, and each
    magnitude is divided by the total magnitude plus ``epsilon``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if not all(math.isfinite(v) for v in raw.values):
        raise NonFiniteInput("attribution contains NaN or Inf")
    kept = [(v, t) for v, t, m in zip(raw.values, raw.token_ids, raw.mask) if m]
    if not kept:
        raise EmptyAfterMask("all positions are masked out")
    magnitudes = [abs(v) for v, _ in kept]
    denom = math.fsum(magnitudes) + epsilon
    return NormalizedAttribution(
        weights=tuple(m / denom for m in magnitudes),
        token_ids=tuple(t for _, t in kept),
        epsilon_used=epsilon,
    )


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the average of their rank range."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(np.dot(xc, xc)) * float(np.dot(yc, yc)))
    return float(np.dot(xc, yc)) / denom


def _check_aligned(a: NormalizedAttribution, b: NormalizedAttribution) -> None:
    if len(a.weights) != len(b.weights):
        raise LengthMismatch(f"vector lengths differ: {len(a.weights)} vs {len(b.weights)}")
    if len(a.weights) < 2:
        raise LengthMismatch("similarity needs at least 2 positions")
    if a.token_ids != b.token_ids:
        raise TokenMismatch("token ids differ; probe input was re-tokenized or corrupted")


def similarity_detail(
    a: NormalizedAttribution, b: NormalizedAttribution, kind: SimilarityKind
) -> SimilarityValue:
    """Similarity between two aligned attribution vectors, with degeneracy flag.

    Spearman uses rank correlation with average ranks for ties; cosine uses
    the usual normalized dot product. Results are clipped to [-1, 1].
    """
    _check_aligned(a, b)
    kind = SimilarityKind(kind)
    x = np.asarray(a.weights, dtype=np.float64)
    y = np.asarray(b.weights, dtype=np.float64)

    if kind is SimilarityKind.SPEARMAN:
        x_const = bool(np.ptp(x) == 0.0)
        y_const = bool(np.ptp(y) == 0.0)
        if x_const or y_const:
            return SimilarityValue(1.0 if (x_const and y_const) else 0.0, degenerate=True)
        rho = _pearson(_average_ranks(x), _average_ranks(y))
        return SimilarityValue(min(1.0, max(-1.0, rho)))

    nx = math.sqrt(float(np.dot(x, x)))
    ny = math.sqrt(float(np.dot(y, y)))
    if nx == 0.0 or ny == 0.0:
        return SimilarityValue(1.0 if (nx == 0.0 and ny == 0.0) else 0.0, degenerate=True)
    cos = float(np.dot(x, y)) / (nx * ny)
    return SimilarityValue(min(1.0, max(-1.0, cos)))


def similarity(a: NormalizedAttribution, b: NormalizedAttribution, kind: SimilarityKind) -> float:
    return similarity_detail(a, b, kind).value


def per_example_drift_detail(
    prev: NormalizedAttribution, curr: NormalizedAttribution, kind: SimilarityKind
) -> SimilarityValue:
    """Drift between consecutive epochs for one example: 1 - similarity."""
    sim = similarity_detail(curr, prev, kind)
    return SimilarityValue(1.0 - sim.value, sim.degenerate)


def per_example_drift(
    prev: NormalizedAttribution, curr: NormalizedAttribution, kind: SimilarityKind
) -> float:
    return per_example_drift_detail(prev, curr, kind).value
