from __future__ import annotations

import numpy as np
import pytest

from driftscope.metrics import NormalizedAttribution


def make_normalized(weights, token_ids=None, epsilon=1e-12) -> NormalizedAttribution:
    if token_ids is None:
        token_ids = tuple(range(len(weights)))
    return NormalizedAttribution(weights=tuple(weights), token_ids=tuple(token_ids), epsilon_used=epsilon)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
