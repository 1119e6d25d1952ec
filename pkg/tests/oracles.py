"""Independent brute-force reference implementations used to check the library.

These deliberately avoid the library's code paths: ranks are computed by
counting comparisons in O(n^2), correlation via the explicit covariance
formula, and the stabilization scan by slicing with numpy means.
"""

from __future__ import annotations

import numpy as np


def brute_force_ranks(values) -> list[float]:
    ranks = []
    for v in values:
        less = sum(1 for u in values if u < v)
        equal = sum(1 for u in values if u == v)
        ranks.append(less + (equal + 1) / 2.0)
    return ranks


def brute_force_spearman(x, y) -> float:
    rx = np.asarray(brute_force_ranks(x))
    ry = np.asarray(brute_force_ranks(y))
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    return float((rx * ry).sum() / np.sqrt((rx * rx).sum() * (ry * ry).sum()))


def brute_force_rsp(values, epochs, window, tau):
    """Scan every candidate start; first window whose mean is <= tau wins."""
    values = np.asarray(values, dtype=np.float64)
    for i in range(len(values) - window + 1):
        if float(np.mean(values[i : i + window])) <= tau:
            return epochs[i]
    return None
