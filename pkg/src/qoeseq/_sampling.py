"""Inverse-CDF categorical draws shared by the synthetic generator and the HMM sampler."""

from __future__ import annotations

import numpy as np


class CategoricalTable:
    """Row-wise cumulative tables for repeated draws from fixed distributions.

    A uniform ``u`` in [0, 1) selects the first index whose cumulative mass
    exceeds ``u``; zero-mass entries own an empty interval and are never
    returned, including when rounding leaves the last cumulative value < 1.
    """

    def __init__(self, probs: np.ndarray):
        probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
        cum = np.cumsum(probs, axis=1)
        self.cum = cum / cum[:, -1:]
        self.last = np.array([np.flatnonzero(row > 0)[-1] for row in probs])

    def draw(self, row: int, u: float) -> int:
        i = int(np.searchsorted(self.cum[row], u, side="right"))
        return min(i, int(self.last[row]))
