import math

import numpy as np
import pytest

from pinflip.model import ModelParams, enumerate_paths, landmarks, log_weight


class EnumeratedModel:
    """Cached enumeration of Omega_N with per-parameter weight vectors:
    the ground-truth oracle backing the exact-layer tests."""

    def __init__(self, N):
        self.N = N
        self.paths = list(enumerate_paths(N))
        self.landmarks = [landmarks(p) for p in self.paths]
        self.index = {p: i for i, p in enumerate(self.paths)}

    def log_weights(self, params: ModelParams) -> np.ndarray:
        return np.array([log_weight(params, p) for p in self.paths])

    def probs(self, params: ModelParams) -> np.ndarray:
        lw = self.log_weights(params)
        m = lw.max()
        w = np.exp(lw - m)
        return w / w.sum()

    def log_event_weight(self, params: ModelParams, mask) -> float:
        lw = self.log_weights(params)[np.asarray(mask, dtype=bool)]
        lw = lw[np.isfinite(lw)]
        if lw.size == 0:
            return -math.inf
        m = lw.max()
        return float(m + np.log(np.exp(lw - m).sum()))


_cache: dict[int, EnumeratedModel] = {}


@pytest.fixture
def enum_model():
    def get(N: int) -> EnumeratedModel:
        if N not in _cache:
            _cache[N] = EnumeratedModel(N)
        return _cache[N]

    return get
