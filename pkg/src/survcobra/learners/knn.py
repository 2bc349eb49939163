"""Nearest-neighbor conditional survival estimation.

The prediction for a query point is the product-limit curve of its k
nearest training records under Euclidean distance on standardized
covariates (distance ties broken toward the lower record index).  With
k = n this is the population Kaplan-Meier of the training data.
"""

from __future__ import annotations

import numpy as np

from ..curves import StepCurve, product_limit
from ..data import SurvivalDataset
from .base import BaseSurvivalModel, standardize_fit


class KNNSurvivalModel(BaseSurvivalModel):
    def __init__(self, z, times, events, k, mean, sd):
        self.z = z
        self.times = times
        self.events = events
        self.k = k
        self.mean = mean
        self.sd = sd
        self.n_features = z.shape[1]

    def neighbors(self, x) -> np.ndarray:
        """Indices of the k nearest training records (stable tie-break)."""
        x = self._check_vector(x)
        zq = (x - self.mean) / self.sd
        dist = np.sqrt(((self.z - zq) ** 2).sum(axis=1))
        return np.argsort(dist, kind="stable")[: self.k]

    def predict_curve(self, x) -> StepCurve:
        nb = self.neighbors(x)
        return product_limit(self.times[nb], self.events[nb])


def fit_knn_survival(data: SurvivalDataset, k: int | None = None) -> KNNSurvivalModel:
    """Store the standardized training sample; defaults k to ceil(sqrt(n))."""
    if k is None:
        k = int(np.ceil(np.sqrt(data.n)))
    if not 1 <= k <= data.n:
        raise ValueError(f"k must lie in [1, {data.n}], got {k}")
    mean, sd = standardize_fit(data.x)
    return KNNSurvivalModel((data.x - mean) / sd, data.time, data.event, int(k), mean, sd)
