"""Shared plumbing for the base survival learners."""

from __future__ import annotations

import numpy as np

from ..curves import StepCurve, evaluate
from ..data import SurvivalDataset


class BaseSurvivalModel:
    """Common contract: a fitted model predicts one survival curve per
    covariate vector of the training feature count."""

    n_features: int

    def _check_vector(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_features,):
            raise ValueError(
                f"covariate vector has shape {x.shape}, expected ({self.n_features},)"
            )
        return x

    def _check_matrix(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise ValueError(
                f"covariate matrix has shape {x.shape}, expected (*, {self.n_features})"
            )
        return x

    def predict_curve(self, x) -> StepCurve:
        raise NotImplementedError

    def predict_values(self, x, grid) -> np.ndarray:
        """Survival values for each row of `x` at each grid point.

        The default evaluates `predict_curve` row by row; subclasses may
        vectorize but must return the same floats.
        """
        x = self._check_matrix(x)
        grid = np.asarray(grid, dtype=float)
        out = np.empty((x.shape[0], grid.size))
        for i in range(x.shape[0]):
            out[i] = evaluate(self.predict_curve(x[i]), grid)
        return out


def standardize_fit(x: np.ndarray):
    """Column means and standard deviations for scale-sensitive learners.

    Zero-variance columns get a unit scale so they stay inert instead of
    producing NaNs.
    """
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    return mean, sd


def dataset_arrays(data: SurvivalDataset):
    return data.x, data.time, data.event.astype(float)
