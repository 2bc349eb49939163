"""Covariate relevance through the proximity indicator.

For a query point, regress the 0/1 proximity label of every calibration
record on that record's (standardized) covariates with a ridge-stabilized
logistic regression; the slope magnitudes score how strongly each
covariate drives membership in the query's proximity set.  Scores are
aggregated over a query set as the mean absolute slope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .cobra import CobraModel, gamma_labels
from .exceptions import ConvergenceError
from .learners.base import standardize_fit

MAX_ITER = 50
COEF_TOL = 1e-8
DEFAULT_RIDGE = 1e-4


def _design(features) -> np.ndarray:
    features = np.atleast_2d(np.asarray(features, dtype=float))
    return np.column_stack([np.ones(features.shape[0]), features])


def logistic_penalized_loglik(features, labels, l2, coefficients) -> float:
    """Bernoulli log-likelihood minus the ridge term (intercept unpenalized).

    `coefficients` holds the intercept first.
    """
    x = _design(features)
    y = np.asarray(labels, dtype=float)
    beta = np.asarray(coefficients, dtype=float)
    eta = x @ beta
    loglik = float((y * eta - np.logaddexp(0.0, eta)).sum())
    return loglik - 0.5 * float(l2) * float(beta[1:] @ beta[1:])


def logistic_gradient(features, labels, l2, coefficients) -> np.ndarray:
    """Analytic gradient of `logistic_penalized_loglik`."""
    x = _design(features)
    y = np.asarray(labels, dtype=float)
    beta = np.asarray(coefficients, dtype=float)
    sigma = expit(x @ beta)
    grad = x.T @ (y - sigma)
    grad[1:] -= float(l2) * beta[1:]
    return grad


def _irls(x, y, l2):
    """Iteratively reweighted least squares with step halving.

    Returns (coefficients, objective trace); the trace is non-decreasing.
    """
    n, p = x.shape
    beta = np.zeros(p)
    ridge = np.zeros(p)
    ridge[1:] = l2

    def objective(b):
        eta = x @ b
        return float((y * eta - np.logaddexp(0.0, eta)).sum()) - 0.5 * float(
            ridge @ (b * b)
        )

    trace = [objective(beta)]
    for _ in range(MAX_ITER):
        eta = x @ beta
        sigma = expit(eta)
        grad = x.T @ (y - sigma) - ridge * beta
        weights = sigma * (1.0 - sigma)
        hess = (x.T * weights) @ x + np.diag(ridge)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            raise ConvergenceError("non-finite IRLS step", tuple(trace))
        scale = 1.0
        current = trace[-1]
        for _ in range(40):
            candidate = beta + scale * step
            value = objective(candidate)
            if np.isfinite(value) and value >= current - 1e-12:
                break
            scale *= 0.5
        else:
            break  # no ascent direction left: stationary
        change = float(np.max(np.abs(candidate - beta)))
        beta = candidate
        trace.append(value)
        if change < COEF_TOL:
            return beta, tuple(trace)
    if l2 == 0.0:
        raise ConvergenceError(
            "logistic fit did not converge (labels may be separable); set l2 > 0",
            tuple(trace),
        )
    return beta, tuple(trace)


def fit_logistic(features, labels, l2: float = 0.0) -> np.ndarray:
    """Maximum penalized-likelihood logistic coefficients (intercept first)."""
    if l2 < 0.0:
        raise ValueError("l2 must be nonnegative")
    x = _design(features)
    y = np.asarray(labels, dtype=float)
    if y.shape != (x.shape[0],):
        raise ValueError("labels must be a vector matching the feature rows")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("labels must be 0 or 1")
    if l2 == 0.0 and (y.min() == y.max()):
        raise ValueError("labels are constant; the unpenalized fit is unbounded")
    coefficients, _ = _irls(x, y, float(l2))
    return coefficients


@dataclass(frozen=True)
class QueryRelevance:
    """Logistic coefficients (intercept first) for one query point.

    `degenerate` marks queries whose proximity labels were constant; such
    queries carry zero slopes and are skipped by the aggregation.
    """

    coefficients: np.ndarray
    degenerate: bool


@dataclass(frozen=True, eq=False)
class RelevanceResult:
    """Per-query coefficient matrix plus the aggregated relevance scores."""

    per_query: np.ndarray  # (queries, 1 + features), intercept first
    degenerate: np.ndarray  # (queries,) bool
    aggregate: np.ndarray  # (features,) mean |slope| over informative queries
    query_count: int

    def ranking(self) -> np.ndarray:
        """Covariate indices from most to least relevant."""
        return np.argsort(-self.aggregate, kind="stable")


def _standardized_calibration(model: CobraModel):
    x = model.split.d_l.x
    mean, sd = standardize_fit(x)
    return (x - mean) / sd


def relevance_for_query(model: CobraModel, x, l2: float = DEFAULT_RIDGE) -> QueryRelevance:
    """Per-query relevance: regress the proximity labels on the
    standardized calibration covariates."""
    labels = gamma_labels(model, x)
    p = model.split.d_l.n_features
    if labels.min() == labels.max():
        return QueryRelevance(np.zeros(p + 1), True)
    features = _standardized_calibration(model)
    return QueryRelevance(fit_logistic(features, labels, l2), False)


def relevance_study(model: CobraModel, queries, l2: float = DEFAULT_RIDGE) -> RelevanceResult:
    """Aggregate per-query relevance over a query set.

    The aggregate for covariate j is the mean of |slope_j| over queries
    whose labels were not degenerate; fails if every query degenerates.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    p = model.split.d_l.n_features
    if queries.shape[1] != p:
        raise ValueError(f"queries have {queries.shape[1]} features, expected {p}")
    features = _standardized_calibration(model)
    rows = []
    degenerate = []
    for q in queries:
        labels = gamma_labels(model, q)
        if labels.min() == labels.max():
            rows.append(np.zeros(p + 1))
            degenerate.append(True)
        else:
            rows.append(fit_logistic(features, labels, l2))
            degenerate.append(False)
    per_query = np.stack(rows)
    degenerate = np.asarray(degenerate)
    informative = ~degenerate
    if not informative.any():
        raise ValueError("every query produced constant proximity labels")
    aggregate = np.abs(per_query[informative, 1:]).mean(axis=0)
    return RelevanceResult(per_query, degenerate, aggregate, queries.shape[0])
