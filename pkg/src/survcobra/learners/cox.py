"""Proportional-hazards model with ridge or lasso penalty.

The coefficient vector maximizes the log partial likelihood (Breslow tie
handling) minus the penalty: ridge solves by Newton iterations with step
halving, lasso by cyclic coordinate descent on the local quadratic
approximation.  The baseline cumulative hazard uses the Breslow estimator,
so the conditional curve is exp(-H0(t) * exp(beta . (x - mean))).

Covariates are standardized internally (train mean/sd); reported
coefficients are rescaled back to the original feature units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..curves import CUMULATIVE, StepCurve
from ..data import SurvivalDataset, kfold_split
from ..exceptions import ConvergenceError
from .base import BaseSurvivalModel, dataset_arrays, standardize_fit

MAX_OUTER_ITER = 100
COEF_TOL = 1e-7


def _risk_structure(times, events):
    """Time-sorted views plus the unique-event-time bookkeeping reused by
    every likelihood pass."""
    order = np.argsort(times, kind="stable")
    ys = times[order]
    es = events[order]
    unique_times, d = np.unique(ys[es == 1], return_counts=True)
    first_at_risk = np.searchsorted(ys, unique_times, side="left")
    return order, ys, es, unique_times, d.astype(float), first_at_risk


class _PartialLikelihood:
    """Log partial likelihood, gradient, and curvature for fixed data."""

    def __init__(self, x, times, events):
        self.order, self.ys, self.es, self.u, self.d, self.pos = _risk_structure(
            times, events
        )
        self.xs = x[self.order]
        self.n, self.p = x.shape
        if self.u.size == 0:
            raise ValueError("the partial likelihood needs at least one event")
        self._event_rows = self.es == 1
        self._sx_events = self.xs[self._event_rows].sum(axis=0)

    def _weights(self, beta):
        eta = self.xs @ beta
        shift = eta.max()
        w = np.exp(eta - shift)
        rev_w = np.cumsum(w[::-1])[::-1]
        return eta, shift, w, rev_w

    def value(self, beta) -> float:
        eta, shift, _, rev_w = self._weights(beta)
        event_term = float(eta[self._event_rows].sum())
        log_w = np.log(rev_w[self.pos]) + shift
        return event_term - float(self.d @ log_w)

    def gradient(self, beta) -> np.ndarray:
        _, _, w, rev_w = self._weights(beta)
        rev_wx = np.cumsum((w[:, None] * self.xs)[::-1], axis=0)[::-1]
        mu = rev_wx[self.pos] / rev_w[self.pos][:, None]
        return self._sx_events - self.d @ mu

    def curvature(self, beta) -> np.ndarray:
        """Negative Hessian of the log partial likelihood (PSD)."""
        _, _, w, rev_w = self._weights(beta)
        rev_wx = np.cumsum((w[:, None] * self.xs)[::-1], axis=0)[::-1]
        h = np.zeros((self.p, self.p))
        s2 = np.zeros((self.p, self.p))
        boundary = np.append(self.pos, self.n)
        for k in range(self.u.size - 1, -1, -1):
            lo, hi = boundary[k], boundary[k + 1]
            if hi > lo:
                chunk = self.xs[lo:hi]
                s2 += (w[lo:hi, None] * chunk).T @ chunk
            wk = rev_w[self.pos[k]]
            mu = rev_wx[self.pos[k]] / wk
            h += self.d[k] * (s2 / wk - np.outer(mu, mu))
        return h

    def eta_derivatives(self, beta):
        """Per-record gradient and (nonnegative) diagonal curvature of the
        log partial likelihood with respect to the linear predictor."""
        eta, _, w, rev_w = self._weights(beta)
        base = self.d / rev_w[self.pos]
        base2 = self.d / rev_w[self.pos] ** 2
        cum_a = np.cumsum(base)
        cum_b = np.cumsum(base2)
        last = np.searchsorted(self.u, self.ys, side="right") - 1
        a = np.where(last >= 0, cum_a[np.maximum(last, 0)], 0.0)
        b = np.where(last >= 0, cum_b[np.maximum(last, 0)], 0.0)
        g = self.es - w * a
        h = np.maximum(w * a - w * w * b, 0.0)
        return eta, g, h

    def unsort(self, values):
        out = np.empty_like(values)
        out[self.order] = values
        return out


def cox_log_partial_likelihood(x, times, events, beta) -> float:
    """Breslow-ties log partial likelihood at `beta` (no penalty)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    pl = _PartialLikelihood(x, np.asarray(times, float), np.asarray(events, float))
    return pl.value(np.asarray(beta, dtype=float))


def cox_gradient(x, times, events, beta) -> np.ndarray:
    """Analytic gradient of the log partial likelihood at `beta`."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    pl = _PartialLikelihood(x, np.asarray(times, float), np.asarray(events, float))
    return pl.gradient(np.asarray(beta, dtype=float))


def _soft_threshold(value: float, cut: float) -> float:
    if value > cut:
        return value - cut
    if value < -cut:
        return value + cut
    return 0.0


def _newton_ridge(pl: _PartialLikelihood, lam: float):
    beta = np.zeros(pl.p)
    trace = [pl.value(beta) - 0.5 * lam * float(beta @ beta)]
    for _ in range(MAX_OUTER_ITER):
        grad = pl.gradient(beta) - lam * beta
        hess = pl.curvature(beta) + lam * np.eye(pl.p)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            raise ConvergenceError("non-finite Newton step", tuple(trace))
        scale = 1.0
        current = trace[-1]
        for _ in range(40):
            candidate = beta + scale * step
            value = pl.value(candidate) - 0.5 * lam * float(candidate @ candidate)
            if np.isfinite(value) and value >= current - 1e-12:
                break
            scale *= 0.5
        else:
            if float(np.max(np.abs(grad))) < 1e-8:
                break
            raise ConvergenceError("step halving exhausted", tuple(trace))
        change = float(np.max(np.abs(candidate - beta)))
        beta = candidate
        trace.append(value)
        if change < COEF_TOL:
            return beta, tuple(trace)
    else:
        raise ConvergenceError(
            f"ridge solver did not converge in {MAX_OUTER_ITER} iterations",
            tuple(trace),
        )
    return beta, tuple(trace)


def _coordinate_descent_lasso(pl: _PartialLikelihood, lam: float):
    beta = np.zeros(pl.p)
    xs = pl.xs
    trace = [pl.value(beta) - lam * float(np.abs(beta).sum())]
    for _ in range(MAX_OUTER_ITER):
        eta, g, h = pl.eta_derivatives(beta)
        if not np.all(np.isfinite(g)):
            raise ConvergenceError("non-finite working gradient", tuple(trace))
        active = h > 1e-12
        z = np.where(active, eta + np.divide(g, h, out=np.zeros_like(g), where=active), eta)
        w = np.where(active, h, 0.0)
        denom = (w[:, None] * xs * xs).sum(axis=0)
        candidate = beta.copy()
        resid = z - xs @ candidate
        for _ in range(1000):
            biggest = 0.0
            for j in range(pl.p):
                if denom[j] <= 0.0:
                    continue
                old = candidate[j]
                rho = float(w @ (xs[:, j] * resid)) + denom[j] * old
                new = _soft_threshold(rho, lam) / denom[j]
                if new != old:
                    resid += xs[:, j] * (old - new)
                    candidate[j] = new
                    biggest = max(biggest, abs(new - old))
            if biggest < 1e-9:
                break
        direction = candidate - beta
        scale = 1.0
        current = trace[-1]
        for _ in range(40):
            trial = beta + scale * direction
            value = pl.value(trial) - lam * float(np.abs(trial).sum())
            if np.isfinite(value) and value >= current - 1e-12:
                break
            scale *= 0.5
        else:
            if float(np.max(np.abs(direction))) < COEF_TOL:
                break
            raise ConvergenceError("step halving exhausted", tuple(trace))
        change = float(np.max(np.abs(trial - beta)))
        beta = trial
        trace.append(value)
        if change < COEF_TOL:
            return beta, tuple(trace)
    else:
        raise ConvergenceError(
            f"lasso solver did not converge in {MAX_OUTER_ITER} iterations",
            tuple(trace),
        )
    return beta, tuple(trace)


@dataclass(frozen=True, eq=False)
class CoxModel(BaseSurvivalModel):
    """Fitted proportional-hazards model."""

    beta: np.ndarray
    baseline_cumhaz: StepCurve
    feature_means: np.ndarray
    feature_sds: np.ndarray
    beta_standardized: np.ndarray
    penalty_kind: str
    penalty: float
    objective_trace: tuple[float, ...] = field(repr=False)

    @property
    def n_features(self) -> int:  # type: ignore[override]
        return self.beta.shape[0]

    def risk_score(self, x) -> float:
        x = self._check_vector(x)
        z = (x - self.feature_means) / self.feature_sds
        return float(np.exp(z @ self.beta_standardized))

    def predict_curve(self, x) -> StepCurve:
        r = self.risk_score(x)
        return StepCurve(
            self.baseline_cumhaz.times, np.exp(-self.baseline_cumhaz.values * r)
        )

    def predict_values(self, x, grid) -> np.ndarray:
        x = self._check_matrix(x)
        grid = np.asarray(grid, dtype=float)
        z = (x - self.feature_means) / self.feature_sds
        r = np.exp(z @ self.beta_standardized)
        h = self.baseline_cumhaz(grid)
        return np.exp(-(r[:, None] * h[None, :]))


def _breslow_from_arrays(beta_standardized, z, times, events) -> StepCurve:
    """Breslow cumulative-hazard estimate on standardized covariates:
    jump d(t) / sum of exp(beta . z_j) over the risk set at each event time."""
    order, ys, es, u, d, pos = _risk_structure(times, events)
    w = np.exp(z[order] @ beta_standardized)
    rev_w = np.cumsum(w[::-1])[::-1]
    jumps = d / rev_w[pos]
    return StepCurve(u, np.cumsum(jumps), kind=CUMULATIVE)


def breslow_baseline(model: CoxModel, data: SurvivalDataset) -> StepCurve:
    """Recompute the Breslow baseline of a fitted model on `data`."""
    z = (data.x - model.feature_means) / model.feature_sds
    return _breslow_from_arrays(model.beta_standardized, z, data.time, data.event.astype(float))


def _cv_penalty(data: SurvivalDataset, penalty_kind: str, folds: int, seed: int) -> float:
    """Pick the penalty by cross-validated held-out log partial likelihood
    over a 10-point log grid anchored at the zero-coefficient gradient."""
    x, times, events = dataset_arrays(data)
    mean, sd = standardize_fit(x)
    z = (x - mean) / sd
    lam_max = float(np.max(np.abs(cox_gradient(z, times, events, np.zeros(x.shape[1])))))
    if lam_max == 0.0:
        lam_max = 1.0
    grid = lam_max * np.logspace(0.0, -4.0, 10)
    pairs = kfold_split(data, folds, seed)
    best_lam, best_score = None, -np.inf
    for lam in grid:  # descending: ties prefer the stronger penalty
        score = 0.0
        try:
            for train, test in pairs:
                model = fit_cox(train, penalty_kind, float(lam))
                held_out = cox_log_partial_likelihood(
                    test.x - model.feature_means, test.time, test.event, model.beta
                )
                score += held_out
        except (ConvergenceError, ValueError):
            continue
        if score > best_score:
            best_score, best_lam = score, float(lam)
    if best_lam is None:
        raise ConvergenceError(f"no penalty in the CV grid produced a fit (grid max {lam_max:g})")
    return best_lam


def fit_cox(
    data: SurvivalDataset,
    penalty_kind: str,
    penalty: float | None = None,
    cv_folds: int = 3,
    cv_seed: int = 0,
) -> CoxModel:
    """Fit a penalized Cox model.

    `penalty` is the raw multiplier on 0.5*||beta||^2 (ridge) or ||beta||_1
    (lasso) in standardized-covariate space.  When None it is chosen by
    `cv_folds`-fold cross-validation.
    """
    if penalty_kind not in ("ridge", "lasso"):
        raise ValueError(f"unknown penalty kind {penalty_kind!r}")
    if penalty is not None and penalty < 0.0:
        raise ValueError("penalty must be nonnegative")
    if penalty is None:
        penalty = _cv_penalty(data, penalty_kind, cv_folds, cv_seed)
    x, times, events = dataset_arrays(data)
    mean, sd = standardize_fit(x)
    z = (x - mean) / sd
    pl = _PartialLikelihood(z, times, events)
    if penalty_kind == "ridge":
        beta_std, trace = _newton_ridge(pl, float(penalty))
    else:
        beta_std, trace = _coordinate_descent_lasso(pl, float(penalty))
    baseline = _breslow_from_arrays(beta_std, z, times, events)
    return CoxModel(
        beta=beta_std / sd,
        baseline_cumhaz=baseline,
        feature_means=mean,
        feature_sds=sd,
        beta_standardized=beta_std,
        penalty_kind=penalty_kind,
        penalty=float(penalty),
        objective_trace=trace,
    )
