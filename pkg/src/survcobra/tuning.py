"""Seeded random search over (epsilon, alpha, l_fraction).

Each trial triple is scored by inner cross-validation: fit the ensemble on
every fold's training part, predict the fold's validation records, and
average the objective (time-averaged Brier score, or negative
concordance).  Machine fits depend only on (fold, l_fraction), never on
epsilon or alpha, so they are cached and shared across trials; the seeds
they use derive from (seed, l_fraction) alone, which makes the cached
results identical to per-trial refits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cobra import CobraParams, _fit_stack, _predict_one
from .data import SurvivalDataset, kfold_split
from .exceptions import ConvergenceError, TuningError
from .learners import LearnerSpec, default_roster
from .metrics import concordance_td, integrated_brier
from .seeds import derive_seed

OBJECTIVES = ("ibs", "neg_concordance")

TABLE_ALPHAS = (0.2, 0.4, 0.6, 0.8, 1.0)
TABLE_L_FRACTIONS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
TABLE_EPSILON_RANGE = (1e-300, 0.9)


@dataclass(frozen=True)
class SearchSpace:
    """Hyperparameter search domain with the benchmark defaults."""

    trials: int
    objective: str = "ibs"
    seed: int = 0
    epsilon_range: tuple[float, float] = TABLE_EPSILON_RANGE
    alpha_choices: tuple[float, ...] = TABLE_ALPHAS
    l_fraction_choices: tuple[float, ...] = TABLE_L_FRACTIONS

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        lo, hi = self.epsilon_range
        if not 0.0 < lo < hi:
            raise ValueError("epsilon_range must satisfy 0 < low < high")
        if not self.alpha_choices or not self.l_fraction_choices:
            raise ValueError("choice lists may not be empty")


@dataclass(frozen=True, eq=False)
class TrialResult:
    """One scored triple; `error` is set when the trial failed."""

    params: CobraParams
    objective_value: float
    fold_values: tuple[float, ...]
    trial_index: int
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True, eq=False)
class _PreparedFold:
    """Distances and outcomes needed to score (epsilon, alpha) on one fold."""

    distances: np.ndarray  # (machines, n_validation, n_calibration)
    d_l: SurvivalDataset
    pop_km: object
    val_times: np.ndarray
    val_events: np.ndarray


def _stack_seed(seed: int, l_fraction: float) -> int:
    return derive_seed(seed, 1, int(round(l_fraction * 1e9)))


def _prepare_fold(folds, fold_idx, roster, l_fraction, seed, cache):
    key = (fold_idx, l_fraction)
    if key not in cache:
        fold_train, fold_val = folds[fold_idx]
        try:
            stack = _fit_stack(fold_train, roster, l_fraction, _stack_seed(seed, l_fraction))
            distances = stack.query_distances(fold_val.x)
            cache[key] = _PreparedFold(
                distances, stack.split.d_l, stack.pop_km, fold_val.time, fold_val.event
            )
        except (ValueError, ConvergenceError) as exc:
            cache[key] = exc
    prepared = cache[key]
    if isinstance(prepared, Exception):
        raise prepared
    return prepared


def _fold_objective(prepared: _PreparedFold, params: CobraParams, objective: str) -> float:
    need = params.consensus_count
    curves = [
        _predict_one(prepared.d_l, prepared.pop_km, prepared.distances[:, q, :], params.epsilon, need)
        for q in range(prepared.distances.shape[1])
    ]
    if objective == "ibs":
        return integrated_brier(curves, prepared.val_times, prepared.val_events)
    return -concordance_td(curves, prepared.val_times, prepared.val_events)


def _evaluate(params, folds, seed, objective, cache):
    values = tuple(
        _fold_objective(
            _prepare_fold(folds, i, params.roster, params.l_fraction, seed, cache),
            params,
            objective,
        )
        for i in range(len(folds))
    )
    return float(np.mean(values)), values


def evaluate_params(
    params: CobraParams,
    train: SurvivalDataset,
    inner_folds: int,
    objective: str = "ibs",
    seed: int = 0,
) -> float:
    """Mean objective of one parameter triple under inner cross-validation.

    Folds come from `kfold_split(train, inner_folds, derive_seed(seed, 0))`
    and each fold's ensemble is fit with seed
    `derive_seed(seed, 1, round(l_fraction * 1e9))`, so scores are exactly
    reproducible from (params, train, inner_folds, objective, seed).
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    folds = kfold_split(train, inner_folds, derive_seed(seed, 0))
    return _evaluate(params, folds, seed, objective, cache={})[0]


def draw_trials(space: SearchSpace, roster) -> list[CobraParams]:
    """The deterministic trial sequence for a search space and roster."""
    rng = np.random.default_rng(space.seed)
    lo, hi = space.epsilon_range
    out = []
    for _ in range(space.trials):
        epsilon = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        alpha = float(space.alpha_choices[rng.integers(len(space.alpha_choices))])
        l_fraction = float(space.l_fraction_choices[rng.integers(len(space.l_fraction_choices))])
        out.append(CobraParams(epsilon, alpha, l_fraction, roster))
    return out


def random_search(
    space: SearchSpace,
    train: SurvivalDataset,
    inner_folds: int = 3,
    roster: tuple[LearnerSpec, ...] | None = None,
):
    """Score `space.trials` random triples and return (best, trace).

    Ties in the objective keep the earlier trial.  Trials whose learners
    fail are recorded in the trace with an error message and skipped; if
    every trial fails a `TuningError` carries the full trace.
    """
    if roster is None:
        roster = default_roster()
    roster = tuple(roster)
    draws = draw_trials(space, roster)
    folds = kfold_split(train, inner_folds, derive_seed(space.seed, 0))
    results: list[TrialResult | None] = [None] * space.trials

    # group by l_fraction so at most inner_folds fitted stacks stay cached
    for l_fraction in sorted({p.l_fraction for p in draws}):
        cache: dict = {}
        for index, params in enumerate(draws):
            if params.l_fraction != l_fraction:
                continue
            try:
                value, fold_values = _evaluate(params, folds, space.seed, space.objective, cache)
                results[index] = TrialResult(params, value, fold_values, index)
            except (ValueError, ConvergenceError) as exc:
                results[index] = TrialResult(params, float("nan"), (), index, error=str(exc))
        cache.clear()

    trace = [r for r in results if r is not None]
    best = None
    for result in trace:
        if result.failed:
            continue
        if best is None or result.objective_value < best.objective_value:
            best = result
    if best is None:
        raise TuningError("every trial failed", trace)
    return best, trace
