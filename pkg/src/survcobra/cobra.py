"""Proximity-consensus survival ensemble.

The training set is split into a machine-training part and a calibration
part.  Every roster machine is fit on the first part and its predicted
curve for every calibration record is cached.  To predict for a query x,
a calibration record j joins the proximity set when at least a consensus
count of machines place their curve for j within area-distance epsilon of
their curve for x; the prediction is the product-limit curve over the
proximity set's observed outcomes.  An empty proximity set (or one with
no events) falls back to the population Kaplan-Meier of the calibration
part, the limit the aggregation reaches as epsilon grows.

Distances are evaluated on one shared grid per fitted model ({0} union
the machine-training event times union the largest observed training
time).  Every predicted curve is constant between consecutive grid
points, so the left-Riemann sum there equals the area distance on the
per-pair jump-time union exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial.distance import cdist

from .curves import StepCurve, kaplan_meier, product_limit
from .data import DatasetSplit, SurvivalDataset, cobra_split
from .learners import BaseSurvivalModel, LearnerSpec, fit


@dataclass(frozen=True)
class CobraParams:
    """Ensemble hyperparameters.

    `alpha` is the required consensus fraction; the consensus count is
    ceil(alpha * len(roster)), so fractional products round up ("at least
    a fraction alpha" of the machines must agree).
    """

    epsilon: float
    alpha: float
    l_fraction: float
    roster: tuple[LearnerSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "roster", tuple(self.roster))
        if not self.roster:
            raise ValueError("the roster needs at least one learner")
        if not (np.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise ValueError("epsilon must be positive")
        if not 0.0 < self.l_fraction < 1.0:
            raise ValueError("l_fraction must lie strictly between 0 and 1")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")

    @property
    def n_machines(self) -> int:
        return len(self.roster)

    @property
    def consensus_count(self) -> int:
        need = int(math.ceil(self.n_machines * self.alpha - 1e-9))
        return min(max(need, 1), self.n_machines)


class _CobraStack:
    """Everything a fitted ensemble carries besides (epsilon, alpha):
    the split, the fitted machines, and the cached calibration curves
    evaluated on the shared distance grid."""

    def __init__(self, split: DatasetSplit, machines, grid, cal_values, pop_km):
        self.split = split
        self.machines = tuple(machines)
        self.grid = grid
        self.widths = np.diff(grid)
        self.span = float(grid[-1] - grid[0])
        self.cal_values = tuple(cal_values)  # one (n_l, grid) matrix per machine
        self.pop_km = pop_km

    @cached_property
    def calibration_curves(self):
        """Per machine, the cached curve for each calibration record."""
        return tuple(
            tuple(_curve_from_row(self.grid, row) for row in values)
            for values in self.cal_values
        )

    def query_distances(self, x_matrix) -> np.ndarray:
        """(machines, queries, calibration) tensor of area distances."""
        n_q = x_matrix.shape[0]
        n_l = self.split.d_l.n
        out = np.empty((len(self.machines), n_q, n_l))
        for m, machine in enumerate(self.machines):
            values = machine.predict_values(x_matrix, self.grid)
            qw = values[:, :-1] * self.widths
            cw = self.cal_values[m][:, :-1] * self.widths
            out[m] = cdist(qw, cw, metric="cityblock") / self.span
        return out


def _curve_from_row(grid, row) -> StepCurve:
    changed = np.flatnonzero(row[1:] != row[:-1]) + 1
    return StepCurve(grid[changed], row[changed])


def _distance_grid_for(d_k: SurvivalDataset) -> np.ndarray:
    t_max = float(d_k.time.max())
    event_times = d_k.time[d_k.event == 1]
    return np.unique(np.concatenate(([0.0], event_times, [t_max])))


def _fit_stack(train, roster, l_fraction, seed) -> _CobraStack:
    split = cobra_split(train, l_fraction, seed)
    machines = [fit(spec, split.d_k) for spec in roster]
    grid = _distance_grid_for(split.d_k)
    cal_values = [machine.predict_values(split.d_l.x, grid) for machine in machines]
    pop_km = kaplan_meier(split.d_l.time, split.d_l.event)
    return _CobraStack(split, machines, grid, cal_values, pop_km)


@dataclass(frozen=True, eq=False)
class CobraModel:
    """Fitted ensemble: hyperparameters plus the fitted stack."""

    params: CobraParams
    stack: _CobraStack

    @property
    def split(self) -> DatasetSplit:
        return self.stack.split

    @property
    def machines(self) -> tuple[BaseSurvivalModel, ...]:
        return self.stack.machines

    @property
    def calibration_curves(self):
        return self.stack.calibration_curves

    @property
    def population_km(self) -> StepCurve:
        return self.stack.pop_km

    def _check_query(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = self.split.d_k.n_features
        if x.shape != (p,):
            raise ValueError(f"query has shape {x.shape}, expected ({p},)")
        return x


@dataclass(frozen=True)
class ProximityAggregate:
    """Event times, event counts, and at-risk counts over the proximity set."""

    member_indices: np.ndarray
    event_times: np.ndarray
    event_counts: np.ndarray
    risk_counts: np.ndarray


def fit_cobra(train: SurvivalDataset, params: CobraParams, seed: int) -> CobraModel:
    """Split `train`, fit every roster machine on the machine-training part,
    and cache each machine's curve for every calibration record."""
    return CobraModel(params, _fit_stack(train, params.roster, params.l_fraction, seed))


def _member_mask(distances_mq, epsilon, need) -> np.ndarray:
    """distances_mq: (machines, n_l) for one query -> bool member mask."""
    return (distances_mq <= epsilon).sum(axis=0) >= need


def gamma_labels(model: CobraModel, x) -> np.ndarray:
    """The 0/1 proximity indicator of every calibration record for query x."""
    x = model._check_query(x)
    distances = model.stack.query_distances(x[None, :])[:, 0, :]
    return _member_mask(distances, model.params.epsilon, model.params.consensus_count).astype(
        np.int64
    )


def gamma_indicator(model: CobraModel, x, j: int) -> int:
    """Proximity indicator of calibration record `j` for query x."""
    n_l = model.split.d_l.n
    if not 0 <= j < n_l:
        raise IndexError(f"calibration index {j} out of range [0, {n_l})")
    return int(gamma_labels(model, x)[j])


def proximity_aggregate(model: CobraModel, x) -> ProximityAggregate:
    """Counts behind the aggregated curve at query x."""
    labels = gamma_labels(model, x)
    members = np.flatnonzero(labels)
    d_l = model.split.d_l
    times = d_l.time[members]
    events = d_l.event[members]
    event_times = np.unique(times[events == 1])
    event_counts = np.array(
        [int(((times == t) & (events == 1)).sum()) for t in event_times], dtype=np.int64
    )
    risk_counts = np.array([int((times >= t).sum()) for t in event_times], dtype=np.int64)
    return ProximityAggregate(members, event_times, event_counts, risk_counts)


def _predict_one(d_l: SurvivalDataset, pop_km: StepCurve, distances_mq, epsilon, need) -> StepCurve:
    members = np.flatnonzero(_member_mask(distances_mq, epsilon, need))
    if members.size == 0:
        return pop_km
    events = d_l.event[members]
    if not np.any(events == 1):
        return pop_km
    return product_limit(d_l.time[members], events)


def predict_from_distances(stack: _CobraStack, distances, epsilon, need):
    """Aggregated curves for precomputed (machines, queries, n_l) distances."""
    d_l = stack.split.d_l
    return [
        _predict_one(d_l, stack.pop_km, distances[:, q, :], epsilon, need)
        for q in range(distances.shape[1])
    ]


def predict_cobra(model: CobraModel, x) -> StepCurve:
    """Aggregated survival curve at query x (population KM fallback when
    the proximity set is empty or event-free)."""
    x = model._check_query(x)
    distances = model.stack.query_distances(x[None, :])
    return predict_from_distances(
        model.stack, distances, model.params.epsilon, model.params.consensus_count
    )[0]


def predict_cobra_batch(model: CobraModel, queries) -> list[StepCurve]:
    """Element-wise `predict_cobra`; identical results to sequential calls."""
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    p = model.split.d_k.n_features
    if q.shape[1] != p:
        raise ValueError(f"queries have {q.shape[1]} features, expected {p}")
    distances = model.stack.query_distances(q)
    return predict_from_distances(
        model.stack, distances, model.params.epsilon, model.params.consensus_count
    )
