"""Step-function survival curves and the nonparametric estimators on them.

A `StepCurve` is a right-continuous piecewise-constant function on
[0, inf).  Survival-kind curves start at 1 and are non-increasing within
[0, 1]; cumulative-kind curves (cumulative hazards) start at 0 and are
non-decreasing.  The module also provides the Kaplan-Meier product-limit
estimator, the Nelson-Aalen cumulative-hazard estimator, the
censoring-distribution Kaplan-Meier used for inverse-probability-of-
censoring weights, and the time-averaged area distance between two curves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SURVIVAL = "survival"
CUMULATIVE = "cumulative"

_BASELINES = {SURVIVAL: 1.0, CUMULATIVE: 0.0}


def _frozen(arr: np.ndarray, original) -> np.ndarray:
    """Read-only copy-on-need: never freezes (or aliases) the caller's array."""
    if arr.flags.writeable:
        if arr is original:
            arr = arr.copy()
        arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class StepCurve:
    """Right-continuous step function with jumps at `times`.

    `values[i]` is the function value on [times[i], times[i+1]); before the
    first jump the curve sits at its baseline (1 for survival curves, 0 for
    cumulative-hazard curves).  Curves are immutable and safe to share.
    """

    times: np.ndarray
    values: np.ndarray
    kind: str = SURVIVAL

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or values.ndim != 1 or times.shape != values.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if self.kind not in _BASELINES:
            raise ValueError(f"unknown curve kind {self.kind!r}")
        if times.size:
            if not np.all(np.isfinite(times)) or not np.all(np.isfinite(values)):
                raise ValueError("curve times and values must be finite")
            if times[0] < 0.0:
                raise ValueError("jump times must be nonnegative")
            if np.any(np.diff(times) <= 0.0):
                raise ValueError("jump times must be strictly increasing")
            if self.kind == SURVIVAL:
                if np.any(values < 0.0) or np.any(values > 1.0):
                    raise ValueError("survival values must lie in [0, 1]")
                if np.any(np.diff(values) > 0.0):
                    raise ValueError("survival values must be non-increasing")
            else:
                if np.any(values < 0.0):
                    raise ValueError("cumulative values must be nonnegative")
                if np.any(np.diff(values) < 0.0):
                    raise ValueError("cumulative values must be non-decreasing")
        object.__setattr__(self, "times", _frozen(times, self.times))
        object.__setattr__(self, "values", _frozen(values, self.values))

    @property
    def baseline(self) -> float:
        return _BASELINES[self.kind]

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepCurve):
            return NotImplemented
        return (
            self.kind == other.kind
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __call__(self, t):
        return evaluate(self, t)

    def to_rows(self):
        """Yield (time, value) pairs for CSV serialization, baseline first."""
        yield (0.0, self.baseline)
        for t, v in zip(self.times.tolist(), self.values.tolist()):
            yield (t, v)


def evaluate(curve: StepCurve, t):
    """Evaluate a step curve at scalar or array `t` (right-continuously)."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("evaluation times must be nonnegative")
    if curve.times.size == 0:
        out = np.full(arr.shape, curve.baseline)
        return float(out) if arr.ndim == 0 else out
    idx = np.searchsorted(curve.times, arr, side="right") - 1
    out = np.where(idx < 0, curve.baseline, curve.values[np.maximum(idx, 0)])
    return float(out) if arr.ndim == 0 else out


def _event_table(times, events):
    """Unique event times with event counts and at-risk counts.

    Ties are handled with the usual convention that records censored at an
    event time are still at risk at that time.
    """
    t = np.asarray(times, dtype=float)
    e = np.asarray(events)
    if t.ndim != 1 or e.shape != t.shape:
        raise ValueError("times and events must be 1-d arrays of equal length")
    if t.size == 0:
        raise ValueError("empty input: at least one record is required")
    if not np.all(np.isfinite(t)):
        raise ValueError("times must be finite")
    if not np.all((e == 0) | (e == 1)):
        raise ValueError("event flags must be 0 or 1")
    event_times = t[e == 1]
    if event_times.size == 0:
        empty = np.empty(0, dtype=float)
        return empty, empty.copy(), empty.copy()
    unique_times, d = np.unique(event_times, return_counts=True)
    sorted_t = np.sort(t)
    r = t.size - np.searchsorted(sorted_t, unique_times, side="left")
    return unique_times, d.astype(float), r.astype(float)


def product_limit(times, events) -> StepCurve:
    """Product-limit curve of a (possibly event-free) sample.

    With no observed events the curve is constant 1.  `kaplan_meier` adds
    the at-least-one-event check on top of this.
    """
    u, d, r = _event_table(times, events)
    return StepCurve(u, np.cumprod(1.0 - d / r) if u.size else u, SURVIVAL)


def kaplan_meier(times, events) -> StepCurve:
    """Kaplan-Meier estimate of the survival function.

    Jumps occur at event times only; censored-only times change the risk
    set but add no jump.  Requires at least one observed event.
    """
    curve = product_limit(times, events)
    if curve.times.size == 0:
        raise ValueError("Kaplan-Meier requires at least one observed event")
    return curve


def nelson_aalen(times, events) -> StepCurve:
    """Nelson-Aalen estimate of the cumulative hazard (sum of d/r)."""
    u, d, r = _event_table(times, events)
    return StepCurve(u, np.cumsum(d / r) if u.size else u, CUMULATIVE)


def censoring_km(times, events) -> StepCurve:
    """Kaplan-Meier of the censoring distribution (flipped event flags).

    With no censored records the curve is constant 1.
    """
    e = np.asarray(events)
    if not np.all((e == 0) | (e == 1)):
        raise ValueError("event flags must be 0 or 1")
    return product_limit(times, 1 - e)


def distance_grid(a: StepCurve, b: StepCurve, t_max: float) -> np.ndarray:
    """Grid on which the area distance of two step curves is exact:
    the union of both curves' jump times plus the endpoints 0 and t_max."""
    if not np.isfinite(t_max) or t_max <= 0.0:
        raise ValueError("t_max must be positive and finite")
    return np.unique(np.concatenate(([0.0], a.times, b.times, [float(t_max)])))


def area_distance(a: StepCurve, b: StepCurve, grid) -> float:
    """Time-averaged absolute area between two curves over `grid`.

    Left-Riemann sum of |a - b| over consecutive grid points, divided by
    the grid span.  Exact whenever both curves are constant between grid
    points; symmetric and within [0, 1] for survival curves.
    """
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 2:
        raise ValueError("grid must contain at least two points")
    if np.any(np.diff(g) <= 0.0):
        raise ValueError("grid must be strictly increasing")
    span = g[-1] - g[0]
    if span <= 0.0:
        raise ValueError("degenerate grid: zero span")
    left = g[:-1]
    gap = np.abs(evaluate(a, left) - evaluate(b, left))
    return float(np.sum(gap * np.diff(g)) / span)
