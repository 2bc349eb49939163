"""Censored-data evaluation metrics.

Time-dependent concordance over comparable pairs, the inverse-probability-
of-censoring-weighted Brier score and its trapezoid time average, and the
D-calibration goodness-of-calibration test.  All functions are pure; fold
evaluation can run in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .curves import StepCurve, censoring_km, evaluate


@dataclass(frozen=True)
class MetricReport:
    """Per-fold evaluation summary for one model."""

    concordance: float
    ibs: float
    dcal_pass: bool
    dcal_pvalue: float
    fold_id: int


def _check_aligned(curves, times, events):
    times = np.asarray(times, dtype=float)
    events = np.asarray(events)
    if len(curves) != times.size or times.size != events.size:
        raise ValueError("curves, times, and events must have equal length")
    if not np.all((events == 0) | (events == 1)):
        raise ValueError("event flags must be 0 or 1")
    return list(curves), times, events.astype(np.int64)


def concordance_td(curves, times, events) -> float:
    """Time-dependent concordance.

    Over pairs (i, j) with an observed event for i and t_i < t_j, the
    fraction where subject i's predicted survival at t_i is lower than
    subject j's; prediction ties count one half.  1 is perfect ranking,
    0.5 is random.
    """
    curves, times, events = _check_aligned(curves, times, events)
    n = times.size
    # survival[j, i] = curve_j evaluated at t_i
    survival = np.stack([evaluate(c, times) for c in curves])
    num = 0.0
    den = 0
    for i in range(n):
        if events[i] != 1:
            continue
        comparable = times > times[i]
        if not comparable.any():
            continue
        s_i = survival[i, i]
        s_j = survival[comparable, i]
        num += float((s_i < s_j).sum()) + 0.5 * float((s_i == s_j).sum())
        den += int(comparable.sum())
    if den == 0:
        raise ValueError("no comparable pairs: concordance is undefined")
    return num / den


def _brier_from_values(survival_at_t, times, events, t, g_at_times, g_at_t):
    """One Brier evaluation given survival and censoring values; excludes
    records whose required censoring weight is zero and renormalizes."""
    had_event = (times <= t) & (events == 1)
    still_at_risk = times > t
    excluded = (had_event & (g_at_times == 0.0)) | (still_at_risk & (g_at_t == 0.0))
    n_eff = times.size - int(excluded.sum())
    if n_eff == 0:
        raise ValueError(f"every record lost its censoring weight at t={t}")
    keep = ~excluded
    total = 0.0
    mask1 = had_event & keep
    if mask1.any():
        total += float((survival_at_t[mask1] ** 2 / g_at_times[mask1]).sum())
    mask2 = still_at_risk & keep
    if mask2.any():
        total += float(((1.0 - survival_at_t[mask2]) ** 2 / g_at_t).sum())
    return total / n_eff


def brier_censored(curves, times, events, t, censoring_curve: StepCurve) -> float:
    """Censoring-weighted Brier score at time `t`.

    Records already censored by `t` contribute nothing; event records are
    weighted by 1/G(y_i) and at-risk records by 1/G(t), where G is the
    censoring-distribution Kaplan-Meier.
    """
    curves, times, events = _check_aligned(curves, times, events)
    t = float(t)
    survival_at_t = np.array([evaluate(c, t) for c in curves])
    g_at_times = evaluate(censoring_curve, times)
    g_at_t = float(evaluate(censoring_curve, t))
    return _brier_from_values(survival_at_t, times, events, t, g_at_times, g_at_t)


def integrated_brier(curves, times, events, t_grid=None, censoring_curve=None) -> float:
    """Trapezoid average of the censored Brier score.

    The default grid is every distinct event time of the evaluation
    sample, so the average runs from the first to the last event; the
    default censoring curve is estimated on the same sample.
    """
    curves, times, events = _check_aligned(curves, times, events)
    if t_grid is None:
        t_grid = np.unique(times[events == 1])
    else:
        t_grid = np.asarray(t_grid, dtype=float)
        if np.any(np.diff(t_grid) <= 0.0):
            raise ValueError("t_grid must be strictly increasing")
    if t_grid.size < 2:
        raise ValueError("the integration grid needs at least two time points")
    if censoring_curve is None:
        censoring_curve = censoring_km(times, events)
    survival = np.stack([evaluate(c, t_grid) for c in curves])  # (n, grid)
    g_at_times = evaluate(censoring_curve, times)
    g_at_grid = evaluate(censoring_curve, t_grid)
    scores = np.array(
        [
            _brier_from_values(survival[:, k], times, events, float(t_grid[k]), g_at_times, float(g_at_grid[k]))
            for k in range(t_grid.size)
        ]
    )
    gaps = np.diff(t_grid)
    area = float((0.5 * (scores[:-1] + scores[1:]) * gaps).sum())
    return area / float(t_grid[-1] - t_grid[0])


def d_calibration_masses(curves, times, events, bins: int = 10) -> np.ndarray:
    """Bin masses behind the D-calibration statistic.

    Each uncensored record drops unit mass into the bin holding its
    predicted survival probability at its observed time; a censored
    record spreads its mass below that probability (partial mass to its
    own bin, uniform mass to every lower bin).  Masses sum to the record
    count.
    """
    if bins < 2:
        raise ValueError("bins must be at least 2")
    curves, times, events = _check_aligned(curves, times, events)
    width = 1.0 / bins
    masses = np.zeros(bins)
    p = np.array([evaluate(c, y) for c, y in zip(curves, times.tolist())])
    for pi, event in zip(p, events):
        b = min(int(pi * bins), bins - 1)
        if event == 1:
            masses[b] += 1.0
            continue
        if pi <= 0.0:
            masses[0] += 1.0
            continue
        lower_edge = b * width
        masses[b] += (pi - lower_edge) / pi
        if b:
            masses[:b] += width / pi
    return masses


def d_calibration(curves, times, events, bins: int = 10, level: float = 0.05):
    """Chi-square uniformity test on the D-calibration bin masses.

    Returns (passed, p_value), passing when the p-value exceeds `level`.
    """
    masses = d_calibration_masses(curves, times, events, bins)
    n = len(times)
    expected = n / bins
    stat = float(((masses - expected) ** 2 / expected).sum())
    pvalue = float(chi2.sf(stat, bins - 1))
    return pvalue > level, pvalue
