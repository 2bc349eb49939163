"""Hand-rolled slow oracles shared by the test modules.

Everything here is written independently of the package internals (plain
loops, textbook formulas) so the fast implementations are checked against
a second derivation, not against themselves.
"""

import numpy as np

from survcobra.data import SurvivalDataset


def slow_km(times, events):
    """Sequential product-limit: returns (jump_times, values) lists."""
    times = list(map(float, times))
    events = list(map(int, events))
    uniq = sorted({t for t, e in zip(times, events) if e == 1})
    out_t, out_v = [], []
    s = 1.0
    for u in uniq:
        d = sum(1 for t, e in zip(times, events) if e == 1 and t == u)
        r = sum(1 for t in times if t >= u)
        s *= 1.0 - d / r
        out_t.append(u)
        out_v.append(s)
    return out_t, out_v


def slow_logrank(times_a, events_a, times_b, events_b):
    """Two-sample log-rank chi-square statistic by explicit counting."""
    times = list(times_a) + list(times_b)
    events = list(events_a) + list(events_b)
    group_a = [True] * len(times_a) + [False] * len(times_b)
    uniq = sorted({t for t, e in zip(times, events) if e == 1})
    observed = expected = variance = 0.0
    for u in uniq:
        r = sum(1 for t in times if t >= u)
        d = sum(1 for t, e in zip(times, events) if e == 1 and t == u)
        r1 = sum(1 for t, a in zip(times, group_a) if a and t >= u)
        d1 = sum(1 for t, e, a in zip(times, events, group_a) if a and e == 1 and t == u)
        observed += d1
        expected += d * r1 / r
        if r > 1:
            variance += d * (r1 / r) * (1.0 - r1 / r) * (r - d) / (r - 1)
    if variance <= 0.0:
        return 0.0
    return (observed - expected) ** 2 / variance


def all_splits_logrank(x, times, events, min_leaf):
    """Every admissible (feature, midpoint-threshold) split with its
    log-rank statistic, by brute force."""
    n, p = x.shape
    results = []
    for f in range(p):
        vals = sorted(set(x[:, f].tolist()))
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = 0.5 * (lo + hi)
            left = x[:, f] <= thr
            if left.sum() < min_leaf or (~left).sum() < min_leaf:
                continue
            stat = slow_logrank(times[left], events[left], times[~left], events[~left])
            results.append((f, thr, stat))
    return results


def random_dataset(rng, n, p=2, event_rate=0.7, scale=3.0):
    """Small random censored dataset guaranteed to contain an event."""
    x = rng.uniform(size=(n, p))
    times = rng.uniform(0.1, scale, size=n)
    events = (rng.uniform(size=n) < event_rate).astype(int)
    events[int(rng.integers(n))] = 1
    return SurvivalDataset(x, times, events, [f"x{i}" for i in range(p)])


def oracle_cobra_curve(model, x):
    """Reference prediction: enumerate the proximity indicator straight from
    its definition (per-pair distance grids), then hand-roll the
    product-limit over the members.  Returns (times, values) lists."""
    import math

    from survcobra.curves import area_distance, distance_grid

    d_k = model.split.d_k
    d_l = model.split.d_l
    t_max = float(d_k.time.max())
    machines = model.machines
    need = math.ceil(len(machines) * model.params.alpha - 1e-9)
    members = []
    for j in range(d_l.n):
        close = 0
        for machine in machines:
            a = machine.predict_curve(x)
            b = machine.predict_curve(d_l.x[j])
            dist = area_distance(a, b, distance_grid(a, b, t_max))
            if dist <= model.params.epsilon:
                close += 1
        if close >= need:
            members.append(j)
    times = [float(d_l.time[j]) for j in members]
    events = [int(d_l.event[j]) for j in members]
    if not members or not any(events):
        times = [float(t) for t in d_l.time]
        events = [int(e) for e in d_l.event]
    return slow_km(times, events)
