import dataclasses

import numpy as np
import pytest

from survcobra.cobra import (
    CobraModel,
    CobraParams,
    _member_mask,
    fit_cobra,
    gamma_indicator,
    gamma_labels,
    predict_cobra,
    predict_cobra_batch,
    proximity_aggregate,
)
from survcobra.curves import kaplan_meier
from survcobra.learners import LearnerSpec
from helpers import oracle_cobra_curve, random_dataset

TINY_ROSTER = (
    LearnerSpec("knn_survival", {"k": 3}),
    LearnerSpec("survival_tree", {"max_depth": 2, "min_leaf": 2}),
)

FIVE_ROSTER = (
    LearnerSpec("survival_tree", {"max_depth": 3, "min_leaf": 3}),
    LearnerSpec("random_survival_forest", {"n_trees": 5, "min_leaf": 3, "seed": 1}),
    LearnerSpec("cox_ridge", {"penalty": 1.0}),
    LearnerSpec("cox_lasso", {"penalty": 1.0}),
    LearnerSpec("knn_survival", {"k": 5}),
)


def small_model(seed=0, n=60, epsilon=0.1, alpha=0.5, l_fraction=0.4, roster=TINY_ROSTER):
    rng = np.random.default_rng(seed)
    train = random_dataset(rng, n, p=2, event_rate=0.7)
    params = CobraParams(epsilon=epsilon, alpha=alpha, l_fraction=l_fraction, roster=roster)
    return fit_cobra(train, params, seed=seed)


class TestParams:
    def test_fractional_consensus_rounds_up(self):
        assert CobraParams(0.1, 0.5, 0.4, FIVE_ROSTER).consensus_count == 3  # ceil(2.5)
        assert CobraParams(0.1, 0.6, 0.4, FIVE_ROSTER).consensus_count == 3

    def test_grid_alphas_round_cleanly(self):
        for i, alpha in enumerate([0.2, 0.4, 0.6, 0.8, 1.0], start=1):
            params = CobraParams(0.1, alpha, 0.5, FIVE_ROSTER)
            assert params.consensus_count == i

    def test_epsilon_and_fraction_validation(self):
        with pytest.raises(ValueError):
            CobraParams(0.0, 0.5, 0.4, TINY_ROSTER)
        with pytest.raises(ValueError):
            CobraParams(0.1, 0.5, 1.0, TINY_ROSTER)
        with pytest.raises(ValueError):
            CobraParams(0.1, 0.0, 0.4, TINY_ROSTER)


class TestFit:
    def test_calibration_cache_dimensions(self):
        model = small_model(n=100, l_fraction=0.4, alpha=0.6, roster=FIVE_ROSTER)
        assert model.split.l == 40
        curves = model.calibration_curves
        assert len(curves) == 5
        assert all(len(per_machine) == 40 for per_machine in curves)

    def test_constant_machine_gives_identical_cached_curves(self):
        rng = np.random.default_rng(5)
        train = random_dataset(rng, 50, p=2)
        k_all = LearnerSpec("knn_survival", {"k": 30})  # k = |D_k|: population KM for any x
        params = CobraParams(0.1, 1.0, 0.4, (k_all,))
        model = fit_cobra(train, params, seed=2)
        first = model.calibration_curves[0][0]
        assert all(c == first for c in model.calibration_curves[0])

    def test_seeded_determinism(self):
        a = small_model(seed=7, alpha=0.6, roster=FIVE_ROSTER)
        b = small_model(seed=7, alpha=0.6, roster=FIVE_ROSTER)
        assert a.split.d_k == b.split.d_k
        assert a.split.d_l == b.split.d_l
        rng = np.random.default_rng(0)
        for q in rng.uniform(size=(5, 2)):
            assert predict_cobra(a, q) == predict_cobra(b, q)

    def test_cached_curves_match_direct_predictions(self):
        model = small_model(seed=3, roster=TINY_ROSTER)
        d_l = model.split.d_l
        for m, machine in enumerate(model.machines):
            for j in [0, d_l.n // 2, d_l.n - 1]:
                assert model.calibration_curves[m][j] == machine.predict_curve(d_l.x[j])


class TestGamma:
    def test_query_equal_to_calibration_point(self):
        model = small_model(seed=1, epsilon=1e-12, alpha=1.0)
        d_l = model.split.d_l
        for j in range(min(5, d_l.n)):
            assert gamma_indicator(model, d_l.x[j], j) == 1

    def test_direct_count_example(self):
        # five machines, three of five distances within epsilon, need 3 -> member
        distances = np.array([[0.01], [0.02], [0.5], [0.6], [0.03]])
        assert _member_mask(distances, epsilon=0.1, need=3)[0]
        assert not _member_mask(distances, epsilon=0.1, need=4)[0]

    def test_saturating_epsilon_includes_everyone(self):
        model = small_model(seed=4, epsilon=1.5, alpha=1.0)
        rng = np.random.default_rng(8)
        for q in rng.uniform(size=(5, 2)):
            assert gamma_labels(model, q).all()

    def test_index_out_of_range(self):
        model = small_model(seed=1)
        with pytest.raises(IndexError):
            gamma_indicator(model, np.zeros(2), model.split.l)

    def test_monotone_in_epsilon_and_alpha(self):
        model = small_model(seed=9, epsilon=0.05, alpha=0.5)
        rng = np.random.default_rng(10)
        for q in rng.uniform(size=(8, 2)):
            small = set(np.flatnonzero(gamma_labels(model, q)))
            wider = CobraModel(
                dataclasses.replace(model.params, epsilon=0.2), model.stack
            )
            large = set(np.flatnonzero(gamma_labels(wider, q)))
            assert small <= large
            stricter = CobraModel(
                dataclasses.replace(model.params, alpha=1.0), model.stack
            )
            strict = set(np.flatnonzero(gamma_labels(stricter, q)))
            assert strict <= small


class TestProximityAggregate:
    def test_saturated_counts_equal_population_inputs(self):
        model = small_model(seed=6, epsilon=1.5, alpha=1.0)
        d_l = model.split.d_l
        agg = proximity_aggregate(model, np.array([0.5, 0.5]))
        assert np.array_equal(agg.member_indices, np.arange(d_l.n))
        assert np.array_equal(agg.event_times, np.unique(d_l.time[d_l.event == 1]))
        for t, d, r in zip(agg.event_times, agg.event_counts, agg.risk_counts):
            assert d == ((d_l.time == t) & (d_l.event == 1)).sum()
            assert r == (d_l.time >= t).sum()
            assert r >= d >= 0
        assert np.all(np.diff(agg.risk_counts) <= 0)

    def test_hand_counts_for_three_members(self):
        from survcobra.data import SurvivalDataset

        # craft a split whose calibration half is exactly {(3,1),(5,0),(7,1)}
        times = np.array([3.0, 5.0, 7.0, 1.0, 2.0, 4.0])
        events = np.array([1, 0, 1, 1, 1, 1])
        x = np.array([[0.1], [0.2], [0.3], [0.7], [0.8], [0.9]])
        train = SurvivalDataset(x, times, events, ["x"])
        target = {(3.0, 1), (5.0, 0), (7.0, 1)}
        seed = next(
            s
            for s in range(200)
            if {
                (float(t), int(e))
                for t, e in zip(*_split_arrays(train, s))
            }
            == target
        )
        params = CobraParams(1.5, 1.0, 0.5, TINY_ROSTER)
        model = fit_cobra(train, params, seed=seed)
        agg = proximity_aggregate(model, np.array([0.5]))
        lookup = dict(zip(agg.event_times, zip(agg.event_counts, agg.risk_counts)))
        assert lookup[3.0] == (1, 3)
        assert lookup[7.0] == (1, 1)

    def test_no_event_members_empty_event_times(self):
        model = _model_with_censored_calibration_point()
        d_l = model.split.d_l
        j = int(np.flatnonzero(d_l.event == 0)[0])
        agg = proximity_aggregate(model, d_l.x[j])
        assert np.array_equal(agg.member_indices, [j])
        assert agg.event_times.size == 0


def _split_arrays(train, seed):
    from survcobra.data import cobra_split

    split = cobra_split(train, 0.5, seed)
    return split.d_l.time, split.d_l.event


def _model_with_censored_calibration_point(seed_start=0):
    """A model plus a censored calibration record with unique covariates,
    so a tiny epsilon captures exactly that record."""
    for seed in range(seed_start, seed_start + 50):
        model = small_model(seed=seed, epsilon=1e-12, alpha=1.0, n=40)
        d_l = model.split.d_l
        censored = np.flatnonzero(d_l.event == 0)
        if censored.size == 0:
            continue
        j = int(censored[0])
        if gamma_labels(model, d_l.x[j]).sum() == 1:
            return model
    raise AssertionError("no suitable seed found")


class TestPredict:
    def test_saturated_prediction_is_population_km(self):
        model = small_model(seed=2, epsilon=1.5, alpha=1.0)
        d_l = model.split.d_l
        expected = kaplan_meier(d_l.time, d_l.event)
        rng = np.random.default_rng(3)
        for q in rng.uniform(size=(10, 2)):
            assert predict_cobra(model, q) == expected

    def test_fallback_on_event_free_proximity_set(self):
        model = _model_with_censored_calibration_point()
        d_l = model.split.d_l
        j = int(np.flatnonzero(d_l.event == 0)[0])
        assert predict_cobra(model, d_l.x[j]) == model.population_km

    def test_fallback_on_empty_proximity_set(self):
        # a continuous-response machine maps distinct queries to distinct
        # curves, so a tiny epsilon leaves the proximity set empty
        model = small_model(
            seed=12, epsilon=1e-300, alpha=1.0, roster=(LearnerSpec("cox_ridge", {"penalty": 0.5}),)
        )
        q = np.array([0.123456, 0.654321])  # not a calibration point
        assert not gamma_labels(model, q).any()
        assert predict_cobra(model, q) == model.population_km

    def test_matches_oracle_on_small_instances(self):
        checked = 0
        for seed in range(40):
            rng = np.random.default_rng(seed)
            eps_exponent = rng.uniform(np.log(1e-300), np.log(0.9))
            mix_informative = seed % 2 == 0
            epsilon = float(np.exp(rng.uniform(np.log(5e-3), np.log(0.9)))) if mix_informative else float(np.exp(eps_exponent))
            alpha = float(rng.choice([0.5, 1.0]))
            try:
                model = small_model(
                    seed=seed,
                    n=int(rng.integers(16, 40)),
                    epsilon=epsilon,
                    alpha=alpha,
                    l_fraction=float(rng.uniform(0.3, 0.7)),
                )
            except ValueError:
                continue  # a degenerate random split: no events in one half
            if model.split.l > 20:
                continue
            queries = [rng.uniform(size=2) for _ in range(3)]
            queries.append(model.split.d_l.x[0])
            for q in queries:
                got = predict_cobra(model, np.asarray(q))
                times, values = oracle_cobra_curve(model, np.asarray(q))
                assert np.array_equal(got.times, times)
                assert np.array_equal(got.values, values)
                checked += 1
        assert checked >= 80


class TestBatch:
    def test_singleton_batch(self):
        model = small_model(seed=5)
        q = np.array([0.4, 0.6])
        assert predict_cobra_batch(model, q[None, :])[0] == predict_cobra(model, q)

    def test_duplicate_queries_identical(self):
        model = small_model(seed=5)
        q = np.array([0.4, 0.6])
        out = predict_cobra_batch(model, np.stack([q, q]))
        assert out[0] == out[1]

    def test_permuted_batch_permutes_outputs(self):
        model = small_model(seed=5)
        rng = np.random.default_rng(1)
        queries = rng.uniform(size=(6, 2))
        perm = rng.permutation(6)
        straight = predict_cobra_batch(model, queries)
        shuffled = predict_cobra_batch(model, queries[perm])
        for i, j in enumerate(perm):
            assert shuffled[i] == straight[j]

    def test_batch_equals_sequential(self):
        model = small_model(seed=8, alpha=0.6, roster=FIVE_ROSTER, n=80)
        rng = np.random.default_rng(2)
        queries = rng.uniform(size=(5, 2))
        batch = predict_cobra_batch(model, queries)
        for i, q in enumerate(queries):
            assert batch[i] == predict_cobra(model, q)
