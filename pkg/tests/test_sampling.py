import math

import numpy as np
import pytest

from proxyselect.core import Dataset
from proxyselect.errors import BudgetExhausted
from proxyselect.sampling import (
    BudgetedOracle,
    WeightDistribution,
    defensive_mix,
    oracle_label,
    power_weights,
    reweighted_variance,
    sqrt_weights,
    uniform_sample,
    weighted_sample,
)

from conftest import random_dataset


class TestUniformSample:
    def test_single_record_dataset(self):
        ds = Dataset(ids=[7], proxy=[0.4], labels=[1])
        draws = uniform_sample(ds, 25, np.random.default_rng(0))
        assert (draws == 0).all()

    def test_deterministic_under_seed(self, tiny_dataset):
        a = uniform_sample(tiny_dataset, 100, 42)
        b = uniform_sample(tiny_dataset, 100, 42)
        assert np.array_equal(a, b)

    def test_counts_concentrate(self):
        ds = random_dataset(np.random.default_rng(1), 10)
        draws = uniform_sample(ds, 100_000, np.random.default_rng(5))
        counts = np.bincount(draws, minlength=10)
        assert counts.min() >= 9_000 and counts.max() <= 11_000


class TestWeights:
    def test_sqrt_weights(self):
        ds = Dataset(ids=[0, 1], proxy=[0.25, 1.0], labels=[0, 1])
        assert np.allclose(sqrt_weights(ds), [0.5, 1.0])

    def test_sqrt_weights_small_score(self):
        ds = Dataset(ids=[0], proxy=[0.01], labels=[0])
        assert sqrt_weights(ds)[0] == pytest.approx(0.1)

    def test_power_weights_exponent_zero_is_flat(self):
        ds = Dataset(ids=[0, 1, 2], proxy=[0.0, 0.3, 1.0], labels=[0, 0, 1])
        assert np.array_equal(power_weights(ds, 0.0), np.ones(3))

    def test_all_zero_scores_give_zero_raw_weights(self):
        ds = Dataset(ids=[0, 1], proxy=[0.0, 0.0], labels=[0, 0])
        assert np.array_equal(sqrt_weights(ds), [0.0, 0.0])


class TestDefensiveMix:
    def test_worked_example(self):
        dist = defensive_mix(np.array([0.3, 0.1]), 0.1)
        assert np.allclose(dist.probs, [0.725, 0.275], atol=1e-12)

    def test_uniform_fixed_point(self):
        for ratio in (0.0, 0.1, 0.5):
            dist = defensive_mix(np.ones(4), ratio)
            assert np.allclose(dist.probs, 0.25, atol=1e-15)

    def test_worst_case_reweight_factor(self):
        dist = defensive_mix(np.array([1.0, 0.0]), 0.1)
        assert np.allclose(dist.probs, [0.95, 0.05], atol=1e-12)
        m = dist.reweight_factors()
        assert m[1] == pytest.approx(10.0)  # (1/2) / 0.05 = 1 / mix_ratio

    def test_floor_holds_exactly(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            n = int(rng.integers(1, 50))
            raw = rng.random(n) * rng.integers(0, 2, n)  # some zeros
            ratio = float(rng.uniform(0.01, 0.5))
            dist = defensive_mix(raw, ratio)
            assert (dist.probs >= ratio / n).all()
            assert dist.reweight_cap() <= 1.0 / ratio + 1e-9

    def test_all_zero_raw_falls_back_to_uniform(self):
        dist = defensive_mix(np.zeros(5), 0.1)
        assert np.allclose(dist.probs, 0.2, atol=1e-15)

    def test_rejects_negative_weights(self):
        with pytest.raises(ValueError):
            defensive_mix(np.array([0.5, -0.1]))


class TestWeightedSample:
    def test_uniform_distribution_gives_unit_factors(self, tiny_dataset):
        dist = WeightDistribution(np.full(5, 0.2))
        ws = weighted_sample(tiny_dataset, dist, 50, np.random.default_rng(0))
        assert np.allclose(ws.m, 1.0)

    def test_draw_frequencies_match_distribution(self):
        ds = Dataset(ids=[0, 1], proxy=[0.9, 0.1], labels=[1, 0])
        dist = WeightDistribution(np.array([0.95, 0.05]))
        ws = weighted_sample(ds, dist, 10_000, np.random.default_rng(3))
        freq = float(np.mean(ws.indices == 0))
        assert 0.93 <= freq <= 0.97

    def test_deterministic_under_seed(self, tiny_dataset):
        dist = defensive_mix(sqrt_weights(tiny_dataset))
        a = weighted_sample(tiny_dataset, dist, 64, 9)
        b = weighted_sample(tiny_dataset, dist, 64, 9)
        assert np.array_equal(a.indices, b.indices)
        assert np.array_equal(a.m, b.m)

    def test_horvitz_identity_exhaustive(self):
        # Sum over records of probs * f * m equals the uniform mean of f,
        # exactly, for any distribution: probs * m collapses to 1/n.
        rng = np.random.default_rng(7)
        for _ in range(1000):
            n = int(rng.integers(1, 21))
            ds = random_dataset(rng, n)
            raw = rng.random(n) ** rng.uniform(0.2, 3.0)
            dist = defensive_mix(raw, float(rng.uniform(0.01, 0.5)))
            m = dist.reweight_factors()
            tau = float(rng.random())
            for f in (
                ds.labels.astype(float),
                (ds.proxy >= tau) * ds.labels.astype(float),
            ):
                lhs = float(np.sum(dist.probs * f * m))
                assert lhs == pytest.approx(float(f.mean()), abs=1e-12)


class TestBudgetedOracle:
    def test_cache_charges_once(self, tiny_dataset):
        oracle = BudgetedOracle(tiny_dataset, budget=3)
        assert oracle.label(10) == 1
        assert oracle.label(10) == 1
        assert oracle.used == 1

    def test_exhaustion(self, tiny_dataset):
        oracle = BudgetedOracle(tiny_dataset, budget=1)
        oracle.label(10)
        with pytest.raises(BudgetExhausted):
            oracle.label(11)

    def test_full_budget_consumable(self, tiny_dataset):
        oracle = BudgetedOracle(tiny_dataset, budget=5)
        labels = oracle.labels_at(np.arange(5))
        assert oracle.used == 5
        assert np.array_equal(labels, tiny_dataset.labels)

    def test_batch_with_duplicates_counts_unique(self, tiny_dataset):
        oracle = BudgetedOracle(tiny_dataset, budget=2)
        oracle.labels_at(np.array([0, 0, 1, 1, 0]))
        assert oracle.used == 2

    def test_functional_spelling(self, tiny_dataset):
        oracle = BudgetedOracle(tiny_dataset, budget=1)
        assert oracle_label(oracle, 12) == 0


class TestVarianceFunctional:
    def _v1(self, a, w_raw):
        n = len(a)
        u = np.full(n, 1.0 / n)
        w = np.asarray(w_raw, dtype=float)
        total = w.sum()
        return reweighted_variance(a, u, w / total if total > 0 else w)

    def test_worked_vector(self):
        a = np.array([1.0, 0.25, 0.25, 0.25])
        assert self._v1(a, np.sqrt(a)) == pytest.approx(0.390625, abs=1e-12)
        assert self._v1(a, a) == pytest.approx(0.4375, abs=1e-12)
        assert self._v1(a, np.ones(4)) == pytest.approx(0.4375, abs=1e-12)

    def test_ordering_and_gap_on_random_vectors(self):
        rng = np.random.default_rng(13)
        for _ in range(300):
            n = int(rng.integers(2, 51))
            a = rng.random(n)
            v_sqrt = self._v1(a, np.sqrt(a))
            v_prop = self._v1(a, a)
            v_unif = self._v1(a, np.ones(n))
            assert v_sqrt <= v_prop + 1e-12
            assert v_prop <= v_unif + 1e-12
            assert v_unif - v_sqrt == pytest.approx(float(np.var(np.sqrt(a))), abs=1e-12)

    def test_zero_probability_on_active_record_is_infinite(self):
        assert reweighted_variance([0.5, 0.5], [0.5, 0.5], [1.0, 0.0]) == math.inf

    def test_inactive_records_are_ignored(self):
        # a = 0 contributes nothing regardless of its draw probability
        v = reweighted_variance([0.0, 1.0], [0.5, 0.5], [0.0, 1.0])
        assert v == pytest.approx(0.25)


class TestOptimalWeights:
    @pytest.mark.filterwarnings("ignore:Values in x were outside bounds:RuntimeWarning")
    def test_numeric_minimum_matches_sqrt_rule(self):
        from scipy.optimize import minimize

        rng = np.random.default_rng(17)
        for _ in range(20):
            n = int(rng.integers(3, 9))
            a = rng.uniform(0.05, 1.0, n)
            u = rng.uniform(0.2, 1.0, n)
            u /= u.sum()
            expected = np.sqrt(a) * u
            expected /= expected.sum()
            res = minimize(
                lambda w: reweighted_variance(a, u, w),
                np.full(n, 1.0 / n),
                jac=lambda w: -(a * u * u) / w**2,
                method="SLSQP",
                bounds=[(1e-9, 1.0)] * n,
                constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1.0}],
                options={"ftol": 1e-14, "maxiter": 500},
            )
            assert res.success
            got = res.x / res.x.sum()
            assert np.max(np.abs(got - expected)) < 1e-4
