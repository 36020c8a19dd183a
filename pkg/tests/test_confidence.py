import math

import numpy as np
import pytest

from proxyselect.confidence import (
    BoundMethod,
    SampleStats,
    binary_lb,
    lb,
    lower_bound,
    ub,
    upper_bound,
)
from proxyselect.errors import InvalidCounts

E_MINUS_2 = math.exp(-2)


class TestClosedForms:
    def test_ub_round_numbers(self):
        # delta = e^-2 makes sqrt(2 log 1/delta) exactly 2
        assert ub(0.5, 0.2, 400, E_MINUS_2) == pytest.approx(0.52, abs=1e-12)

    def test_lb_round_numbers(self):
        assert lb(0.5, 0.2, 400, E_MINUS_2) == pytest.approx(0.48, abs=1e-12)

    def test_zero_variance_collapses(self):
        assert ub(0.37, 0.0, 123, 0.05) == 0.37
        assert lb(0.37, 0.0, 123, 0.05) == 0.37

    def test_ub_direct_evaluation(self):
        expected = 0.1 + 0.03 * math.sqrt(2 * math.log(20))
        assert ub(0.1, 0.3, 100, 0.05) == pytest.approx(expected, abs=1e-15)
        assert ub(0.1, 0.3, 100, 0.05) == pytest.approx(0.17343, abs=5e-6)

    def test_lb_clamped_at_zero(self):
        assert lb(0.01, 0.3, 100, 0.05) == 0.0

    def test_monotonicities(self):
        base = ub(0.3, 0.2, 100, 0.05)
        assert ub(0.3, 0.25, 100, 0.05) > base
        assert ub(0.3, 0.2, 200, 0.05) < base
        assert ub(0.3, 0.2, 100, 0.1) < base

    def test_width_scales_as_inverse_sqrt_count(self):
        w1 = ub(0.5, 0.2, 100, 0.05) - 0.5
        w4 = ub(0.5, 0.2, 400, 0.05) - 0.5
        assert w1 / w4 == pytest.approx(2.0, rel=1e-12)


class TestSampleStats:
    def test_unbiased_denominator(self):
        values = np.array([0.0, 1.0, 1.0, 0.0])
        assert SampleStats.from_values(values).stddev == pytest.approx(
            np.std(values, ddof=1)
        )

    def test_single_observation_worst_case(self):
        assert SampleStats.from_values([0.7]).stddev == 0.5

    def test_binary_stddev_cap(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(2, 100))
            values = rng.integers(0, 2, n).astype(float)
            cap = 0.5 * math.sqrt(n / (n - 1))
            assert SampleStats.from_values(values).stddev <= cap + 1e-12


class TestBinaryLowerBounds:
    def test_hoeffding_round_numbers(self):
        assert binary_lb(50, 100, E_MINUS_2, BoundMethod.HOEFFDING) == pytest.approx(
            0.4, abs=1e-12
        )

    def test_clopper_pearson_all_successes(self):
        # closed form delta ** (1/n) when every trial succeeded
        assert binary_lb(20, 20, 0.05, BoundMethod.CLOPPER_PEARSON) == pytest.approx(
            0.05 ** (1 / 20), abs=1e-9
        )
        assert binary_lb(20, 20, 0.05, BoundMethod.CLOPPER_PEARSON) == pytest.approx(
            0.8609, abs=5e-5
        )

    def test_clopper_pearson_no_successes(self):
        assert binary_lb(0, 50, 0.05, BoundMethod.CLOPPER_PEARSON) == 0.0

    def test_normal_never_exceeds_mean(self):
        for k, n in ((20, 20), (13, 40), (0, 10)):
            assert binary_lb(k, n, 0.05, BoundMethod.NORMAL) <= k / n

    def test_invalid_counts(self):
        with pytest.raises(InvalidCounts):
            binary_lb(5, 4, 0.05)
        with pytest.raises(InvalidCounts):
            binary_lb(-1, 4, 0.05)

    def test_bootstrap_deterministic_under_seed(self):
        a = binary_lb(30, 200, 0.05, BoundMethod.BOOTSTRAP, seed=7)
        b = binary_lb(30, 200, 0.05, BoundMethod.BOOTSTRAP, seed=7)
        assert a == b


class TestVectorBounds:
    def test_lb_below_mean_below_ub_every_method(self):
        rng = np.random.default_rng(11)
        values = (rng.random(300) < 0.4).astype(float)
        mean = values.mean()
        for method in BoundMethod:
            lo = lower_bound(values, 0.05, method, rng=np.random.default_rng(1))
            hi = upper_bound(values, 0.05, method, rng=np.random.default_rng(1))
            assert lo <= mean <= hi, method

    def test_clopper_pearson_rejects_nonbinary(self):
        with pytest.raises(InvalidCounts):
            lower_bound([0.2, 0.8, 1.0], 0.05, BoundMethod.CLOPPER_PEARSON)

    def test_hoeffding_uses_value_bound(self):
        values = np.array([0.0, 4.0, 2.0, 0.0, 4.0] * 20)
        narrow = lower_bound(values, 0.05, BoundMethod.HOEFFDING, value_bound=4.0)
        wrong = lower_bound(values, 0.05, BoundMethod.HOEFFDING, value_bound=1.0)
        assert narrow < wrong  # larger range widens the bound

    def test_bootstrap_quantiles_order(self):
        rng = np.random.default_rng(3)
        values = rng.random(500)
        lo = lower_bound(values, 0.05, BoundMethod.BOOTSTRAP, rng=np.random.default_rng(5))
        hi = upper_bound(values, 0.05, BoundMethod.BOOTSTRAP, rng=np.random.default_rng(5))
        assert lo < values.mean() < hi


class TestCalibration:
    """Smaller-scale companions to the acceptance-level calibration runs."""

    N = 500
    DELTA = 0.05
    SIMS = 2000

    def _violations(self, p: float, method: BoundMethod) -> float:
        rng = np.random.default_rng(123)
        counts = rng.binomial(self.N, p, self.SIMS)
        uniq = np.unique(counts)
        bound = {k: binary_lb(int(k), self.N, self.DELTA, method) for k in uniq}
        return float(np.mean([bound[k] > p for k in counts]))

    @pytest.mark.parametrize(
        "method", [BoundMethod.NORMAL, BoundMethod.CLOPPER_PEARSON, BoundMethod.HOEFFDING]
    )
    @pytest.mark.parametrize("p", [0.05, 0.3])
    def test_one_sided_coverage(self, method, p):
        assert self._violations(p, method) <= self.DELTA + 0.02

    def test_bootstrap_coverage_small(self):
        rng = np.random.default_rng(9)
        violations = 0
        sims = 400
        for i in range(sims):
            values = (rng.random(self.N) < 0.3).astype(float)
            lo = lower_bound(
                values,
                self.DELTA,
                BoundMethod.BOOTSTRAP,
                rng=np.random.default_rng(i),
                resamples=400,
            )
            violations += lo > 0.3
        assert violations / sims <= self.DELTA + 0.03

    def test_normal_tighter_than_hoeffding_on_rare_positives(self):
        rng = np.random.default_rng(42)
        counts = rng.binomial(self.N, 0.08, 500)
        normal = np.array([binary_lb(int(k), self.N, self.DELTA, BoundMethod.NORMAL) for k in counts])
        hoeff = np.array(
            [binary_lb(int(k), self.N, self.DELTA, BoundMethod.HOEFFDING) for k in counts]
        )
        assert normal.mean() > hoeff.mean()
