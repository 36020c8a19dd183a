"""One-sided confidence bounds on means of bounded samples.

The default bound is the normal approximation

    UB(mu, sigma, s, delta) = mu + sigma / sqrt(s) * sqrt(2 * log(1 / delta))
    LB(mu, sigma, s, delta) = mu - sigma / sqrt(s) * sqrt(2 * log(1 / delta))

with plug-in sample estimates for sigma. Hoeffding, Clopper-Pearson, and a
percentile bootstrap are available for comparison; all bounds on nonnegative
quantities are clamped below at zero.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import beta as _beta_dist

from .errors import InvalidCounts


class BoundMethod(enum.Enum):
    NORMAL = "normal"
    HOEFFDING = "hoeffding"
    CLOPPER_PEARSON = "clopper-pearson"
    BOOTSTRAP = "bootstrap"


@dataclass(frozen=True)
class SampleStats:
    """Plug-in mean and standard deviation of a sample."""

    mean: float
    stddev: float
    count: int

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("count must be positive")
        if self.stddev < 0.0:
            raise ValueError("stddev must be nonnegative")

    @classmethod
    def from_values(cls, values) -> "SampleStats":
        values = np.asarray(values, dtype=np.float64)
        n = values.size
        # A single observation gives no spread information; use the worst
        # case for [0, 1]-bounded data so the interval is never zero-width.
        sd = 0.5 if n == 1 else float(values.std(ddof=1))
        return cls(mean=float(values.mean()), stddev=sd, count=n)


def _radius(stddev: float, count: int, delta: float) -> float:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    if count < 1:
        raise ValueError("count must be positive")
    return stddev / math.sqrt(count) * math.sqrt(2.0 * math.log(1.0 / delta))


def ub(mean: float, stddev: float, count: int, delta: float) -> float:
    """Normal-approximation upper confidence bound at level 1 - delta."""
    return mean + _radius(stddev, count, delta)


def lb(mean: float, stddev: float, count: int, delta: float) -> float:
    """Normal-approximation lower confidence bound, clamped below at zero."""
    return max(0.0, mean - _radius(stddev, count, delta))


def _check_binary(values: np.ndarray) -> int:
    if not np.isin(values, (0.0, 1.0)).all():
        raise InvalidCounts("Clopper-Pearson applies to unweighted binary samples only")
    return int(round(float(values.sum())))


def _clopper_pearson_lb(successes: int, trials: int, delta: float) -> float:
    if successes == 0:
        return 0.0
    return float(_beta_dist.ppf(delta, successes, trials - successes + 1))


def _clopper_pearson_ub(successes: int, trials: int, delta: float) -> float:
    if successes == trials:
        return 1.0
    return float(_beta_dist.ppf(1.0 - delta, successes + 1, trials - successes))


def _bootstrap_means(
    values: np.ndarray, resamples: int, rng: np.random.Generator
) -> np.ndarray:
    n = values.size
    out = np.empty(resamples, dtype=np.float64)
    # Chunked so resample index matrices stay small.
    chunk = max(1, min(resamples, (1 << 22) // max(n, 1)))
    done = 0
    while done < resamples:
        k = min(chunk, resamples - done)
        idx = rng.integers(0, n, size=(k, n))
        out[done : done + k] = values[idx].mean(axis=1)
        done += k
    return out


def lower_bound(
    values,
    delta: float,
    method: BoundMethod = BoundMethod.NORMAL,
    *,
    value_bound: float = 1.0,
    rng: np.random.Generator | None = None,
    resamples: int = 1000,
) -> float:
    """One-sided lower confidence bound on the mean of ``values``.

    ``value_bound`` is the a-priori range [0, value_bound] of each value and
    only matters for Hoeffding's inequality.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n == 0:
        raise ValueError("cannot bound an empty sample")
    mean = float(values.mean())
    if method is BoundMethod.NORMAL:
        stats = SampleStats.from_values(values)
        return lb(stats.mean, stats.stddev, stats.count, delta)
    if method is BoundMethod.HOEFFDING:
        return max(0.0, mean - value_bound * math.sqrt(math.log(1.0 / delta) / (2.0 * n)))
    if method is BoundMethod.CLOPPER_PEARSON:
        return _clopper_pearson_lb(_check_binary(values), n, delta)
    if method is BoundMethod.BOOTSTRAP:
        if rng is None:
            rng = np.random.default_rng(0)
        means = _bootstrap_means(values, resamples, rng)
        return max(0.0, float(np.quantile(means, delta)))
    raise ValueError(f"unknown bound method {method}")


def upper_bound(
    values,
    delta: float,
    method: BoundMethod = BoundMethod.NORMAL,
    *,
    value_bound: float = 1.0,
    rng: np.random.Generator | None = None,
    resamples: int = 1000,
) -> float:
    """One-sided upper confidence bound on the mean of ``values``."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n == 0:
        raise ValueError("cannot bound an empty sample")
    mean = float(values.mean())
    if method is BoundMethod.NORMAL:
        stats = SampleStats.from_values(values)
        return ub(stats.mean, stats.stddev, stats.count, delta)
    if method is BoundMethod.HOEFFDING:
        return mean + value_bound * math.sqrt(math.log(1.0 / delta) / (2.0 * n))
    if method is BoundMethod.CLOPPER_PEARSON:
        return _clopper_pearson_ub(_check_binary(values), n, delta)
    if method is BoundMethod.BOOTSTRAP:
        if rng is None:
            rng = np.random.default_rng(0)
        means = _bootstrap_means(values, resamples, rng)
        return float(np.quantile(means, 1.0 - delta))
    raise ValueError(f"unknown bound method {method}")


def binary_lb(
    successes: int,
    trials: int,
    delta: float,
    method: BoundMethod = BoundMethod.NORMAL,
    *,
    resamples: int = 1000,
    seed: int = 0,
) -> float:
    """Lower confidence bound on a Bernoulli mean from success counts.

    The result is clamped to [0, 1]. The bootstrap variant resamples the
    implied 0/1 sample and is deterministic under ``seed``.
    """
    if trials < 1 or not 0 <= successes <= trials:
        raise InvalidCounts(f"invalid counts: {successes} successes of {trials} trials")
    if method is BoundMethod.CLOPPER_PEARSON:
        if not 0.0 < delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {delta}")
        return _clopper_pearson_lb(successes, trials, delta)
    values = np.zeros(trials, dtype=np.float64)
    values[:successes] = 1.0
    rng = np.random.default_rng(seed) if method is BoundMethod.BOOTSTRAP else None
    out = lower_bound(values, delta, method, rng=rng, resamples=resamples)
    return min(1.0, out)
