"""Record sampling, importance weights with defensive mixing, budgeted oracle.

Weighted draws use an inverse-CDF walk over a prefix-sum array so the draw
sequence is a pure function of the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset
from .errors import BudgetExhausted


@dataclass(frozen=True)
class WeightDistribution:
    """Normalized draw probabilities over a dataset's records."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.ascontiguousarray(self.probs, dtype=np.float64)
        if probs.size == 0:
            raise ValueError("distribution over zero records")
        if probs.min() < 0.0:
            raise ValueError("probabilities must be nonnegative")
        if abs(float(probs.sum()) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return int(self.probs.size)

    def reweight_factors(self) -> np.ndarray:
        """Per-record factor m = u / w restoring unbiasedness under reweighting."""
        n = len(self)
        return (1.0 / n) / self.probs

    def reweight_cap(self) -> float:
        """Largest reweight factor any draw can carry."""
        n = len(self)
        return float((1.0 / n) / self.probs.min())


@dataclass(frozen=True)
class WeightedSample:
    """Draw positions (with duplicates, in draw order) and their reweight factors."""

    indices: np.ndarray
    m: np.ndarray

    def __len__(self) -> int:
        return int(self.indices.size)


class BudgetedOracle:
    """Gatekeeper for ground-truth labels under a hard call budget.

    The first lookup of a record id consumes one call; repeats are served from
    cache for free. Single-owner mutable state: never share across trials.
    """

    def __init__(self, dataset: Dataset, budget: int) -> None:
        if budget < 1:
            raise ValueError("budget must be positive")
        self._dataset = dataset
        self._revealed = np.zeros(len(dataset), dtype=bool)
        self.budget = int(budget)
        self.used = 0

    @property
    def remaining(self) -> int:
        return self.budget - self.used

    def labels_at(self, positions) -> np.ndarray:
        """Labels for dataset positions, charging one call per novel record."""
        positions = np.asarray(positions, dtype=np.int64)
        novel = np.unique(positions[~self._revealed[positions]])
        if self.used + novel.size > self.budget:
            raise BudgetExhausted(
                f"{novel.size} new oracle calls requested with {self.remaining} left"
            )
        self._revealed[novel] = True
        self.used += int(novel.size)
        return self._dataset.labels[positions]

    def label(self, record_id: int) -> int:
        """Ground-truth label of one record by id."""
        pos = self._dataset.position_of(record_id)
        return int(self.labels_at(np.asarray([pos]))[0])

    def revealed_positions(self) -> np.ndarray:
        return np.flatnonzero(self._revealed)


def oracle_label(oracle: BudgetedOracle, record_id: int) -> int:
    """Functional spelling of :meth:`BudgetedOracle.label`."""
    return oracle.label(record_id)


def uniform_sample(dataset: Dataset, n: int, rng) -> np.ndarray:
    """``n`` i.i.d. equiprobable draws with replacement; returns positions."""
    if n < 1:
        raise ValueError("sample size must be positive")
    rng = np.random.default_rng(rng)
    return rng.integers(0, len(dataset), size=n, dtype=np.int64)


def sqrt_weights(dataset: Dataset) -> np.ndarray:
    """Raw importance weights proportional to the square root of the proxy."""
    return np.sqrt(dataset.proxy)


def power_weights(dataset: Dataset, exponent: float) -> np.ndarray:
    """Raw importance weights proportional to proxy ** exponent."""
    if not 0.0 <= exponent <= 1.0:
        raise ValueError(f"weight exponent must be in [0, 1], got {exponent}")
    return dataset.proxy**exponent


def defensive_mix(raw, mix_ratio: float = 0.1) -> WeightDistribution:
    """Blend normalized raw weights with the uniform distribution.

    Guarantees every draw probability is at least ``mix_ratio / n`` so
    reweight factors stay bounded by ``1 / mix_ratio`` even when the raw
    weights are adversarial. All-zero raw weights fall back to uniform.
    """
    if not 0.0 <= mix_ratio <= 0.5:
        raise ValueError(f"mix_ratio must be in [0, 0.5], got {mix_ratio}")
    raw = np.asarray(raw, dtype=np.float64)
    if raw.size == 0:
        raise ValueError("no weights given")
    if raw.min() < 0.0:
        raise ValueError("raw weights must be nonnegative")
    n = raw.size
    total = float(raw.sum())
    base = np.full(n, 1.0 / n) if total == 0.0 else raw / total
    probs = (1.0 - mix_ratio) * base + mix_ratio / n
    return WeightDistribution(probs)


def weighted_draws(probs: np.ndarray, n: int, rng) -> np.ndarray:
    """Draw ``n`` indices with replacement via inverse CDF over a prefix sum."""
    if n < 1:
        raise ValueError("sample size must be positive")
    rng = np.random.default_rng(rng)
    cdf = np.cumsum(probs)
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    # The prefix sum can fall short of 1 by rounding; clamp the overflow
    # sliver onto the last record with positive probability.
    last = probs.size - 1
    if probs[last] <= 0.0:
        last = int(np.flatnonzero(probs > 0.0)[-1])
    return np.minimum(idx, last).astype(np.int64)


def weighted_sample(dataset: Dataset, dist: WeightDistribution, n: int, rng) -> WeightedSample:
    """``n`` draws with replacement from ``dist``; each carries m = u / w."""
    if len(dist) != len(dataset):
        raise ValueError("distribution does not match the dataset")
    idx = weighted_draws(dist.probs, n, rng)
    m = (1.0 / len(dataset)) / dist.probs[idx]
    return WeightedSample(indices=idx, m=m)


def reweighted_variance(a, u, w) -> float:
    """Leading variance term of the reweighted estimator for draw weights ``w``.

    Equals sum over records of a * u^2 / w, restricted to records with a > 0.
    Infinite when some record with positive a has zero draw probability.
    """
    a = np.asarray(a, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    active = a > 0.0
    if np.any(active & (w <= 0.0)):
        return math.inf
    a, u, w = a[active], u[active], w[active]
    return float(np.sum(a * u * u / w))
