"""Synthetic dataset generation for calibrated-proxy experiments.

Proxy scores are Beta-distributed and labels are independent Bernoulli draws
with the clean score as success probability, so the clean proxy is a
calibrated probability by construction. Optional Gaussian noise corrupts the
observed proxy after labels are drawn (labels stay tied to the clean score),
which degrades calibration without touching validity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset


@dataclass(frozen=True)
class BetaSpec:
    """Parameters of one synthetic dataset."""

    alpha: float
    beta: float
    size: int
    noise_sd: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.alpha <= 0.0 or self.beta <= 0.0:
            raise ValueError("Beta shape parameters must be positive")
        if self.size < 1:
            raise ValueError("size must be at least 1")
        if not 0.0 <= self.noise_sd <= 0.1:
            raise ValueError("noise_sd must be in [0, 0.1]")

    @property
    def positive_rate(self) -> float:
        """Analytic expected positive rate alpha / (alpha + beta)."""
        return self.alpha / (self.alpha + self.beta)


def gen_beta(spec: BetaSpec) -> Dataset:
    """Generate a dataset from ``spec``; byte-identical for identical specs."""
    rng = np.random.default_rng(spec.seed)
    clean = rng.beta(spec.alpha, spec.beta, size=spec.size)
    labels = (rng.random(spec.size) < clean).astype(np.int8)
    if spec.noise_sd > 0.0:
        proxy = np.clip(clean + rng.normal(0.0, spec.noise_sd, size=spec.size), 0.0, 1.0)
    else:
        proxy = clean
    return Dataset(np.arange(spec.size, dtype=np.int64), proxy, labels)


def drift_pair(train_spec: BetaSpec, test_spec: BetaSpec) -> tuple[Dataset, Dataset]:
    """Independently generated train/test datasets for drift experiments."""
    return gen_beta(train_spec), gen_beta(test_spec)
