"""Threshold-selection routines for recall- and precision-target queries.

Six estimators share a common shape: label a sample under the oracle budget,
then pick the proxy threshold that meets the target on the sample. The no-CI
baselines take the sample at face value; the CI variants inflate or test the
target with one-sided confidence bounds so the dataset-level guarantee holds
with probability 1 - delta; the importance-sampling variants draw the sample
proportionally to a power of the proxy (defensively mixed with uniform) to
concentrate oracle calls where positives live.

Recall-target routines fail safe: when no sampled positive exists, or no
threshold reaches the inflated target, they return tau = 0 so the whole
dataset is selected and recall is 1 by construction. Precision-target
routines fail safe in the opposite direction, returning the +inf sentinel
(select nothing beyond the labeled positives).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .confidence import BoundMethod, lb, lower_bound, upper_bound
from .core import Dataset, Estimator, QueryKind, QuerySpec, ResultSet
from .errors import NoPositiveSamples
from .sampling import (
    BudgetedOracle,
    defensive_mix,
    uniform_sample,
    weighted_draws,
    weighted_sample,
)


@dataclass(frozen=True)
class EstimatorConfig:
    """Tuning knobs shared by the CI estimators.

    ``step`` spaces the candidate grid for precision targets (one hypothesis
    test per grid point, Bonferroni-corrected). ``stage2_unweighted`` switches
    the two-stage precision routine to plain label means in stage two instead
    of reweighted ones.
    """

    step: int = 100
    mix_ratio: float = 0.1
    weight_exponent: float = 0.5
    bound_method: BoundMethod = BoundMethod.NORMAL
    stage2_unweighted: bool = False
    bootstrap_resamples: int = 1000

    def __post_init__(self) -> None:
        if self.step < 1:
            raise ValueError("step must be at least 1")
        if not 0.0 <= self.weight_exponent <= 1.0:
            raise ValueError("weight exponent must be in [0, 1]")
        if not 0.0 <= self.mix_ratio <= 0.5:
            raise ValueError("mix_ratio must be in [0, 0.5]")


@dataclass(frozen=True)
class ThresholdResult:
    """Chosen threshold plus the sample that produced it.

    ``sample_indices`` lists dataset positions in draw order (duplicates
    kept); ``m`` aligns reweight factors with those draws, or is None for
    uniform samples. ``tau`` may be ``math.inf`` (select nothing) and 0 means
    select everything.
    """

    tau: float
    sample_indices: np.ndarray
    m: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)


def max_recall_threshold(proxy, labels, gamma: float, weights=None) -> float:
    """Largest threshold whose (weighted) sample recall still meets ``gamma``.

    Raises :class:`NoPositiveSamples` when the sample carries no positive
    weight at any threshold.
    """
    proxy = np.asarray(proxy, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    scores = proxy[pos]
    if weights is None:
        w = np.ones(scores.size, dtype=np.float64)
    else:
        w = np.asarray(weights, dtype=np.float64)[pos]
    if scores.size == 0 or float(w.sum()) <= 0.0:
        raise NoPositiveSamples("no sampled positives")
    order = np.argsort(-scores, kind="stable")
    scores = scores[order]
    csum = np.cumsum(w[order])
    total = csum[-1]
    # Recall at a tied score counts every tie, so evaluate at the last
    # occurrence of each distinct value.
    last = np.r_[scores[1:] < scores[:-1], True]
    vals = scores[last]
    ok = csum[last] >= min(gamma, 1.0) * total
    return float(vals[int(np.argmax(ok))])


def min_precision_threshold(proxy, labels, gamma: float) -> float:
    """Smallest sampled score whose empirical precision meets ``gamma``.

    Returns ``math.inf`` when no sampled score qualifies.
    """
    proxy = np.asarray(proxy, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    order = np.argsort(proxy, kind="stable")
    p = proxy[order]
    y = labels[order]
    n = p.size
    suffix_pos = np.cumsum(y[::-1])[::-1]
    prec = suffix_pos / (n - np.arange(n))
    first = np.r_[True, p[1:] > p[:-1]]
    ok = first & (prec >= gamma)
    if not ok.any():
        return math.inf
    return float(p[int(np.argmax(ok))])


def inflated_recall_target(
    z_above,
    z_below,
    delta: float,
    gamma: float,
    *,
    method: BoundMethod = BoundMethod.NORMAL,
    value_bound: float = 1.0,
    rng=None,
    resamples: int = 1000,
) -> float:
    """Conservative sample-level recall target from one-sided bounds.

    Takes the per-draw positive-mass vectors above and below the pilot
    threshold, bounds each mean at level delta/2, and returns
    UB_above / (UB_above + LB_below) clamped to [gamma, 1].
    """
    ub1 = upper_bound(
        z_above, delta / 2.0, method, value_bound=value_bound, rng=rng, resamples=resamples
    )
    lb2 = lower_bound(
        z_below, delta / 2.0, method, value_bound=value_bound, rng=rng, resamples=resamples
    )
    if ub1 + lb2 <= 0.0:
        return 1.0
    return min(1.0, max(gamma, ub1 / (ub1 + lb2)))


def _ratio_lower_bound(y: np.ndarray, m: np.ndarray, delta: float) -> float:
    """Normal-approximation lower bound for the self-normalized precision ratio.

    Uses the delta-method plug-in: sd of m * (y - p_hat) scaled by the mean
    weight. Reduces exactly to the unweighted bound when all m equal 1.
    """
    n = y.size
    sw = float(m.sum())
    p_hat = float(np.dot(m, y)) / sw
    if n == 1:
        sigma = 0.5
    else:
        resid = m * (y - p_hat)
        sigma = math.sqrt(float(np.dot(resid, resid)) / (n - 1)) / (sw / n)
    return lb(p_hat, sigma, n, delta)


def _scan_precision_candidates(
    proxy: np.ndarray,
    labels: np.ndarray,
    weights: Optional[np.ndarray],
    gamma: float,
    delta_each: float,
    step: int,
    *,
    descending_grid: bool,
    method: BoundMethod,
    value_bound: float,
    rng,
    resamples: int,
) -> tuple[float, int, int]:
    """Test every ``step``-th sampled score as a precision threshold.

    Returns (smallest passing candidate or +inf, candidates passed, tests run).
    Grid positions are 1-based ranks into the sorted sample: ascending ranks
    for the uniform routine, descending for the weighted two-stage one.
    """
    order = np.argsort(proxy, kind="stable")
    p = proxy[order]
    y = np.asarray(labels, dtype=np.float64)[order]
    w = None if weights is None else np.asarray(weights, dtype=np.float64)[order]
    n = p.size
    best = math.inf
    passing = 0
    tests = 0
    for i in range(step, n + 1, step):
        pos = n - i if descending_grid else i - 1
        tau_c = float(p[pos])
        j = int(np.searchsorted(p, tau_c, side="left"))
        tests += 1
        if w is None:
            p_l = lower_bound(
                y[j:], delta_each, method, value_bound=1.0, rng=rng, resamples=resamples
            )
        else:
            if method is not BoundMethod.NORMAL:
                raise ValueError(
                    "reweighted precision bounds support the normal approximation only"
                )
            p_l = _ratio_lower_bound(y[j:], w[j:], delta_each)
        if p_l > gamma:
            passing += 1
            best = min(best, tau_c)
    return best, passing, tests


def _rng_for(spec: QuerySpec) -> np.random.Generator:
    return np.random.default_rng(spec.seed)


def _uniform_labeled(dataset: Dataset, oracle: BudgetedOracle, spec: QuerySpec, rng):
    idx = uniform_sample(dataset, spec.budget, rng)
    return dataset.proxy[idx], oracle.labels_at(idx), idx


def _mixed_distribution(dataset: Dataset, config: EstimatorConfig):
    raw = dataset.proxy**config.weight_exponent
    return defensive_mix(raw, config.mix_ratio)


def tau_u_noci_rt(
    dataset: Dataset, oracle: BudgetedOracle, spec: QuerySpec, config: EstimatorConfig | None = None
) -> ThresholdResult:
    """Empirical recall cutoff on a uniform sample; no failure-probability control."""
    rng = _rng_for(spec)
    proxy, labels, idx = _uniform_labeled(dataset, oracle, spec, rng)
    diagnostics: dict = {"draws": int(spec.budget)}
    try:
        tau = max_recall_threshold(proxy, labels, spec.gamma)
    except NoPositiveSamples:
        tau = 0.0
        diagnostics["fallback"] = "no_positive_samples"
    return ThresholdResult(tau=tau, sample_indices=idx, diagnostics=diagnostics)


def tau_u_noci_pt(
    dataset: Dataset, oracle: BudgetedOracle, spec: QuerySpec, config: EstimatorConfig | None = None
) -> ThresholdResult:
    """Empirical precision cutoff on a uniform sample; no failure-probability control."""
    rng = _rng_for(spec)
    proxy, labels, idx = _uniform_labeled(dataset, oracle, spec, rng)
    tau = min_precision_threshold(proxy, labels, spec.gamma)
    return ThresholdResult(tau=tau, sample_indices=idx, diagnostics={"draws": int(spec.budget)})


def tau_u_ci_rt(
    dataset: Dataset, oracle: BudgetedOracle, spec: QuerySpec, config: EstimatorConfig | None = None
) -> ThresholdResult:
    """Recall threshold from a uniform sample with confidence-bound inflation.

    Picks the pilot cutoff by empirical recall, then replaces the target with
    the conservative gamma' built from one-sided bounds on the positive mass
    above and below the pilot, each at level delta / 2.
    """
    cfg = config or EstimatorConfig()
    rng = _rng_for(spec)
    proxy, labels, idx = _uniform_labeled(dataset, oracle, spec, rng)
    diagnostics: dict = {"draws": int(spec.budget)}
    try:
        tau0 = max_recall_threshold(proxy, labels, spec.gamma)
    except NoPositiveSamples:
        diagnostics["fallback"] = "no_positive_samples"
        return ThresholdResult(tau=0.0, sample_indices=idx, diagnostics=diagnostics)
    pos = (labels == 1).astype(np.float64)
    z1 = np.where(proxy >= tau0, pos, 0.0)
    z2 = np.where(proxy < tau0, pos, 0.0)
    gamma_prime = inflated_recall_target(
        z1,
        z2,
        spec.delta,
        spec.gamma,
        method=cfg.bound_method,
        value_bound=1.0,
        rng=rng,
        resamples=cfg.bootstrap_resamples,
    )
    tau = max_recall_threshold(proxy, labels, gamma_prime)
    diagnostics["gamma_prime"] = gamma_prime
    diagnostics["tau0"] = tau0
    return ThresholdResult(tau=tau, sample_indices=idx, diagnostics=diagnostics)


def tau_u_ci_pt(
    dataset: Dataset, oracle: BudgetedOracle, spec: QuerySpec, config: EstimatorConfig | None = None
) -> ThresholdResult:
    """Precision threshold from a uniform sample with Bonferroni-corrected tests.

    Every ``step``-th sorted sampled score is a candidate; each candidate's
    precision gets a lower bound at level delta / M so the union bound covers
    all M tests. Returns the smallest certified candidate, else the +inf
    sentinel.
    """
    cfg = config or EstimatorConfig()
    rng = _rng_for(spec)
    proxy, labels, idx = _uniform_labeled(dataset, oracle, spec, rng)
    n_tests = math.ceil(spec.budget / cfg.step)
    delta_each = spec.delta / n_tests
    tau, passing, tests = _scan_precision_candidates(
        proxy,
        labels,
        None,
        spec.gamma,
        delta_each,
        cfg.step,
        descending_grid=False,
        method=cfg.bound_method,
        value_bound=1.0,
        rng=rng,
        resamples=cfg.bootstrap_resamples,
    )
    diagnostics = {
        "draws": int(spec.budget),
        "candidate_count": passing,
        "tests": tests,
        "test_level": delta_each,
    }
    return ThresholdResult(tau=tau, sample_indices=idx, diagnostics=diagnostics)


def tau_is_ci_rt(
    dataset: Dataset, oracle: BudgetedOracle, spec: QuerySpec, config: EstimatorConfig | None = None
) -> ThresholdResult:
    """Recall threshold from an importance-weighted sample with CI inflation.

    Draws records proportionally to proxy ** exponent after defensive mixing,
    reweights every estimate by m = u / w, and otherwise mirrors the uniform
    CI routine with reweighted positive-mass vectors.
    """
    cfg = config or EstimatorConfig()
    rng = _rng_for(spec)
    dist = _mixed_distribution(dataset, cfg)
    ws = weighted_sample(dataset, dist, spec.budget, rng)
    labels = oracle.labels_at(ws.indices)
    proxy = dataset.proxy[ws.indices]
    diagnostics: dict = {"draws": int(spec.budget)}
    try:
        tau0 = max_recall_threshold(proxy, labels, spec.gamma, weights=ws.m)
    except NoPositiveSamples:
        diagnostics["fallback"] = "no_positive_samples"
        return ThresholdResult(tau=0.0, sample_indices=ws.indices, m=ws.m, diagnostics=diagnostics)
    pos_mass = np.where(labels == 1, ws.m, 0.0)
    z1 = np.where(proxy >= tau0, pos_mass, 0.0)
    z2 = np.where(proxy < tau0, pos_mass, 0.0)
    gamma_prime = inflated_recall_target(
        z1,
        z2,
        spec.delta,
        spec.gamma,
        method=cfg.bound_method,
        value_bound=dist.reweight_cap(),
        rng=rng,
        resamples=cfg.bootstrap_resamples,
    )
    tau = max_recall_threshold(proxy, labels, gamma_prime, weights=ws.m)
    diagnostics["gamma_prime"] = gamma_prime
    diagnostics["tau0"] = tau0
    return ThresholdResult(tau=tau, sample_indices=ws.indices, m=ws.m, diagnostics=diagnostics)


def _weighted_pt_scan(
    dataset: Dataset,
    oracle: BudgetedOracle,
    rng,
    positions: np.ndarray,
    probs: np.ndarray,
    n_draws: int,
    gamma: float,
    delta_each: float,
    cfg: EstimatorConfig,
) -> tuple[float, np.ndarray, np.ndarray, int, int]:
    """Weighted candidate scan over a record subset with renormalized weights."""
    local = weighted_draws(probs, n_draws, rng)
    idx = positions[local]
    m = (1.0 / positions.size) / probs[local]
    labels = oracle.labels_at(idx)
    proxy = dataset.proxy[idx]
    tau, passing, tests = _scan_precision_candidates(
        proxy,
        labels,
        None if cfg.stage2_unweighted else m,
        gamma,
        delta_each,
        cfg.step,
        descending_grid=True,
        method=cfg.bound_method,
        value_bound=1.0,
        rng=rng,
        resamples=cfg.bootstrap_resamples,
    )
    return tau, idx, m, passing, tests


def tau_is_ci_pt(
    dataset: Dataset, oracle: BudgetedOracle, spec: QuerySpec, config: EstimatorConfig | None = None
) -> ThresholdResult:
    """Two-stage importance-weighted precision threshold.

    Stage one spends half the budget bounding the positive count from above;
    no threshold below the (count / gamma)-th highest proxy score can reach
    the target, so stage two resamples only that top slice (weights
    renormalized over it) and runs the candidate scan there at level
    delta / (2 M). Both stages consume delta / 2.
    """
    cfg = config or EstimatorConfig()
    rng = _rng_for(spec)
    dist = _mixed_distribution(dataset, cfg)
    s1 = spec.budget // 2
    s2 = spec.budget - s1
    ws1 = weighted_sample(dataset, dist, s1, rng)
    labels1 = oracle.labels_at(ws1.indices)
    z = np.where(labels1 == 1, ws1.m, 0.0)
    n_match = len(dataset) * upper_bound(
        z,
        spec.delta / 2.0,
        cfg.bound_method,
        value_bound=dist.reweight_cap(),
        rng=rng,
        resamples=cfg.bootstrap_resamples,
    )
    keep = math.ceil(n_match / spec.gamma)
    diagnostics: dict = {"draws": int(spec.budget), "n_match_ub": float(n_match)}
    if keep <= 0:
        diagnostics["fallback"] = "no_positive_samples"
        diagnostics["candidate_count"] = 0
        return ThresholdResult(
            tau=math.inf, sample_indices=ws1.indices, m=ws1.m, diagnostics=diagnostics
        )
    if keep >= len(dataset):
        positions = np.arange(len(dataset), dtype=np.int64)
        diagnostics["degenerate_stage1"] = True
    else:
        positions = np.sort(dataset.score_order_desc()[:keep])
    sub = dist.probs[positions]
    sub = sub / sub.sum()
    n_tests = math.ceil(s2 / cfg.step)
    delta_each = spec.delta / (2.0 * n_tests)
    tau, idx2, m2, passing, tests = _weighted_pt_scan(
        dataset, oracle, rng, positions, sub, s2, spec.gamma, delta_each, cfg
    )
    diagnostics.update(
        {"candidate_count": passing, "tests": tests, "test_level": delta_each}
    )
    return ThresholdResult(
        tau=tau,
        sample_indices=np.concatenate([ws1.indices, idx2]),
        m=np.concatenate([ws1.m, m2]),
        diagnostics=diagnostics,
    )


def tau_is_ci_pt_one_stage(
    dataset: Dataset, oracle: BudgetedOracle, spec: QuerySpec, config: EstimatorConfig | None = None
) -> ThresholdResult:
    """Single-stage importance-weighted precision threshold.

    The full budget goes into one weighted sample over the whole dataset and
    the candidate scan runs at level delta / M, with no top-slice restriction.
    """
    cfg = config or EstimatorConfig()
    rng = _rng_for(spec)
    dist = _mixed_distribution(dataset, cfg)
    positions = np.arange(len(dataset), dtype=np.int64)
    n_tests = math.ceil(spec.budget / cfg.step)
    delta_each = spec.delta / n_tests
    tau, idx, m, passing, tests = _weighted_pt_scan(
        dataset, oracle, rng, positions, dist.probs, spec.budget, spec.gamma, delta_each, cfg
    )
    diagnostics = {
        "draws": int(spec.budget),
        "candidate_count": passing,
        "tests": tests,
        "test_level": delta_each,
    }
    return ThresholdResult(tau=tau, sample_indices=idx, m=m, diagnostics=diagnostics)


_DISPATCH = {
    (QueryKind.RECALL_TARGET, Estimator.U_NOCI): tau_u_noci_rt,
    (QueryKind.RECALL_TARGET, Estimator.U_CI): tau_u_ci_rt,
    (QueryKind.RECALL_TARGET, Estimator.IS_CI): tau_is_ci_rt,
    (QueryKind.PRECISION_TARGET, Estimator.U_NOCI): tau_u_noci_pt,
    (QueryKind.PRECISION_TARGET, Estimator.U_CI): tau_u_ci_pt,
    (QueryKind.PRECISION_TARGET, Estimator.IS_CI): tau_is_ci_pt,
    (QueryKind.PRECISION_TARGET, Estimator.IS_CI_ONE_STAGE): tau_is_ci_pt_one_stage,
}


def estimate_threshold(
    dataset: Dataset, oracle: BudgetedOracle, spec: QuerySpec, config: EstimatorConfig | None = None
) -> ThresholdResult:
    """Run the estimator named by ``spec`` and return its threshold."""
    try:
        fn = _DISPATCH[(spec.kind, spec.estimator)]
    except KeyError:
        raise ValueError(f"no estimator for {spec.kind} with {spec.estimator}") from None
    return fn(dataset, oracle, spec, config)


def joint_target_query(
    dataset: Dataset, oracle: BudgetedOracle, spec: QuerySpec, config: EstimatorConfig | None = None
) -> ResultSet:
    """Answer a query with both recall and precision targets.

    Runs the CI recall estimator at target gamma_r and level delta / 2 under
    the stage-two budget, then exhaustively labels the records selected by
    the threshold and keeps only confirmed positives. The kept set has
    precision 1 and unchanged recall; the exhaustive pass is not budget
    limited, so total oracle calls are reported rather than capped.
    """
    rt_spec = replace(
        spec,
        kind=QueryKind.RECALL_TARGET,
        gamma=spec.gamma_r,
        gamma_r=None,
        gamma_p=None,
        delta=spec.delta / 2.0,
    )
    thr = estimate_threshold(dataset, oracle, rt_spec, config)
    sampled = np.unique(thr.sample_indices)
    sampled_labels = oracle.labels_at(sampled)
    r1 = sampled[sampled_labels == 1]
    if math.isfinite(thr.tau):
        r2 = np.flatnonzero(dataset.proxy >= thr.tau)
    else:
        r2 = np.empty(0, dtype=np.int64)
    # Stage three reads ground truth directly: the joint setting has no hard
    # budget for the final filter, only an accounting of calls made.
    novel = np.setdiff1d(r2, sampled, assume_unique=False)
    stage3_calls = int(novel.size)
    r2_kept = r2[dataset.labels[r2] == 1]
    union = np.union1d(r1, r2_kept)
    diagnostics = dict(thr.diagnostics)
    diagnostics["stage3_calls"] = stage3_calls
    diagnostics["stage2_calls"] = oracle.used
    diagnostics["r1_size"] = int(r1.size)
    diagnostics["r2_size"] = int(r2.size)
    return ResultSet(
        ids=dataset.ids[union],
        tau=thr.tau,
        oracle_calls=oracle.used + stage3_calls,
        diagnostics=diagnostics,
    )
