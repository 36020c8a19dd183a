"""Repeated-trial experiment runner with failure rates and sweeps.

Trials are independent replays of the same query with per-trial seeds derived
from a stable hash of (base seed, arm name, trial index), so every arm's
reports are unchanged by adding or removing other arms and identical across
serial and parallel execution.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .core import Dataset, QueryKind, QuerySpec, ResultSet, run_query, true_precision, true_recall
from .errors import EmptyReports, SelectionError
from .estimators import EstimatorConfig, max_recall_threshold, min_precision_threshold
from .synth import BetaSpec, gen_beta

DatasetSource = Union[BetaSpec, str]

# Sweep keys that regenerate the dataset vs. re-parameterize the arms.
DATASET_SWEEP_KEYS = frozenset({"alpha", "beta", "size", "noise_sd"})
ARM_SWEEP_KEYS = frozenset(
    {"gamma", "budget", "delta", "step", "mix_ratio", "weight_exponent", "bound_method"}
)
SPEC_KEYS = frozenset({"gamma", "budget", "delta"})


@dataclass(frozen=True)
class Arm:
    """One named (query, estimator-config) combination to replay."""

    name: str
    spec: QuerySpec
    config: EstimatorConfig = field(default_factory=EstimatorConfig)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSource
    arms: tuple[Arm, ...]
    trials: int = 100
    base_seed: int = 0
    sweep: Optional[dict] = None

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.arms:
            raise ValueError("at least one arm is required")
        object.__setattr__(self, "arms", tuple(self.arms))


@dataclass(frozen=True)
class TrialReport:
    arm: str
    seed: int
    tau: float
    oracle_calls: int
    result_size: int
    achieved_precision: float
    achieved_recall: float
    valid: bool
    error: str = ""


def derive_seed(base_seed: int, arm_name: str, trial: int) -> int:
    """Stable 64-bit per-trial seed; independent of the other arms."""
    key = f"{base_seed}|{arm_name}|{trial}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def _is_valid(spec: QuerySpec, precision: float, recall: float) -> bool:
    if spec.kind is QueryKind.RECALL_TARGET:
        return recall >= spec.gamma
    if spec.kind is QueryKind.PRECISION_TARGET:
        return precision >= spec.gamma
    return recall >= spec.gamma_r and precision >= spec.gamma_p


def run_single_trial(dataset: Dataset, arm: Arm, seed: int) -> TrialReport:
    """One seeded replay of an arm, scored against full ground truth.

    Failures (estimator or evaluation) become invalid reports with a reason
    code instead of aborting the batch.
    """
    spec = replace(arm.spec, seed=seed)
    try:
        result = run_query(dataset, spec, config=arm.config)
        precision = true_precision(result, dataset)
        recall = true_recall(result, dataset)
    except SelectionError as exc:
        return TrialReport(
            arm=arm.name,
            seed=seed,
            tau=math.nan,
            oracle_calls=0,
            result_size=0,
            achieved_precision=math.nan,
            achieved_recall=math.nan,
            valid=False,
            error=type(exc).__name__,
        )
    return TrialReport(
        arm=arm.name,
        seed=seed,
        tau=result.tau,
        oracle_calls=result.oracle_calls,
        result_size=len(result),
        achieved_precision=precision,
        achieved_recall=recall,
        valid=_is_valid(spec, precision, recall),
    )


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(getattr(value, "value", value))


def expand_experiment(config: ExperimentConfig) -> list[tuple[DatasetSource, Arm]]:
    """Expand the sweep grid into concrete (dataset source, arm) pairs.

    Arm names carry the full swept combo so reports stay traceable.
    """
    if not config.sweep:
        return [(config.dataset, arm) for arm in config.arms]
    keys = sorted(config.sweep)
    unknown = set(keys) - DATASET_SWEEP_KEYS - ARM_SWEEP_KEYS
    if unknown:
        raise ValueError(f"unknown sweep parameters: {sorted(unknown)}")
    out = []
    for values in itertools.product(*(config.sweep[k] for k in keys)):
        combo = dict(zip(keys, values))
        ds_updates = {k: v for k, v in combo.items() if k in DATASET_SWEEP_KEYS}
        if ds_updates:
            if not isinstance(config.dataset, BetaSpec):
                raise ValueError("dataset sweeps require a synthetic dataset source")
            source: DatasetSource = replace(config.dataset, **ds_updates)
        else:
            source = config.dataset
        spec_updates = {k: v for k, v in combo.items() if k in SPEC_KEYS}
        cfg_updates = {k: v for k, v in combo.items() if k in ARM_SWEEP_KEYS - SPEC_KEYS}
        suffix = ",".join(f"{k}={_fmt(combo[k])}" for k in keys)
        for arm in config.arms:
            spec = replace(arm.spec, **spec_updates) if spec_updates else arm.spec
            cfg = replace(arm.config, **cfg_updates) if cfg_updates else arm.config
            out.append((source, Arm(name=f"{arm.name}[{suffix}]", spec=spec, config=cfg)))
    return out


def load_dataset(source: DatasetSource) -> Dataset:
    if isinstance(source, BetaSpec):
        return gen_beta(source)
    from .formats import read_dataset_csv

    return read_dataset_csv(source)


def _run_arm(source: DatasetSource, arm: Arm, trials: int, base_seed: int) -> list[TrialReport]:
    dataset = load_dataset(source)
    return [
        run_single_trial(dataset, arm, derive_seed(base_seed, arm.name, t))
        for t in range(trials)
    ]


def _run_arm_task(args) -> list[TrialReport]:
    return _run_arm(*args)


def run_trials(config: ExperimentConfig, parallel: int = 1) -> list[TrialReport]:
    """Replay every arm ``config.trials`` times; reports in arm-major order."""
    pairs = expand_experiment(config)
    if parallel <= 1:
        reports: list[TrialReport] = []
        dataset_cache: dict[DatasetSource, Dataset] = {}
        for source, arm in pairs:
            if source not in dataset_cache:
                dataset_cache[source] = load_dataset(source)
            dataset = dataset_cache[source]
            reports.extend(
                run_single_trial(dataset, arm, derive_seed(config.base_seed, arm.name, t))
                for t in range(config.trials)
            )
        return reports
    tasks = [(source, arm, config.trials, config.base_seed) for source, arm in pairs]
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        chunks = list(pool.map(_run_arm_task, tasks))
    return [report for chunk in chunks for report in chunk]


def failure_rate(reports: list[TrialReport]) -> float:
    """Fraction of trials whose result missed its target."""
    if not reports:
        raise EmptyReports("no trial reports")
    return sum(not r.valid for r in reports) / len(reports)


def quality_summary(values) -> dict:
    """Mean, quartiles, and extremes using linear quantile interpolation."""
    values = np.asarray(list(values), dtype=np.float64)
    if values.size == 0:
        raise EmptyReports("no values to summarize")
    q25, q50, q75 = np.quantile(values, [0.25, 0.5, 0.75])
    return {
        "mean": float(values.mean()),
        "q25": float(q25),
        "median": float(q50),
        "q75": float(q75),
        "min": float(values.min()),
        "max": float(values.max()),
    }


def quality_metric(kind: QueryKind, report: TrialReport) -> float:
    """The metric a valid result should maximize: the one not targeted."""
    if kind is QueryKind.RECALL_TARGET:
        return report.achieved_precision
    return report.achieved_recall


def summarize_arm(arm: Arm, reports: list[TrialReport]) -> dict:
    mine = [r for r in reports if r.arm == arm.name]
    if not mine:
        raise EmptyReports(f"no reports for arm {arm.name}")
    quality = [quality_metric(arm.spec.kind, r) for r in mine if not math.isnan(r.achieved_recall)]
    summary = {
        "arm": arm.name,
        "trials": len(mine),
        "failure_rate": failure_rate(mine),
        "mean_oracle_calls": float(np.mean([r.oracle_calls for r in mine])),
        "errors": sum(bool(r.error) for r in mine),
    }
    if quality:
        summary["quality"] = quality_summary(quality)
    return summary


def naive_full_label_threshold(train: Dataset, kind: QueryKind, gamma: float) -> float:
    """Threshold fit with unlimited labels on a training dataset."""
    if kind is QueryKind.RECALL_TARGET:
        return max_recall_threshold(train.proxy, train.labels, gamma)
    return min_precision_threshold(train.proxy, train.labels, gamma)


def _apply_threshold(dataset: Dataset, tau: float) -> ResultSet:
    if math.isfinite(tau):
        sel = np.flatnonzero(dataset.proxy >= tau)
    else:
        sel = np.empty(0, dtype=np.int64)
    return ResultSet(ids=dataset.ids[sel], tau=tau, oracle_calls=0)


def run_drift(
    train_spec: BetaSpec,
    test_spec: BetaSpec,
    arms: list[Arm],
    trials: int = 100,
    base_seed: int = 0,
) -> list[dict]:
    """Compare pre-fit thresholds against budgeted re-estimation under drift.

    For each arm, a naive threshold is fit on the training dataset with full
    labels and applied unchanged to the test dataset; the arm itself runs on
    the test dataset under its budget. Rows report the achieved metrics of
    both.
    """
    train, test = gen_beta(train_spec), gen_beta(test_spec)
    rows = []
    for arm in arms:
        kind, gamma = arm.spec.kind, arm.spec.gamma
        if kind is QueryKind.JOINT_TARGET:
            raise ValueError("drift comparison covers single-target queries")
        tau = naive_full_label_threshold(train, kind, gamma)
        naive_result = _apply_threshold(test, tau)
        rows.append(
            {
                "arm": f"naive-{arm.name}",
                "method": "naive",
                "kind": kind.value,
                "gamma": gamma,
                "tau": tau,
                "achieved_precision": true_precision(naive_result, test),
                "achieved_recall": true_recall(naive_result, test),
            }
        )
        config = ExperimentConfig(
            dataset=test_spec, arms=(arm,), trials=trials, base_seed=base_seed
        )
        reports = run_trials(config)
        summary = summarize_arm(arm, reports)
        rows.append(
            {
                "arm": arm.name,
                "method": "budgeted",
                "kind": kind.value,
                "gamma": gamma,
                "failure_rate": summary["failure_rate"],
                "mean_achieved_precision": float(
                    np.mean([r.achieved_precision for r in reports])
                ),
                "mean_achieved_recall": float(np.mean([r.achieved_recall for r in reports])),
            }
        )
    return rows
