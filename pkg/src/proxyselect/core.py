"""Domain types, exact precision/recall metrics, and query orchestration.

A query runs against a :class:`Dataset` whose every record carries a cheap
proxy score in [0, 1] and a ground-truth binary label. At query time the
labels are only reachable through a :class:`~proxyselect.sampling.BudgetedOracle`,
which enforces the call budget; the full label column is used afterwards to
evaluate the achieved precision and recall of the returned set.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EmptySelection, NoPositives, NoPositiveSamples


class QueryKind(enum.Enum):
    RECALL_TARGET = "rt"
    PRECISION_TARGET = "pt"
    JOINT_TARGET = "jt"


class Estimator(enum.Enum):
    """Threshold-selection strategy used to answer a query."""

    U_NOCI = "U-NoCI"
    U_CI = "U-CI"
    IS_CI = "IS-CI"
    # Single-stage variant of the weighted precision-target routine; kept as
    # a separate arm so experiments can compare it against the two-stage one.
    IS_CI_ONE_STAGE = "IS-CI-1S"


@dataclass(frozen=True)
class Record:
    """One scored record.

    ``label`` holds the ground-truth predicate value when known. During query
    execution labels are revealed only through the budgeted oracle; the field
    is write-once by construction (the dataclass is frozen).
    """

    id: int
    proxy: float
    label: Optional[int] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.proxy <= 1.0:
            raise ValueError(f"proxy score {self.proxy} outside [0, 1]")
        if self.label is not None and self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


class Dataset:
    """Ordered collection of records backed by columnar arrays.

    Immutable after construction. ``labels`` is the ground-truth column; query
    code must not read it directly and instead goes through the oracle.
    """

    def __init__(self, ids, proxy, labels) -> None:
        ids = np.ascontiguousarray(ids, dtype=np.int64)
        proxy = np.ascontiguousarray(proxy, dtype=np.float64)
        labels = np.ascontiguousarray(labels, dtype=np.int8)
        if ids.size == 0:
            raise ValueError("dataset must contain at least one record")
        if not (ids.size == proxy.size == labels.size):
            raise ValueError("ids, proxy, and labels must have equal length")
        if np.unique(ids).size != ids.size:
            raise ValueError("record ids must be unique")
        if proxy.min() < 0.0 or proxy.max() > 1.0:
            raise ValueError("proxy scores must lie in [0, 1]")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        for arr in (ids, proxy, labels):
            arr.setflags(write=False)
        self.ids = ids
        self.proxy = proxy
        self.labels = labels
        self._pos_of: Optional[dict[int, int]] = None
        self._desc_order: Optional[np.ndarray] = None

    @classmethod
    def from_records(cls, records: Sequence[Record]) -> "Dataset":
        if any(r.label is None for r in records):
            raise ValueError("all records need ground-truth labels to form a dataset")
        return cls(
            [r.id for r in records],
            [r.proxy for r in records],
            [r.label for r in records],
        )

    def __len__(self) -> int:
        return int(self.ids.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.ids, other.ids)
            and np.array_equal(self.proxy, other.proxy)
            and np.array_equal(self.labels, other.labels)
        )

    def position_of(self, record_id: int) -> int:
        if self._pos_of is None:
            self._pos_of = {int(i): p for p, i in enumerate(self.ids)}
        try:
            return self._pos_of[int(record_id)]
        except KeyError:
            raise KeyError(f"unknown record id {record_id}") from None

    def positions_of(self, record_ids) -> np.ndarray:
        return np.fromiter(
            (self.position_of(i) for i in np.asarray(record_ids).ravel()),
            dtype=np.int64,
        )

    @property
    def n_positive(self) -> int:
        return int(np.count_nonzero(self.labels))

    def score_order_desc(self) -> np.ndarray:
        """Positions sorted by descending proxy, ties broken by ascending id."""
        if self._desc_order is None:
            order = np.lexsort((self.ids, -self.proxy))
            order.setflags(write=False)
            self._desc_order = order
        return self._desc_order


@dataclass(frozen=True)
class QuerySpec:
    """Parameters of one selection query.

    ``gamma`` is the recall or precision target; joint-target queries use
    ``gamma_r``/``gamma_p`` instead and interpret ``budget`` as the stage-two
    allocation (the final exhaustive filter is not budget-limited).
    """

    kind: QueryKind
    budget: int
    delta: float
    estimator: Estimator = Estimator.IS_CI
    seed: int = 0
    gamma: Optional[float] = None
    gamma_r: Optional[float] = None
    gamma_p: Optional[float] = None

    def __post_init__(self) -> None:
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if self.budget < 100:
            raise ValueError(
                f"budget must be at least 100 for the normal approximation to "
                f"hold, got {self.budget}"
            )
        if self.kind is QueryKind.JOINT_TARGET:
            if self.gamma is not None or self.gamma_r is None or self.gamma_p is None:
                raise ValueError("joint-target queries take gamma_r and gamma_p")
            for g in (self.gamma_r, self.gamma_p):
                if not 0.0 < g < 1.0:
                    raise ValueError(f"targets must be in (0, 1), got {g}")
            if self.estimator not in (Estimator.U_CI, Estimator.IS_CI):
                raise ValueError("joint-target queries need a CI recall estimator")
        else:
            if self.gamma is None or self.gamma_r is not None or self.gamma_p is not None:
                raise ValueError("recall/precision-target queries take a single gamma")
            if not 0.0 < self.gamma < 1.0:
                raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
            if (
                self.estimator is Estimator.IS_CI_ONE_STAGE
                and self.kind is not QueryKind.PRECISION_TARGET
            ):
                raise ValueError("the one-stage estimator applies to precision targets only")


@dataclass(frozen=True)
class ResultSet:
    """Records returned by a query plus the threshold that produced them.

    ``tau`` may be ``math.inf``, meaning no score threshold was certified and
    only directly-labeled positives were returned.
    """

    ids: np.ndarray
    tau: float
    oracle_calls: int
    diagnostics: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.ids.size)


def true_precision(result: ResultSet, dataset: Dataset) -> float:
    """Exact precision of a result set against full ground truth.

    The empty set vacuously has precision 1.
    """
    if result.ids.size == 0:
        return 1.0
    labels = dataset.labels[dataset.positions_of(result.ids)]
    return float(np.count_nonzero(labels) / labels.size)


def true_recall(result: ResultSet, dataset: Dataset) -> float:
    """Exact recall of a result set against full ground truth."""
    total = dataset.n_positive
    if total == 0:
        raise NoPositives("dataset has no positive records")
    if result.ids.size == 0:
        return 0.0
    labels = dataset.labels[dataset.positions_of(result.ids)]
    return float(np.count_nonzero(labels) / total)


def empirical_recall(proxy, labels, tau: float) -> float:
    """Fraction of sampled positives scoring at or above ``tau``."""
    proxy = np.asarray(proxy, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = np.count_nonzero(labels)
    if n_pos == 0:
        raise NoPositiveSamples("sample contains no positives")
    hits = np.count_nonzero((proxy >= tau) & (labels == 1))
    return float(hits / n_pos)


def empirical_precision(proxy, labels, tau: float) -> float:
    """Mean label among sampled records scoring at or above ``tau``."""
    proxy = np.asarray(proxy, dtype=np.float64)
    labels = np.asarray(labels)
    sel = proxy >= tau
    if not sel.any():
        raise EmptySelection(f"no sampled score at or above {tau}")
    return float(np.asarray(labels, dtype=np.float64)[sel].mean())


def weighted_empirical_recall(proxy, labels, m, tau: float) -> float:
    """Reweighted recall estimate on a weighted sample.

    Each sampled record contributes its reweighting factor ``m`` so the ratio
    is unbiased for dataset recall despite non-uniform draw probabilities.
    """
    proxy = np.asarray(proxy, dtype=np.float64)
    lab = np.asarray(labels, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    denom = float(np.sum(lab * m))
    if denom <= 0.0:
        raise NoPositiveSamples("sample carries no positive weight")
    num = float(np.sum((proxy >= tau) * lab * m))
    return num / denom


def weighted_empirical_precision(proxy, labels, m, tau: float) -> float:
    """Self-normalized precision estimate over the selected part of a sample."""
    proxy = np.asarray(proxy, dtype=np.float64)
    lab = np.asarray(labels, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    sel = proxy >= tau
    if not sel.any():
        raise EmptySelection(f"no sampled score at or above {tau}")
    return float(np.sum(lab[sel] * m[sel]) / np.sum(m[sel]))


def run_query(dataset: Dataset, spec: QuerySpec, oracle=None, config=None) -> ResultSet:
    """Answer a selection query: sample labels, pick a threshold, return records.

    The result is the union of every sampled record the oracle confirmed
    positive and every record scoring at or above the chosen threshold.
    Deterministic given (dataset, spec, config) because all randomness flows
    from ``spec.seed``.
    """
    from . import estimators
    from .sampling import BudgetedOracle

    if oracle is None:
        oracle = BudgetedOracle(dataset, spec.budget)

    if spec.kind is QueryKind.JOINT_TARGET:
        return estimators.joint_target_query(dataset, oracle, spec, config)

    thr = estimators.estimate_threshold(dataset, oracle, spec, config)
    sampled = np.unique(thr.sample_indices)
    sampled_labels = oracle.labels_at(sampled)
    r1 = sampled[sampled_labels == 1]
    if math.isfinite(thr.tau):
        r2 = np.flatnonzero(dataset.proxy >= thr.tau)
    else:
        r2 = np.empty(0, dtype=np.int64)
    union = np.union1d(r1, r2)
    diagnostics = dict(thr.diagnostics)
    diagnostics["r1_size"] = int(r1.size)
    diagnostics["r2_size"] = int(r2.size)
    return ResultSet(
        ids=dataset.ids[union],
        tau=thr.tau,
        oracle_calls=oracle.used,
        diagnostics=diagnostics,
    )
