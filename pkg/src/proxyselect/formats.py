"""File formats: the dataset CSV and the JSON query/experiment documents.

Dataset CSV schema: header exactly ``id,proxy_score,oracle_label``, UTF-8,
LF line endings, unique integer ids, scores in [0, 1] at full precision
(out-of-range scores are a parse error, never clipped), labels 0 or 1.
"""

from __future__ import annotations

import csv
import json
import math
from typing import Any

import numpy as np

from .confidence import BoundMethod
from .core import Dataset, Estimator, QueryKind, QuerySpec
from .errors import ConfigError, DatasetFormatError
from .estimators import EstimatorConfig
from .harness import Arm, ExperimentConfig
from .synth import BetaSpec

DATASET_HEADER = ["id", "proxy_score", "oracle_label"]

_SPEC_KEYS = {"kind", "gamma", "gamma_r", "gamma_p", "budget", "delta", "estimator", "seed"}
_CONFIG_KEYS = {
    "step",
    "mix_ratio",
    "weight_exponent",
    "bound_method",
    "stage2_unweighted",
    "bootstrap_resamples",
}


def write_dataset_csv(dataset: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DATASET_HEADER)
        for i, p, y in zip(dataset.ids, dataset.proxy, dataset.labels):
            writer.writerow([int(i), repr(float(p)), int(y)])


def read_dataset_csv(path: str) -> Dataset:
    """Parse a dataset CSV, rejecting malformed rows with their line number."""
    ids: list[int] = []
    proxy: list[float] = []
    labels: list[int] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError("line 1: empty file") from None
        if header != DATASET_HEADER:
            raise DatasetFormatError(
                f"line 1: header must be {','.join(DATASET_HEADER)!r}, got {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise DatasetFormatError(f"line {lineno}: expected 3 fields, got {len(row)}")
            try:
                rid = int(row[0])
            except ValueError:
                raise DatasetFormatError(f"line {lineno}: bad id {row[0]!r}") from None
            try:
                score = float(row[1])
            except ValueError:
                raise DatasetFormatError(f"line {lineno}: bad proxy score {row[1]!r}") from None
            if not 0.0 <= score <= 1.0 or math.isnan(score):
                raise DatasetFormatError(f"line {lineno}: proxy score {row[1]} outside [0, 1]")
            if row[2] not in ("0", "1"):
                raise DatasetFormatError(f"line {lineno}: oracle label must be 0 or 1, got {row[2]!r}")
            ids.append(rid)
            proxy.append(score)
            labels.append(int(row[2]))
    if not ids:
        raise DatasetFormatError("line 2: no data rows")
    if len(set(ids)) != len(ids):
        raise DatasetFormatError("duplicate record ids")
    return Dataset(np.array(ids), np.array(proxy), np.array(labels))


def _parse_enum(enum_cls, raw: str, what: str):
    for member in enum_cls:
        if member.value == raw:
            return member
    options = ", ".join(m.value for m in enum_cls)
    raise ConfigError(f"unknown {what} {raw!r}; expected one of: {options}")


def _reject_unknown(doc: dict, allowed: set, what: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")


def parse_query_doc(doc: dict) -> tuple[QuerySpec, EstimatorConfig]:
    """Build a query spec and estimator config from one JSON object."""
    if not isinstance(doc, dict):
        raise ConfigError("query document must be a JSON object")
    _reject_unknown(doc, _SPEC_KEYS | _CONFIG_KEYS, "query")
    for key in ("kind", "budget", "delta"):
        if key not in doc:
            raise ConfigError(f"query document is missing {key!r}")
    kind = _parse_enum(QueryKind, str(doc["kind"]).lower(), "query kind")
    estimator = _parse_enum(Estimator, str(doc.get("estimator", "IS-CI")), "estimator")
    cfg_kwargs: dict[str, Any] = {k: doc[k] for k in _CONFIG_KEYS & doc.keys()}
    if "bound_method" in cfg_kwargs:
        cfg_kwargs["bound_method"] = _parse_enum(
            BoundMethod, str(cfg_kwargs["bound_method"]).lower(), "bound method"
        )
    try:
        spec = QuerySpec(
            kind=kind,
            budget=int(doc["budget"]),
            delta=float(doc["delta"]),
            estimator=estimator,
            seed=int(doc.get("seed", 0)),
            gamma=None if doc.get("gamma") is None else float(doc["gamma"]),
            gamma_r=None if doc.get("gamma_r") is None else float(doc["gamma_r"]),
            gamma_p=None if doc.get("gamma_p") is None else float(doc["gamma_p"]),
        )
        config = EstimatorConfig(**cfg_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return spec, config


def load_query_file(path: str) -> tuple[QuerySpec, EstimatorConfig]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    return parse_query_doc(doc)


def _parse_beta_spec(doc: dict) -> BetaSpec:
    _reject_unknown(doc, {"alpha", "beta", "size", "noise_sd", "seed"}, "dataset")
    try:
        return BetaSpec(
            alpha=float(doc["alpha"]),
            beta=float(doc["beta"]),
            size=int(doc["size"]),
            noise_sd=float(doc.get("noise_sd", 0.0)),
            seed=int(doc.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad dataset spec: {exc}") from None


def parse_experiment_doc(doc: dict) -> ExperimentConfig:
    """Build an experiment config from one JSON object."""
    if not isinstance(doc, dict):
        raise ConfigError("experiment document must be a JSON object")
    _reject_unknown(doc, {"dataset", "arms", "trials", "base_seed", "sweep"}, "experiment")
    if "dataset" not in doc or "arms" not in doc:
        raise ConfigError("experiment document needs 'dataset' and 'arms'")
    raw_ds = doc["dataset"]
    dataset = raw_ds if isinstance(raw_ds, str) else _parse_beta_spec(raw_ds)
    arms = []
    if not isinstance(doc["arms"], list) or not doc["arms"]:
        raise ConfigError("'arms' must be a nonempty list")
    for i, arm_doc in enumerate(doc["arms"]):
        if not isinstance(arm_doc, dict):
            raise ConfigError(f"arm {i} must be a JSON object")
        name = arm_doc.get("name")
        if not name:
            raise ConfigError(f"arm {i} is missing a name")
        rest = {k: v for k, v in arm_doc.items() if k != "name"}
        spec, config = parse_query_doc(rest)
        arms.append(Arm(name=str(name), spec=spec, config=config))
    if len({a.name for a in arms}) != len(arms):
        raise ConfigError("arm names must be unique")
    sweep = doc.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict) or not all(isinstance(v, list) for v in sweep.values()):
            raise ConfigError("'sweep' must map parameter names to value lists")
        if "bound_method" in sweep:
            sweep = dict(sweep)
            sweep["bound_method"] = [
                _parse_enum(BoundMethod, str(v).lower(), "bound method")
                for v in sweep["bound_method"]
            ]
    try:
        return ExperimentConfig(
            dataset=dataset,
            arms=tuple(arms),
            trials=int(doc.get("trials", 100)),
            base_seed=int(doc.get("base_seed", 0)),
            sweep=sweep,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_experiment_file(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    return parse_experiment_doc(doc)
