"""Budget-limited selection queries with probabilistic precision/recall guarantees."""

from .confidence import BoundMethod, SampleStats, binary_lb, lb, lower_bound, ub, upper_bound
from .core import (
    Dataset,
    Estimator,
    QueryKind,
    QuerySpec,
    Record,
    ResultSet,
    empirical_precision,
    empirical_recall,
    run_query,
    true_precision,
    true_recall,
    weighted_empirical_precision,
    weighted_empirical_recall,
)
from .errors import (
    BudgetExhausted,
    ConfigError,
    DatasetFormatError,
    EmptyReports,
    EmptySelection,
    InvalidCounts,
    NoPositiveSamples,
    NoPositives,
    SelectionError,
)
from .estimators import (
    EstimatorConfig,
    ThresholdResult,
    estimate_threshold,
    inflated_recall_target,
    joint_target_query,
    max_recall_threshold,
    min_precision_threshold,
    tau_is_ci_pt,
    tau_is_ci_pt_one_stage,
    tau_is_ci_rt,
    tau_u_ci_pt,
    tau_u_ci_rt,
    tau_u_noci_pt,
    tau_u_noci_rt,
)
from .harness import (
    Arm,
    ExperimentConfig,
    TrialReport,
    derive_seed,
    failure_rate,
    quality_summary,
    run_drift,
    run_single_trial,
    run_trials,
    summarize_arm,
)
from .sampling import (
    BudgetedOracle,
    WeightDistribution,
    WeightedSample,
    defensive_mix,
    oracle_label,
    power_weights,
    reweighted_variance,
    sqrt_weights,
    uniform_sample,
    weighted_sample,
)
from .synth import BetaSpec, drift_pair, gen_beta

__version__ = "0.1.0"
