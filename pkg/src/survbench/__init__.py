"""survbench: two-arm survival benchmarking for weekly dropout-risk models.

The toolkit covers the full benchmark pipeline: cohort ingestion and
person-period expansion, leakage-safe preprocessing, stratified splitting
with context audits, five classical survival families across a dynamic
weekly arm and an early-window comparable arm, censoring-aware metrics
(IPCW Brier, IBS, time-dependent concordance, calibration), and post-hoc
audit layers (no-refit bootstrap, block ablation, grouped permutation
importance, proportional-hazards audit).
"""

from .analysis import (
    BootstrapResult,
    ImportanceResult,
    PHAuditResult,
    bootstrap_ranks,
    grouped_permutation_importance,
    ph_audit,
    run_ablation,
)
from .cohort import Cohort
from .curves import SurvivalCurves, reconstruct_survival
from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    EvaluationError,
    SchemaError,
    SeparationError,
    SurvbenchError,
)
from .features import build_evaluation_panel, compute_early_window, expand_person_period
from .harness import BenchConfig, emit_reports, run_benchmark, run_window_grid
from .ingest import load_cohort, load_oulad
from .metrics import (
    CensoringEstimate,
    MetricReport,
    antolini_concordance,
    brier_ipcw,
    calibration_report,
    evaluate_model,
    integrated_brier,
    km_censoring,
)
from .models import (
    CoxPH,
    DiscreteTimeHazard,
    PoissonPiecewiseExponential,
    RandomSurvivalForest,
    WeibullAFT,
)
from .preprocess import CovariateEncoder, DesignMatrix
from .split import SplitSpec, audit_split, stratified_split
from .synth import SyntheticSpec, generate_cohort, ph_cohort, sign_switch_cohort

__version__ = "0.1.0"

__all__ = [
    "BenchConfig",
    "BootstrapResult",
    "CensoringEstimate",
    "Cohort",
    "ConfigError",
    "ConvergenceError",
    "CovariateEncoder",
    "CoxPH",
    "DataError",
    "DesignMatrix",
    "DiscreteTimeHazard",
    "EvaluationError",
    "ImportanceResult",
    "MetricReport",
    "PHAuditResult",
    "PoissonPiecewiseExponential",
    "RandomSurvivalForest",
    "SchemaError",
    "SeparationError",
    "SplitSpec",
    "SurvbenchError",
    "SurvivalCurves",
    "SyntheticSpec",
    "WeibullAFT",
    "antolini_concordance",
    "audit_split",
    "bootstrap_ranks",
    "brier_ipcw",
    "build_evaluation_panel",
    "calibration_report",
    "compute_early_window",
    "emit_reports",
    "evaluate_model",
    "expand_person_period",
    "generate_cohort",
    "grouped_permutation_importance",
    "integrated_brier",
    "km_censoring",
    "load_cohort",
    "load_oulad",
    "ph_audit",
    "ph_cohort",
    "reconstruct_survival",
    "run_ablation",
    "run_benchmark",
    "run_window_grid",
    "sign_switch_cohort",
    "stratified_split",
]
