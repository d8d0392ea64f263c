"""Model-family runners shared by the benchmark harness and the audit layers.

A family knows how to build its encoder-ready inputs for one arm, fit its
estimator, and turn a design matrix into survival curves on the weekly grid.
Keeping that recipe in one place lets ablation refit preprocessing per
variant and lets permutation importance re-predict from a permuted design
without duplicating pipeline code.
"""

from dataclasses import dataclass, field

import numpy as np

from .cohort import (
    BLOCK_EARLY_WINDOW,
    BLOCK_STATIC,
    BLOCK_TEMPORAL,
    BLOCK_TIME_INDEX,
    DERIVED_TEMPORAL,
    RAW_TEMPORAL,
)
from .curves import SurvivalCurves
from .errors import ConfigError
from .features import EARLY_WINDOW_FEATURES
from .models import (
    CoxPH,
    DiscreteTimeHazard,
    PoissonPiecewiseExponential,
    RandomSurvivalForest,
    WeibullAFT,
)
from .preprocess import CovariateEncoder
from .validation import pack_y

ARM_DYNAMIC = "dynamic"
ARM_COMPARABLE = "comparable"

# Temporal block ablated against the static block, per arm.
TEMPORAL_BLOCK = {ARM_DYNAMIC: BLOCK_TEMPORAL, ARM_COMPARABLE: BLOCK_EARLY_WINDOW}


def comparable_encoder(cohort):
    """Encoder template for enrollment-level early-window design matrices."""
    blocks = {c: BLOCK_STATIC for c in cohort.static_columns}
    blocks.update({c: BLOCK_EARLY_WINDOW for c in EARLY_WINDOW_FEATURES})
    return CovariateEncoder(
        numeric=list(cohort.static_numeric) + EARLY_WINDOW_FEATURES,
        categorical=list(cohort.static_categorical),
        blocks=blocks)


def dynamic_encoder(cohort):
    """Encoder template for person-period design matrices (week passes through)."""
    temporal = RAW_TEMPORAL + DERIVED_TEMPORAL
    blocks = {c: BLOCK_STATIC for c in cohort.static_columns}
    blocks.update({c: BLOCK_TEMPORAL for c in temporal})
    blocks["week"] = BLOCK_TIME_INDEX
    return CovariateEncoder(
        numeric=list(cohort.static_numeric) + temporal,
        categorical=list(cohort.static_categorical),
        passthrough=["week"],
        blocks=blocks)


@dataclass
class ArmData:
    """Train/test inputs for one arm on one split.

    The comparable arm carries enrollment-level frames; the dynamic arm
    carries the training person-period panel and the evaluation panel
    extended to the full weekly grid for every test enrollment.
    """

    arm: str
    grid: np.ndarray
    test_ids: np.ndarray
    test_times: np.ndarray
    test_events: np.ndarray
    train_frame: object = None
    test_frame: object = None
    train_times: np.ndarray = None
    train_events: np.ndarray = None
    panel_train: object = None
    eval_panel: object = None
    label_col: str = "hazard_label"

    @property
    def test_design_frame(self):
        return self.test_frame if self.arm == ARM_COMPARABLE else self.eval_panel


@dataclass
class FittedFamily:
    """A fitted family plus everything needed to re-evaluate it."""

    name: str
    arm: str
    model: object
    encoder: CovariateEncoder
    grid: np.ndarray
    n_rows_per_id: int = 1  # panel rows per enrollment for dynamic families

    def curves_from_design(self, X):
        """Map a (possibly permuted) design matrix to survival values."""
        if self.arm == ARM_COMPARABLE:
            return self.model.predict_survival(X, self.grid)
        hazards = self.model.predict_weekly_hazard(X)
        per_row = hazards.reshape(-1, self.n_rows_per_id)
        return np.cumprod(1.0 - per_row, axis=1)

    def predict_curves(self, design, ids):
        values = self.curves_from_design(design.X)
        return SurvivalCurves(ids=np.asarray(ids), grid=self.grid, values=values)


@dataclass
class Family:
    """Named model family bound to one arm."""

    name: str
    arm: str
    build: callable
    default_params: dict = field(default_factory=dict)
    seeded: bool = False

    def make_model(self, params, seed, week_col=None):
        merged = dict(self.default_params)
        merged.update(params or {})
        if self.seeded:
            merged.setdefault("seed", seed)
        if self.arm == ARM_DYNAMIC:
            merged.setdefault("week_col", week_col)
        return self.build(**merged)

    def fit(self, arm_data, encoder, params=None, seed=0):
        """Fit on the arm's training rows; returns a FittedFamily."""
        grid = arm_data.grid
        if self.arm == ARM_COMPARABLE:
            design = encoder.fit(arm_data.train_frame).transform(arm_data.train_frame)
            model = self.make_model(params, seed)
            model.fit(design.X, pack_y(arm_data.train_times, arm_data.train_events),
                      columns=design.columns)
            return FittedFamily(self.name, self.arm, model, encoder, grid)
        design = encoder.fit(arm_data.panel_train).transform(arm_data.panel_train)
        week_col = design.column_index("week") if "week" in design.columns else None
        model = self.make_model(params, seed, week_col=week_col)
        labels = arm_data.panel_train[arm_data.label_col].to_numpy()
        model.fit(design.X, labels, columns=design.columns)
        return FittedFamily(self.name, self.arm, model, encoder, grid,
                            n_rows_per_id=len(grid))


COMPARABLE_FAMILIES = {
    "cox": Family("cox", ARM_COMPARABLE, CoxPH, {"l2": 1e-4}),
    "weibull_aft": Family("weibull_aft", ARM_COMPARABLE, WeibullAFT),
    "survival_forest": Family(
        "survival_forest", ARM_COMPARABLE, RandomSurvivalForest,
        {"n_trees": 100, "min_leaf": 50, "max_depth": 6, "feature_fraction": 0.7},
        seeded=True),
}

DYNAMIC_FAMILIES = {
    "discrete_time_hazard": Family(
        "discrete_time_hazard", ARM_DYNAMIC, DiscreteTimeHazard, {"l2": 1e-4}),
    "poisson_pem": Family(
        "poisson_pem", ARM_DYNAMIC, PoissonPiecewiseExponential, {"l2": 1e-4}),
}


def get_family(name):
    if name in COMPARABLE_FAMILIES:
        return COMPARABLE_FAMILIES[name]
    if name in DYNAMIC_FAMILIES:
        return DYNAMIC_FAMILIES[name]
    raise ConfigError(f"unknown model family '{name}'")
