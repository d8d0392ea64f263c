"""Cohort container: enrollment records plus weekly activity rows.

The enrollment table has one row per enrollment (a student-module-presentation
unit) carrying the observed time in weeks, the event indicator, and static
covariates. The activity table has at most one row per (enrollment, week) with
aggregated weekly interaction counts.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DataError, SchemaError

ENROLLMENT_KEY = "enrollment_id"

# Static covariates of the canonical cohort schema.
STATIC_CATEGORICAL = [
    "gender",
    "region",
    "highest_education",
    "imd_band",
    "age_band",
    "disability",
]
STATIC_NUMERIC = ["num_of_prev_attempts", "studied_credits"]

ENROLLMENT_BASE_COLUMNS = [
    ENROLLMENT_KEY,
    "module_id",
    "presentation_id",
    "observed_time_weeks",
    "event",
]

ACTIVITY_COLUMNS = [
    ENROLLMENT_KEY,
    "week",
    "total_clicks_week",
    "n_vle_rows_week",
    "n_distinct_sites_week",
    "active_this_week",
]

# Weekly activity features derived on the person-period panel.
DERIVED_TEMPORAL = ["cum_clicks_until_t", "recency", "streak"]
RAW_TEMPORAL = [
    "total_clicks_week",
    "n_vle_rows_week",
    "n_distinct_sites_week",
    "active_this_week",
]

# Feature-block taxonomy used by ablation and grouped importance.
BLOCK_STATIC = "static_structural"
BLOCK_TEMPORAL = "dynamic_temporal_behavioral"
BLOCK_TIME_INDEX = "discrete_time_index"
BLOCK_EARLY_WINDOW = "early_window_behavior"
ALL_BLOCKS = [BLOCK_STATIC, BLOCK_TEMPORAL, BLOCK_TIME_INDEX, BLOCK_EARLY_WINDOW]


@dataclass
class Cohort:
    """Validated pair of enrollment and weekly-activity tables.

    Parameters
    ----------
    enrollments : pandas.DataFrame
        One row per enrollment with `ENROLLMENT_BASE_COLUMNS` plus the static
        covariate columns named in `static_categorical` / `static_numeric`.
    activity : pandas.DataFrame
        Weekly activity rows with `ACTIVITY_COLUMNS`; may be empty.
    static_categorical, static_numeric : list of str
        Static covariate roles; default to the canonical schema.
    """

    enrollments: pd.DataFrame
    activity: pd.DataFrame
    static_categorical: list = field(default_factory=lambda: list(STATIC_CATEGORICAL))
    static_numeric: list = field(default_factory=lambda: list(STATIC_NUMERIC))

    def __post_init__(self):
        self._validate()

    @property
    def static_columns(self):
        return list(self.static_categorical) + list(self.static_numeric)

    @property
    def n_enrollments(self):
        return len(self.enrollments)

    @property
    def event_rate(self):
        return float(self.enrollments["event"].mean())

    def ids(self):
        return self.enrollments[ENROLLMENT_KEY].to_numpy()

    def subset(self, ids):
        """Restrict both tables to the given enrollment ids (order preserved)."""
        ids = list(ids)
        enr = self.enrollments.set_index(ENROLLMENT_KEY).loc[ids].reset_index()
        act = self.activity[self.activity[ENROLLMENT_KEY].isin(set(ids))].reset_index(drop=True)
        return Cohort(enr, act, self.static_categorical, self.static_numeric)

    def _validate(self):
        enr, act = self.enrollments, self.activity
        for col in ENROLLMENT_BASE_COLUMNS + self.static_columns:
            if col not in enr.columns:
                raise SchemaError(f"enrollment table is missing column '{col}'")
        if enr[ENROLLMENT_KEY].duplicated().any():
            dupes = enr.loc[enr[ENROLLMENT_KEY].duplicated(), ENROLLMENT_KEY].iloc[0]
            raise DataError(f"duplicate enrollment id '{dupes}'")
        times = enr["observed_time_weeks"]
        if (times < 0).any() or not np.isfinite(times.to_numpy(dtype=float)).all():
            raise DataError("observed_time_weeks must be finite and >= 0")
        if not enr["event"].isin([0, 1]).all():
            raise DataError("event must be 0 or 1")

        if len(act):
            for col in ACTIVITY_COLUMNS:
                if col not in act.columns:
                    raise SchemaError(f"activity table is missing column '{col}'")
            if act.duplicated([ENROLLMENT_KEY, "week"]).any():
                raise DataError("duplicate (enrollment_id, week) in activity table")
            if (act["week"] < 0).any():
                raise DataError("activity weeks must be >= 0")
            for col in ["total_clicks_week", "n_vle_rows_week", "n_distinct_sites_week"]:
                bad = act.index[act[col] < 0]
                if len(bad):
                    raise DataError(f"negative {col} at activity row {bad[0]}")
            mismatch = (act["active_this_week"] == 1) != (act["n_vle_rows_week"] > 0)
            if mismatch.any():
                raise DataError("active_this_week must equal (n_vle_rows_week > 0)")
