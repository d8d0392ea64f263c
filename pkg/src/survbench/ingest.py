"""Loaders for enrollment and weekly-activity tables.

Two entry points:

* :func:`load_cohort` reads the native two-table layout (one enrollment-info
  table, one activity table that is either already weekly or a raw day-level
  event log). Column names can be remapped via ``column_map``.
* :func:`load_oulad` assembles the same cohort from raw OULAD exports
  (studentInfo, studentRegistration, studentVle, optionally courses).

Week indices derive from day-level dates via floor(day / 7); negative
pre-start activity days clamp to week 0.
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .cohort import (
    ACTIVITY_COLUMNS,
    ENROLLMENT_BASE_COLUMNS,
    ENROLLMENT_KEY,
    STATIC_CATEGORICAL,
    STATIC_NUMERIC,
    Cohort,
)
from .errors import DataError, SchemaError

logger = logging.getLogger(__name__)

RAW_LOG_COLUMNS = [ENROLLMENT_KEY, "day", "site_id", "clicks"]


def day_to_week(days):
    """Map day offsets to week indices: floor(day/7), negatives clamp to 0."""
    days = np.asarray(days, dtype=float)
    weeks = np.floor(days / 7.0)
    return np.maximum(weeks, 0).astype(int)


def _require_columns(df, columns, table):
    for col in columns:
        if col not in df.columns:
            raise SchemaError(f"{table} table is missing required column '{col}'")


def _read_table(path):
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"table not found: {path}")
    return pd.read_csv(path)


def aggregate_daily_log(log):
    """Collapse a raw day-level event log to one row per (enrollment, week)."""
    _require_columns(log, RAW_LOG_COLUMNS, "activity")
    bad = log.index[log["clicks"] < 0]
    if len(bad):
        raise DataError(f"negative clicks at activity row {bad[0]}")
    log = log.assign(week=day_to_week(log["day"]))
    grouped = log.groupby([ENROLLMENT_KEY, "week"], sort=True)
    weekly = grouped.agg(
        total_clicks_week=("clicks", "sum"),
        n_vle_rows_week=("clicks", "size"),
        n_distinct_sites_week=("site_id", "nunique"),
    ).reset_index()
    weekly["active_this_week"] = (weekly["n_vle_rows_week"] > 0).astype(int)
    return weekly[ACTIVITY_COLUMNS]


def _finalize_activity(activity):
    if len(activity) == 0:
        return pd.DataFrame(columns=ACTIVITY_COLUMNS)
    if "day" in activity.columns and "week" not in activity.columns:
        return aggregate_daily_log(activity)
    _require_columns(activity, [ENROLLMENT_KEY, "week", "total_clicks_week"], "activity")
    activity = activity.copy()
    if "n_vle_rows_week" not in activity.columns:
        activity["n_vle_rows_week"] = (activity["total_clicks_week"] > 0).astype(int)
    if "n_distinct_sites_week" not in activity.columns:
        activity["n_distinct_sites_week"] = activity["n_vle_rows_week"].clip(upper=1)
    bad = activity.index[activity["total_clicks_week"] < 0]
    if len(bad):
        raise DataError(f"negative total_clicks_week at activity row {bad[0]}")
    if activity.duplicated([ENROLLMENT_KEY, "week"]).any():
        # Weekly tables arrive pre-aggregated; duplicate keys mean broken
        # upstream aggregation.
        raise DataError("internal error: duplicate (enrollment_id, week) after aggregation")
    activity["active_this_week"] = (activity["n_vle_rows_week"] > 0).astype(int)
    return activity[ACTIVITY_COLUMNS].sort_values([ENROLLMENT_KEY, "week"]).reset_index(drop=True)


def load_cohort(enrollment_table, activity_table, column_map=None,
                static_categorical=None, static_numeric=None):
    """Load a cohort from the native two-table layout.

    Parameters
    ----------
    enrollment_table, activity_table : path or pandas.DataFrame
        Delimited text files (UTF-8, header row) or pre-loaded frames. The
        activity table may be weekly (`week`, `total_clicks_week`, ...) or a
        raw day-level log (`day`, `site_id`, `clicks`), which is aggregated.
    column_map : dict, optional
        Mapping from source column names to the canonical names.
    static_categorical, static_numeric : list of str, optional
        Static covariate roles; default to the canonical OULAD-style schema.

    Returns
    -------
    Cohort
    """
    enr = enrollment_table if isinstance(enrollment_table, pd.DataFrame) else _read_table(enrollment_table)
    act = activity_table if isinstance(activity_table, pd.DataFrame) else _read_table(activity_table)
    if column_map:
        enr = enr.rename(columns=column_map)
        act = act.rename(columns=column_map)
    static_categorical = list(STATIC_CATEGORICAL) if static_categorical is None else list(static_categorical)
    static_numeric = list(STATIC_NUMERIC) if static_numeric is None else list(static_numeric)

    _require_columns(enr, ENROLLMENT_BASE_COLUMNS + static_categorical + static_numeric, "enrollment")
    act = _finalize_activity(act)
    known = set(enr[ENROLLMENT_KEY])
    orphan = ~act[ENROLLMENT_KEY].isin(known)
    if orphan.any():
        logger.warning("dropping %d activity rows with unknown enrollment ids", int(orphan.sum()))
        act = act[~orphan].reset_index(drop=True)
    return Cohort(enr.reset_index(drop=True), act, static_categorical, static_numeric)


def load_oulad(data_dir, negative_unregistration="exclude"):
    """Build a cohort from raw OULAD csv exports in ``data_dir``.

    Expects studentInfo.csv, studentRegistration.csv and studentVle.csv;
    courses.csv is used for censoring times when present, otherwise censored
    enrollments end at the last observed activity week of their presentation.

    An enrollment is an event when its final status is Withdrawn and a valid
    (non-negative) unregistration day exists. Withdrawn rows without a date
    are censored. Rows with a negative unregistration day are excluded and
    logged by default; pass ``negative_unregistration="clamp"`` to keep them
    as week-0 events instead.
    """
    data_dir = Path(data_dir)
    info = _read_table(data_dir / "studentInfo.csv")
    registration = _read_table(data_dir / "studentRegistration.csv")
    vle = _read_table(data_dir / "studentVle.csv")

    _require_columns(info, ["code_module", "code_presentation", "id_student", "final_result"]
                     + STATIC_CATEGORICAL + STATIC_NUMERIC, "studentInfo")
    _require_columns(registration, ["code_module", "code_presentation", "id_student",
                                    "date_unregistration"], "studentRegistration")
    _require_columns(vle, ["code_module", "code_presentation", "id_student", "id_site",
                           "date", "sum_click"], "studentVle")

    keys = ["code_module", "code_presentation", "id_student"]
    enr = info.merge(registration[keys + ["date_registration", "date_unregistration"]],
                     on=keys, how="left")

    def make_id(df):
        return (df["code_module"].astype(str) + "_" + df["code_presentation"].astype(str)
                + "_" + df["id_student"].astype(str))

    enr[ENROLLMENT_KEY] = make_id(enr)
    enr["module_id"] = enr["code_module"]
    enr["presentation_id"] = enr["code_presentation"]

    withdrawn = enr["final_result"].eq("Withdrawn")
    has_date = enr["date_unregistration"].notna()
    negative = withdrawn & has_date & (enr["date_unregistration"] < 0)
    if negative.any():
        n_bad = int(negative.sum())
        if negative_unregistration == "exclude":
            logger.warning("excluding %d enrollments with negative unregistration days", n_bad)
            enr = enr[~negative].copy()
            withdrawn = enr["final_result"].eq("Withdrawn")
            has_date = enr["date_unregistration"].notna()
        elif negative_unregistration == "clamp":
            logger.warning("clamping %d negative unregistration days to week 0", n_bad)
        else:
            raise DataError(f"unknown negative_unregistration policy '{negative_unregistration}'")

    enr["event"] = (withdrawn & has_date & (enr["date_unregistration"] >= 0)).astype(int)
    if negative_unregistration == "clamp":
        enr["event"] = (withdrawn & has_date).astype(int)

    # Censoring horizon per presentation: course length when available,
    # otherwise the last activity week seen for that presentation.
    courses_path = data_dir / "courses.csv"
    if courses_path.exists():
        courses = _read_table(courses_path)
        _require_columns(courses, ["code_module", "code_presentation",
                                   "module_presentation_length"], "courses")
        courses = courses.assign(censor_week=day_to_week(courses["module_presentation_length"]))
        enr = enr.merge(courses[["code_module", "code_presentation", "censor_week"]],
                        on=["code_module", "code_presentation"], how="left")
        if enr["censor_week"].isna().any():
            raise DataError("courses table does not cover every module-presentation")
    else:
        last_week = (vle.assign(week=day_to_week(vle["date"]))
                     .groupby(["code_module", "code_presentation"])["week"].max()
                     .rename("censor_week").reset_index())
        enr = enr.merge(last_week, on=["code_module", "code_presentation"], how="left")
        enr["censor_week"] = enr["censor_week"].fillna(0)

    event_week = day_to_week(enr["date_unregistration"].fillna(0))
    enr["observed_time_weeks"] = np.where(enr["event"] == 1, event_week,
                                          enr["censor_week"]).astype(int)

    log = pd.DataFrame({
        ENROLLMENT_KEY: make_id(vle),
        "day": vle["date"],
        "site_id": vle["id_site"],
        "clicks": vle["sum_click"],
    })
    activity = aggregate_daily_log(log)

    enrollments = enr[ENROLLMENT_BASE_COLUMNS + STATIC_CATEGORICAL + STATIC_NUMERIC]
    return load_cohort(enrollments.reset_index(drop=True), activity)


def write_cohort_tables(cohort, enrollment_path, activity_path):
    """Write the two cohort tables as delimited text for inspection."""
    cohort.enrollments.to_csv(enrollment_path, index=False, lineterminator="\n")
    cohort.activity.to_csv(activity_path, index=False, lineterminator="\n")
