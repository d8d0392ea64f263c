"""Person-period expansion and early-window summaries.

The person-period panel holds one row per enrollment per week from week 0 up
to the event or censoring week. Raw weekly activity is joined in (zeros where
no activity row exists) and three derived features are computed per row:

* ``cum_clicks_until_t`` - running click total over the expanding window,
* ``recency`` - weeks since the last active week (0 when active this week,
  t+1 when never active),
* ``streak`` - length of the current uninterrupted active run (0 if inactive).
"""

import logging

import numpy as np
import pandas as pd

from .cohort import DERIVED_TEMPORAL, ENROLLMENT_KEY, RAW_TEMPORAL
from .errors import DataError

logger = logging.getLogger(__name__)

PANEL_LABEL = "hazard_label"


def drop_post_window_activity(cohort):
    """Remove activity rows from weeks after each enrollment's observed time.

    Real logs contain trailing rows after unregistration; they must not leak
    into any feature, so they are dropped with a logged count.
    """
    act = cohort.activity
    if len(act) == 0:
        return act
    limits = cohort.enrollments.set_index(ENROLLMENT_KEY)["observed_time_weeks"]
    limit = act[ENROLLMENT_KEY].map(limits).to_numpy()
    keep = act["week"].to_numpy() <= limit
    n_dropped = int((~keep).sum())
    if n_dropped:
        logger.info("dropped %d post-window activity rows", n_dropped)
    return act[keep].reset_index(drop=True)


def _panel_frame(cohort, end_weeks):
    """Expand enrollments into weekly rows 0..end_week and derive features."""
    enr = cohort.enrollments
    ids = enr[ENROLLMENT_KEY].to_numpy()
    lengths = end_weeks + 1
    row_ids = np.repeat(ids, lengths)
    weeks = np.concatenate([np.arange(n) for n in lengths]) if len(lengths) else np.array([], dtype=int)

    panel = pd.DataFrame({ENROLLMENT_KEY: row_ids, "week": weeks})
    static = enr[[ENROLLMENT_KEY] + cohort.static_columns]
    panel = panel.merge(static, on=ENROLLMENT_KEY, how="left")

    activity = drop_post_window_activity(cohort)
    if len(activity):
        panel = panel.merge(activity, on=[ENROLLMENT_KEY, "week"], how="left")
    else:
        for col in RAW_TEMPORAL:
            panel[col] = 0.0
    for col in RAW_TEMPORAL:
        panel[col] = panel[col].fillna(0).astype(float)

    grp = panel.groupby(ENROLLMENT_KEY, sort=False)
    panel["cum_clicks_until_t"] = grp["total_clicks_week"].cumsum()

    active = panel["active_this_week"]
    week_if_active = panel["week"].where(active == 1)
    last_active = week_if_active.groupby(panel[ENROLLMENT_KEY], sort=False).ffill()
    panel["recency"] = (panel["week"] - last_active).fillna(panel["week"] + 1).astype(float)

    run_key = (active == 0).groupby(panel[ENROLLMENT_KEY], sort=False).cumsum()
    panel["streak"] = active.groupby([panel[ENROLLMENT_KEY], run_key], sort=False).cumsum().astype(float)
    return panel


def expand_person_period(cohort):
    """Build the training panel: weeks 0..observed_time per enrollment.

    The hazard label is 1 on the event week of an event enrollment and 0
    everywhere else.
    """
    enr = cohort.enrollments
    end_weeks = enr["observed_time_weeks"].to_numpy(dtype=int)
    if np.any(end_weeks < 0):
        raise DataError("observed_time_weeks must be >= 0")
    panel = _panel_frame(cohort, end_weeks)
    final = enr.set_index(ENROLLMENT_KEY)
    t_end = panel[ENROLLMENT_KEY].map(final["observed_time_weeks"])
    is_event = panel[ENROLLMENT_KEY].map(final["event"])
    panel[PANEL_LABEL] = ((panel["week"] == t_end) & (is_event == 1)).astype(int)
    return panel


def build_evaluation_panel(cohort, tau_max):
    """Build the prediction panel: weeks 0..tau_max for every enrollment.

    Weeks past the observed window carry the continued-inactivity convention:
    zero activity, frozen cumulative clicks, growing recency, zero streak.
    That falls out of the shared derivation because post-window activity rows
    are dropped before feature computation.
    """
    n = cohort.n_enrollments
    end_weeks = np.full(n, int(tau_max), dtype=int)
    return _panel_frame(cohort, end_weeks)


def panel_feature_columns(cohort):
    """Column roles for the dynamic-arm panel design."""
    return {
        "categorical": list(cohort.static_categorical),
        "numeric": list(cohort.static_numeric) + RAW_TEMPORAL + DERIVED_TEMPORAL,
        "week": "week",
    }


def compute_early_window(cohort, window_weeks):
    """Aggregate weeks 0..window_weeks-1 into enrollment-level summaries.

    Returns a frame with one row per enrollment: ``clicks_first_w``,
    ``active_weeks_first_w`` and ``mean_clicks_first_w`` (clicks per active
    week, 0 when never active). Only weeks strictly below the window boundary
    contribute.
    """
    w = int(window_weeks)
    if w < 1:
        raise DataError("early window must be >= 1 week")
    activity = drop_post_window_activity(cohort)
    early = activity[activity["week"] < w]
    agg = early.groupby(ENROLLMENT_KEY).agg(
        clicks_first_w=("total_clicks_week", "sum"),
        active_weeks_first_w=("active_this_week", "sum"),
    )
    out = cohort.enrollments[[ENROLLMENT_KEY]].merge(
        agg, on=ENROLLMENT_KEY, how="left").fillna(0)
    out["clicks_first_w"] = out["clicks_first_w"].astype(float)
    out["active_weeks_first_w"] = out["active_weeks_first_w"].astype(float)
    active = out["active_weeks_first_w"].to_numpy()
    clicks = out["clicks_first_w"].to_numpy()
    out["mean_clicks_first_w"] = np.divide(
        clicks, active, out=np.zeros_like(clicks, dtype=float), where=active > 0)
    out["window_weeks"] = w
    return out


EARLY_WINDOW_FEATURES = ["clicks_first_w", "active_weeks_first_w", "mean_clicks_first_w"]


def comparable_table(cohort, window_weeks):
    """Enrollment-level frame for the comparable arm: statics + early window."""
    early = compute_early_window(cohort, window_weeks)
    cols = [ENROLLMENT_KEY] + EARLY_WINDOW_FEATURES
    table = cohort.enrollments.merge(early[cols], on=ENROLLMENT_KEY, how="left")
    return table
