import pandas as pd
from hypothesis import given, settings
from hypothesis import strategies as st

from survbench.cohort import Cohort
from survbench.features import (
    build_evaluation_panel,
    compute_early_window,
    expand_person_period,
)

def single_enrollment_cohort(active_weeks, observed, event, clicks=None):
    enrollments = pd.DataFrame({
        "enrollment_id": ["e1"], "module_id": ["M"], "presentation_id": ["P"],
        "observed_time_weeks": [observed], "event": [event],
        "group": ["A"], "flag": ["no"],
        "baseline_score": [0.0], "prior_attempts": [0.0],
    })
    weeks = sorted(active_weeks)
    clicks = clicks if clicks is not None else [1] * len(weeks)
    activity = pd.DataFrame({
        "enrollment_id": ["e1"] * len(weeks), "week": weeks,
        "total_clicks_week": clicks,
        "n_vle_rows_week": [1] * len(weeks),
        "n_distinct_sites_week": [1] * len(weeks),
        "active_this_week": [1] * len(weeks),
    })
    return Cohort(enrollments, activity,
                  static_categorical=["group", "flag"],
                  static_numeric=["baseline_score", "prior_attempts"])


class TestPanelExpansion:
    def test_recency_and_streak_hand_example(self):
        cohort = single_enrollment_cohort({0, 1, 3}, observed=4, event=0)
        panel = expand_person_period(cohort)
        assert list(panel.week) == [0, 1, 2, 3, 4]
        assert list(panel.recency) == [0, 0, 1, 0, 1]
        assert list(panel.streak) == [1, 2, 0, 1, 0]

    def test_never_active_recency_is_week_plus_one(self):
        cohort = single_enrollment_cohort(set(), observed=2, event=0)
        panel = expand_person_period(cohort)
        assert list(panel.recency) == [1, 2, 3]
        assert list(panel.streak) == [0, 0, 0]
        assert list(panel.cum_clicks_until_t) == [0, 0, 0]

    def test_event_at_week_zero_single_labelled_row(self):
        cohort = single_enrollment_cohort({0}, observed=0, event=1)
        panel = expand_person_period(cohort)
        assert len(panel) == 1
        assert list(panel.hazard_label) == [1]

    def test_row_count_and_label_invariants(self, cohort3):
        panel = expand_person_period(cohort3)
        expected = int((cohort3.enrollments.observed_time_weeks + 1).sum())
        assert len(panel) == expected
        assert int(panel.hazard_label.sum()) == int(cohort3.enrollments.event.sum())
        per_id = panel.groupby("enrollment_id").week.agg(["min", "max", "count"])
        assert (per_id["min"] == 0).all()
        assert (per_id["count"] == per_id["max"] + 1).all()

    def test_cum_clicks_non_decreasing(self, cohort3):
        panel = expand_person_period(cohort3)
        for _, group in panel.groupby("enrollment_id"):
            assert (group.cum_clicks_until_t.diff().dropna() >= 0).all()

    def test_post_window_activity_dropped(self):
        cohort = single_enrollment_cohort({0, 1, 3}, observed=2, event=1)
        panel = expand_person_period(cohort)
        assert len(panel) == 3
        assert list(panel.total_clicks_week) == [1, 1, 0]

    @settings(max_examples=40, deadline=None)
    @given(active=st.sets(st.integers(0, 9)), observed=st.integers(0, 9))
    def test_recency_streak_match_naive_backward_scan(self, active, observed):
        cohort = single_enrollment_cohort(active, observed=observed, event=0)
        panel = expand_person_period(cohort)
        active_kept = {w for w in active if w <= observed}
        for t in range(observed + 1):
            if t in active_kept:
                naive_recency = 0
            else:
                earlier = [w for w in active_kept if w < t]
                naive_recency = t - max(earlier) if earlier else t + 1
            run = 0
            w = t
            while w in active_kept:
                run += 1
                w -= 1
            assert panel.recency.iloc[t] == naive_recency
            assert panel.streak.iloc[t] == run


class TestEvaluationPanel:
    def test_extends_with_continued_inactivity(self):
        cohort = single_enrollment_cohort({0, 1}, observed=1, event=1, clicks=[4, 2])
        panel = build_evaluation_panel(cohort, tau_max=4)
        assert list(panel.week) == [0, 1, 2, 3, 4]
        assert list(panel.total_clicks_week) == [4, 2, 0, 0, 0]
        assert list(panel.cum_clicks_until_t) == [4, 6, 6, 6, 6]
        assert list(panel.recency) == [0, 0, 1, 2, 3]
        assert list(panel.streak) == [1, 2, 0, 0, 0]


class TestEarlyWindow:
    def test_hand_sums_window_four(self):
        cohort = single_enrollment_cohort({0, 2}, observed=5, event=0, clicks=[5, 7])
        summary = compute_early_window(cohort, 4).iloc[0]
        assert summary.clicks_first_w == 12
        assert summary.active_weeks_first_w == 2
        assert summary.mean_clicks_first_w == 6.0

    def test_window_two_on_same_clicks(self):
        cohort = single_enrollment_cohort({0, 2}, observed=5, event=0, clicks=[5, 7])
        summary = compute_early_window(cohort, 2).iloc[0]
        assert summary.clicks_first_w == 5
        assert summary.active_weeks_first_w == 1
        assert summary.mean_clicks_first_w == 5.0

    def test_never_active_zero_case(self):
        cohort = single_enrollment_cohort(set(), observed=5, event=0)
        summary = compute_early_window(cohort, 4).iloc[0]
        assert summary.clicks_first_w == 0
        assert summary.active_weeks_first_w == 0
        assert summary.mean_clicks_first_w == 0.0

    @settings(max_examples=25, deadline=None)
    @given(extra_week=st.integers(4, 9), extra_clicks=st.integers(1, 50))
    def test_invariant_to_activity_at_or_beyond_window(self, extra_week, extra_clicks):
        base = single_enrollment_cohort({0, 2}, observed=9, event=0, clicks=[5, 7])
        summary_before = compute_early_window(base, 4).iloc[0]
        extra = pd.DataFrame({
            "enrollment_id": ["e1"], "week": [extra_week],
            "total_clicks_week": [extra_clicks], "n_vle_rows_week": [1],
            "n_distinct_sites_week": [1], "active_this_week": [1],
        })
        activity = pd.concat([base.activity[base.activity.week != extra_week], extra],
                             ignore_index=True)
        modified = Cohort(base.enrollments, activity,
                          static_categorical=["group", "flag"],
                          static_numeric=["baseline_score", "prior_attempts"])
        summary_after = compute_early_window(modified, 4).iloc[0]
        for col in ["clicks_first_w", "active_weeks_first_w", "mean_clicks_first_w"]:
            assert summary_before[col] == summary_after[col]
