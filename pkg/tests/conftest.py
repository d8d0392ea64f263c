import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from survbench.cohort import Cohort


def tiny_cohort():
    """Three enrollments, one withdrawal at week 2, hand-checkable activity."""
    enrollments = pd.DataFrame({
        "enrollment_id": ["e1", "e2", "e3"],
        "module_id": ["M1", "M1", "M2"],
        "presentation_id": ["P1", "P1", "P1"],
        "observed_time_weeks": [4, 2, 3],
        "event": [0, 1, 0],
        "group": ["A", "B", "A"],
        "flag": ["no", "yes", "no"],
        "baseline_score": [0.5, -1.0, 0.2],
        "prior_attempts": [0.0, 1.0, 0.0],
    })
    activity = pd.DataFrame({
        "enrollment_id": ["e1", "e1", "e1", "e2", "e3"],
        "week": [0, 1, 3, 0, 2],
        "total_clicks_week": [5, 3, 7, 2, 4],
        "n_vle_rows_week": [2, 1, 3, 1, 2],
        "n_distinct_sites_week": [2, 1, 2, 1, 1],
        "active_this_week": [1, 1, 1, 1, 1],
    })
    return Cohort(enrollments, activity,
                  static_categorical=["group", "flag"],
                  static_numeric=["baseline_score", "prior_attempts"])


@pytest.fixture
def cohort3():
    return tiny_cohort()


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)
