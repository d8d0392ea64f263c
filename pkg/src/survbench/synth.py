"""Synthetic cohorts with analytically known hazards.

The weekly generator emits the same two tables as real ingestion, so the
entire pipeline can be exercised end-to-end while the true per-enrollment
weekly hazards (and hence true survival curves) stay available in closed
form. Two continuous-time generators support the proportional-hazards model
oracles: one PH-true, one with an effect that reverses sign at a switch time.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .cohort import ACTIVITY_COLUMNS, ENROLLMENT_KEY, Cohort
from .errors import ConfigError

STATIC_CATEGORICAL = ["group", "flag"]
STATIC_NUMERIC = ["baseline_score", "prior_attempts"]


@dataclass
class SyntheticSpec:
    """Declarative description of a weekly synthetic cohort.

    The ground-truth weekly hazard is ``link(intercept + sum coef * feature)``
    where features may reference the week index, static covariates
    (categorical levels as ``"group=B"``), current-week activity features, or
    the latent ``engagement`` score that drives activity intensity.
    """

    n: int = 1000
    max_weeks: int = 34
    hazard_intercept: float = -4.6
    hazard_coefs: dict = field(default_factory=dict)
    link: str = "logistic"
    censor_hazard: float = 0.0
    activity_intercept: float = 0.2
    activity_scale: float = 1.2
    clicks_log_mu: float = 1.6
    clicks_scale: float = 0.5
    trailing_weeks: int = 0

    def to_dict(self):
        return {
            "n": self.n, "max_weeks": self.max_weeks,
            "hazard_intercept": self.hazard_intercept,
            "hazard_coefs": dict(self.hazard_coefs), "link": self.link,
            "censor_hazard": self.censor_hazard,
            "activity_intercept": self.activity_intercept,
            "activity_scale": self.activity_scale,
            "clicks_log_mu": self.clicks_log_mu,
            "clicks_scale": self.clicks_scale,
            "trailing_weeks": self.trailing_weeks,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class SyntheticTruth:
    """Ground truth backing a generated cohort, aligned to enrollment order."""

    ids: np.ndarray
    hazards: np.ndarray   # (n, max_weeks + 1) true weekly hazards
    survival: np.ndarray  # (n, max_weeks + 1) true S(t) = P(T > t)

    def risk_at(self, horizon):
        return 1.0 - self.survival[:, int(horizon)]


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _feature_matrix(name, week_grid, statics, activity_paths, engagement, n):
    """Resolve a hazard-coefficient feature name to an (n, W+1) matrix."""
    W1 = week_grid.size
    if name == "week":
        return np.tile(week_grid.astype(float), (n, 1))
    if name == "engagement":
        return np.tile(engagement[:, None], (1, W1))
    if name in activity_paths:
        return activity_paths[name]
    if "=" in name:
        col, level = name.split("=", 1)
        if col not in statics:
            raise ConfigError(f"unknown categorical '{col}' in hazard_coefs")
        ind = (statics[col].astype(str) == level).astype(float).to_numpy()
        return np.tile(ind[:, None], (1, W1))
    if name in statics:
        vals = statics[name].to_numpy(dtype=float)
        return np.tile(vals[:, None], (1, W1))
    raise ConfigError(f"unknown hazard feature '{name}'")


def generate_cohort(spec, seed):
    """Simulate a weekly cohort under ``spec``; deterministic under ``seed``.

    Returns
    -------
    (Cohort, SyntheticTruth)
        The cohort carries the same table schema as real ingestion. The truth
        object holds the per-enrollment hazard and survival matrices over
        weeks 0..max_weeks computed from the simulated activity paths.
    """
    rng = np.random.default_rng(seed)
    n, W = spec.n, int(spec.max_weeks)
    week_grid = np.arange(W + 1)

    ids = np.array([f"S{i:06d}" for i in range(n)])
    statics = pd.DataFrame({
        ENROLLMENT_KEY: ids,
        "module_id": rng.choice(["M0", "M1", "M2"], size=n, p=[0.5, 0.3, 0.2]),
        "presentation_id": rng.choice(["P0", "P1"], size=n),
        "group": rng.choice(["A", "B", "C"], size=n, p=[0.5, 0.3, 0.2]),
        "flag": rng.choice(["no", "yes"], size=n, p=[0.7, 0.3]),
        "baseline_score": rng.normal(size=n),
        "prior_attempts": rng.poisson(0.4, size=n).astype(float),
    })
    engagement = rng.normal(size=n)

    # Weekly activity paths simulated for the full horizon.
    propensity = _sigmoid(spec.activity_intercept + spec.activity_scale * engagement)
    active = (rng.random((n, W + 1)) < propensity[:, None]).astype(float)
    click_mu = np.exp(spec.clicks_log_mu + spec.clicks_scale * engagement)
    clicks = active * rng.poisson(np.tile(click_mu[:, None], (1, W + 1)))
    rows = active * (1 + rng.poisson(2.0, size=(n, W + 1)))
    sites = np.minimum(rows, 1 + rng.poisson(1.0, size=(n, W + 1)))

    cum_clicks = np.cumsum(clicks, axis=1)
    week_b = np.tile(week_grid, (n, 1)).astype(float)
    last_active = np.where(active == 1, week_b, -np.inf)
    last_active = np.maximum.accumulate(last_active, axis=1)
    recency = np.where(np.isneginf(last_active), week_b + 1, week_b - last_active)
    streak = np.zeros_like(active)
    for t in range(W + 1):
        prev = streak[:, t - 1] if t else 0.0
        streak[:, t] = active[:, t] * (prev + 1)

    activity_paths = {
        "active_this_week": active, "total_clicks_week": clicks,
        "n_vle_rows_week": rows, "n_distinct_sites_week": sites,
        "cum_clicks_until_t": cum_clicks, "recency": recency, "streak": streak,
    }

    eta = np.full((n, W + 1), float(spec.hazard_intercept))
    for name, coef in spec.hazard_coefs.items():
        eta += coef * _feature_matrix(name, week_grid, statics, activity_paths, engagement, n)
    if spec.link == "logistic":
        hazards = _sigmoid(eta)
    elif spec.link == "identity":
        hazards = eta
    else:
        raise ConfigError(f"unknown link '{spec.link}'")
    if np.any(hazards < 0) or np.any(hazards > 1):
        raise ConfigError("spec produces hazards outside [0, 1]")

    survival = np.cumprod(1.0 - hazards, axis=1)

    # Event fires before the censoring draw within a week; administrative
    # censoring applies at max_weeks when neither process fired.
    u_event = rng.random((n, W + 1))
    u_cens = rng.random((n, W + 1))
    ev_hit = u_event < hazards
    cn_hit = u_cens < spec.censor_hazard
    t_event = np.where(ev_hit.any(axis=1), ev_hit.argmax(axis=1), W + 1)
    t_cens = np.where(cn_hit.any(axis=1), cn_hit.argmax(axis=1), W + 1)
    event = (t_event <= t_cens) & (t_event <= W)
    observed = np.where(event, t_event, np.minimum(t_cens, W)).astype(int)

    enrollments = statics.copy()
    enrollments.insert(3, "observed_time_weeks", observed)
    enrollments.insert(4, "event", event.astype(int))

    horizon = observed + spec.trailing_weeks
    mask = (active == 1) & (week_b <= horizon[:, None])
    idx_enr, idx_week = np.nonzero(mask)
    activity = pd.DataFrame({
        ENROLLMENT_KEY: ids[idx_enr],
        "week": idx_week,
        "total_clicks_week": clicks[idx_enr, idx_week].astype(int),
        "n_vle_rows_week": rows[idx_enr, idx_week].astype(int),
        "n_distinct_sites_week": sites[idx_enr, idx_week].astype(int),
        "active_this_week": 1,
    })[ACTIVITY_COLUMNS]

    cohort = Cohort(enrollments, activity,
                    static_categorical=list(STATIC_CATEGORICAL),
                    static_numeric=list(STATIC_NUMERIC))
    truth = SyntheticTruth(ids=ids, hazards=hazards, survival=survival)
    return cohort, truth


def default_benchmark_spec(n=5000, max_weeks=34):
    """Canonical synthetic benchmark: temporal signal dominant, mild statics."""
    return SyntheticSpec(
        n=n,
        max_weeks=max_weeks,
        hazard_intercept=-4.4,
        hazard_coefs={
            "week": 0.01,
            "baseline_score": 0.22,
            "group=B": 0.15,
            "group=C": 0.3,
            "flag=yes": 0.12,
            "active_this_week": -0.9,
            "recency": 0.1,
            "total_clicks_week": -0.01,
        },
        censor_hazard=0.01,
    )


def ph_cohort(n, beta, seed, baseline_rate=0.08, censor_rate=0.04):
    """Continuous-time proportional-hazards sample with known coefficients.

    Event times are exponential with rate ``baseline_rate * exp(x @ beta)``
    and censoring is an independent exponential. Returns (X, times, events).
    """
    rng = np.random.default_rng(seed)
    beta = np.asarray(beta, dtype=float)
    X = rng.normal(size=(n, beta.size))
    rates = baseline_rate * np.exp(X @ beta)
    t_event = rng.exponential(1.0 / rates)
    if censor_rate > 0:
        t_cens = rng.exponential(1.0 / censor_rate, size=n)
    else:
        t_cens = np.full(n, np.inf)
    times = np.minimum(t_event, t_cens)
    events = (t_event <= t_cens).astype(int)
    return X, times, events


def sign_switch_cohort(n, seed, effect=1.0, switch_time=8.0,
                       baseline_rate=0.08, censor_rate=0.02):
    """Non-PH sample: a single covariate whose effect flips sign at a time.

    Hazard is ``baseline_rate * exp(+effect * x)`` before ``switch_time`` and
    ``baseline_rate * exp(-effect * x)`` after it, simulated by inverting the
    piecewise cumulative hazard. Returns (X, times, events).
    """
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    r1 = baseline_rate * np.exp(effect * x)
    r2 = baseline_rate * np.exp(-effect * x)
    u = rng.random(n)
    target = -np.log(u)
    h1 = r1 * switch_time
    t_event = np.where(target < h1, target / r1, switch_time + (target - h1) / r2)
    if censor_rate > 0:
        t_cens = rng.exponential(1.0 / censor_rate, size=n)
    else:
        t_cens = np.full(n, np.inf)
    times = np.minimum(t_event, t_cens)
    events = (t_event <= t_cens).astype(int)
    return x[:, None], times, events
