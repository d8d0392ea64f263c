"""Censoring-aware evaluation metrics on the shared weekly grid.

All metrics consume `SurvivalCurves` plus the observed (time, event) pairs of
the evaluation set. Censoring is handled by inverse-probability-of-censoring
weights from a Kaplan-Meier estimate of the censoring survival function; the
weight for an event at week T uses the estimate at the grid point strictly
before T (week-0 events use weight 1).
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, EvaluationError
from .validation import check_survival_target

logger = logging.getLogger(__name__)

BRIER_PREFIX = "brier@"
METRIC_IBS = "ibs"
METRIC_TDC = "td_concordance"

# Direction of improvement per metric family; used for ranking and
# permutation-importance degradation signs.
def higher_is_better(metric):
    return metric == METRIC_TDC


@dataclass
class CensoringEstimate:
    """Kaplan-Meier estimate of the censoring survival function G(t)."""

    times: np.ndarray   # distinct censoring times (sorted)
    values: np.ndarray  # G at those times; G is 1 before the first entry

    def at(self, t):
        """G(t) = P(C > t), right-continuous step function."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right")
        vals = np.concatenate([[1.0], self.values])
        return vals[idx]

    def at_minus(self, t):
        """G at the grid point strictly before integer week t; 1 at t = 0."""
        t = np.asarray(t, dtype=float)
        return self.at(np.maximum(t - 1, -1))


def km_censoring(times, events):
    """Estimate G(t) by Kaplan-Meier with censorings treated as the events.

    Subjects whose follow-up ends with the event of interest leave the risk
    set without contributing a censoring event.
    """
    times, events = check_survival_target(times, events)
    order = np.argsort(times, kind="stable")
    t_sorted = times[order]
    cens_sorted = 1 - events[order]

    distinct, start = np.unique(t_sorted, return_index=True)
    n = len(times)
    at_risk = n - start
    cens_counts = np.add.reduceat(cens_sorted, start)

    keep = cens_counts > 0
    factors = 1.0 - cens_counts[keep] / at_risk[keep]
    values = np.cumprod(factors)
    return CensoringEstimate(times=distinct[keep], values=values)


def km_survival(times, events):
    """Plain Kaplan-Meier estimate of the event survival function."""
    return km_censoring(times, 1 - np.asarray(events))


def brier_ipcw(curves, times, events, horizon, censoring):
    """IPCW Brier score at an integer horizon on the grid.

    Events by the horizon contribute S_hat(t)^2 weighted by 1/G(T-); subjects
    observed past the horizon contribute (1 - S_hat(t))^2 weighted by 1/G(t);
    subjects censored by the horizon contribute zero.
    """
    times, events = check_survival_target(times, events, n=curves.n)
    h = int(horizon)
    s_hat = curves.at(h)

    event_mask = (times <= h) & (events == 1)
    surv_mask = times > h

    total = np.zeros(curves.n)
    if event_mask.any():
        g_minus = censoring.at_minus(times[event_mask])
        if np.any(g_minus <= 0):
            raise EvaluationError(f"censoring estimate hits zero before horizon {h}")
        total[event_mask] = (s_hat[event_mask] ** 2) / g_minus
    if surv_mask.any():
        g_h = censoring.at(h)
        if g_h <= 0:
            raise EvaluationError(f"censoring estimate is zero at horizon {h}")
        total[surv_mask] = ((1.0 - s_hat[surv_mask]) ** 2) / g_h
    return float(total.mean())


def integrated_brier(curves, times, events, censoring, tau_max=None):
    """Trapezoid average of the IPCW Brier score over weeks 0..tau_max."""
    tau = curves.tau_max if tau_max is None else int(tau_max)
    if tau > curves.tau_max:
        raise EvaluationError("tau_max exceeds the prediction grid")
    if tau < 1:
        raise EvaluationError("tau_max must be >= 1 for an integrated score")
    scores = np.array([brier_ipcw(curves, times, events, u, censoring)
                       for u in range(tau + 1)])
    weights = np.ones(tau + 1)
    weights[0] = weights[-1] = 0.5
    return float((scores * weights).sum() / tau)


def antolini_concordance(curves, times, events):
    """Time-dependent concordance of predicted survival functions.

    A pair (i, j) is comparable when i has an event at T_i and j is observed
    strictly longer. The pair is concordant when S_i(T_i) < S_j(T_i); ties in
    predicted survival count one half. Events past the end of the prediction
    grid are evaluated at the last grid week.
    """
    times, events = check_survival_target(times, events, n=curves.n)
    t_int = times.astype(int)
    if np.any(np.abs(times - t_int) > 0):
        raise EvaluationError("concordance on the weekly grid needs integer times")
    if np.any(t_int > curves.tau_max):
        t_int = np.minimum(t_int, curves.tau_max)

    concordant = 0.0
    comparable = 0
    for week in np.unique(t_int[events == 1]):
        later = t_int > week
        n_later = int(later.sum())
        if n_later == 0:
            continue
        pool = np.sort(curves.values[later, week])
        ev_rows = (t_int == week) & (events == 1)
        s_events = curves.values[ev_rows, week]
        lo = np.searchsorted(pool, s_events, side="left")
        hi = np.searchsorted(pool, s_events, side="right")
        concordant += float(((pool.size - hi) + 0.5 * (hi - lo)).sum())
        comparable += n_later * int(ev_rows.sum())
    if comparable == 0:
        raise EvaluationError("no comparable pairs for concordance")
    return concordant / comparable


@dataclass
class CalibrationRow:
    """Reliability summary at one horizon."""

    horizon: int
    n_bins: int
    bin_sizes: np.ndarray
    mean_predicted: np.ndarray
    observed: np.ndarray
    gap: float
    slope: float
    intercept: float

    def to_dict(self):
        return {
            "horizon": self.horizon,
            "n_bins": self.n_bins,
            "bin_sizes": self.bin_sizes.tolist(),
            "mean_predicted": self.mean_predicted.tolist(),
            "observed": self.observed.tolist(),
            "gap": self.gap,
            "slope": self.slope,
            "intercept": self.intercept,
        }


def _logit(p):
    p = np.clip(p, 1e-4, 1 - 1e-4)
    return np.log(p / (1 - p))


def calibration_report(curves, times, events, horizon, censoring, n_bins=10):
    """Quantile-bin calibration at a horizon.

    Observed rates are IPCW-adjusted event fractions per bin; the gap is the
    bin-size-weighted mean absolute difference between mean predicted risk
    and observed rate. Slope and intercept come from a bin-size-weighted
    least-squares fit on the logit scale (rates clamped away from 0 and 1).
    """
    times, events = check_survival_target(times, events, n=curves.n)
    if n_bins < 1:
        raise DataError("n_bins must be >= 1")
    h = int(horizon)
    risk = curves.risk_at(h)

    edges = np.quantile(risk, np.linspace(0, 1, n_bins + 1)[1:-1])
    edges = np.unique(edges)
    bin_idx = np.searchsorted(edges, risk, side="right")
    labels = np.unique(bin_idx)
    if labels.size < n_bins:
        logger.warning("calibration at horizon %d: %d distinct-risk bins instead of %d",
                       h, labels.size, n_bins)

    event_mask = (times <= h) & (events == 1)
    weights = np.zeros(curves.n)
    if event_mask.any():
        g_minus = censoring.at_minus(times[event_mask])
        if np.any(g_minus <= 0):
            raise EvaluationError(f"censoring estimate hits zero before horizon {h}")
        weights[event_mask] = 1.0 / g_minus

    sizes, mean_pred, observed = [], [], []
    for lbl in labels:
        rows = bin_idx == lbl
        sizes.append(int(rows.sum()))
        mean_pred.append(float(risk[rows].mean()))
        observed.append(float(weights[rows].mean()))
    sizes = np.array(sizes)
    mean_pred = np.array(mean_pred)
    observed = np.array(observed)

    gap = float((sizes / sizes.sum() * np.abs(mean_pred - observed)).sum())

    x = _logit(mean_pred)
    y = _logit(observed)
    w = sizes.astype(float)
    if labels.size >= 2 and np.ptp(x) > 0:
        xbar = (w * x).sum() / w.sum()
        ybar = (w * y).sum() / w.sum()
        slope = float((w * (x - xbar) * (y - ybar)).sum() / (w * (x - xbar) ** 2).sum())
        intercept = float(ybar - slope * xbar)
    else:
        slope, intercept = float("nan"), float(y[0] - x[0]) if labels.size else float("nan")

    return CalibrationRow(horizon=h, n_bins=int(labels.size), bin_sizes=sizes,
                          mean_predicted=mean_pred, observed=observed,
                          gap=gap, slope=slope, intercept=intercept)


@dataclass
class MetricReport:
    """Per-model metric bundle on the shared horizons."""

    model: str
    arm: str
    ibs: float
    td_concordance: float
    brier: dict
    tau_max: int
    n_evaluated: int
    calibration: list = field(default_factory=list)

    def to_dict(self):
        out = {
            "model": self.model,
            "arm": self.arm,
            "ibs": self.ibs,
            "td_concordance": self.td_concordance,
            "tau_max": self.tau_max,
            "n_evaluated": self.n_evaluated,
        }
        for h, v in sorted(self.brier.items()):
            out[f"brier@{h}"] = v
        return out


def evaluate_model(name, arm, curves, times, events, horizons, tau_max,
                   censoring=None, n_bins=10, with_calibration=True):
    """Compute the full harmonized metric set for one model."""
    censoring = censoring if censoring is not None else km_censoring(times, events)
    report = MetricReport(
        model=name,
        arm=arm,
        ibs=integrated_brier(curves, times, events, censoring, tau_max),
        td_concordance=antolini_concordance(curves, times, events),
        brier={int(h): brier_ipcw(curves, times, events, h, censoring) for h in horizons},
        tau_max=int(tau_max),
        n_evaluated=curves.n,
    )
    if with_calibration:
        report.calibration = [
            calibration_report(curves, times, events, h, censoring, n_bins)
            for h in horizons
        ]
    return report


def metric_value(report, metric):
    """Look up a metric by name ('ibs', 'td_concordance', 'brier@10', ...)."""
    if metric == METRIC_IBS:
        return report.ibs
    if metric == METRIC_TDC:
        return report.td_concordance
    if metric.startswith(BRIER_PREFIX):
        return report.brier[int(metric[len(BRIER_PREFIX):])]
    raise KeyError(f"unknown metric '{metric}'")
