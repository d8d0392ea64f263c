"""Post-benchmark audit layers.

* no-refit bootstrap of metric values and model ranks over frozen predictions,
* feature-block ablation with preprocessing refit per variant,
* grouped permutation importance over design columns and blocks,
* proportional-hazards audit of a fitted Cox model via scaled Schoenfeld
  residuals against Kaplan-Meier-transformed event time.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps
from sklearn.base import clone

from .cohort import BLOCK_STATIC
from .curves import SurvivalCurves
from .errors import DataError, EvaluationError
from .families import ARM_COMPARABLE, TEMPORAL_BLOCK
from .metrics import (
    METRIC_TDC,
    antolini_concordance,
    brier_ipcw,
    higher_is_better,
    integrated_brier,
    km_censoring,
    km_survival,
)
from .validation import check_survival_target

MAX_REDRAWS_PER_RESAMPLE = 10


def _evaluate_subset(curves_by_model, times, events, metrics, tau_max, idx=None):
    """All requested metrics for every model on one (re)sampled index set."""
    if idx is not None:
        times, events = times[idx], events[idx]
    censoring = km_censoring(times, events)
    out = {}
    for name, curves in curves_by_model.items():
        sub = curves if idx is None else curves.take(idx)
        vals = {}
        for metric in metrics:
            if metric == "ibs":
                vals[metric] = integrated_brier(sub, times, events, censoring, tau_max)
            elif metric == METRIC_TDC:
                vals[metric] = antolini_concordance(sub, times, events)
            elif metric.startswith("brier@"):
                vals[metric] = brier_ipcw(sub, times, events,
                                          int(metric.split("@")[1]), censoring)
            else:
                raise EvaluationError(f"unknown bootstrap metric '{metric}'")
        out[name] = vals
    return out


def _rank1(values_by_model, metric):
    """Winning model under the metric direction; ties break lexicographically."""
    sign = -1.0 if higher_is_better(metric) else 1.0
    return min(values_by_model, key=lambda m: (sign * values_by_model[m][metric], m))


@dataclass
class BootstrapResult:
    models: list
    metrics: list
    point: dict        # (model, metric) -> float
    lower: dict
    upper: dict
    rank1_share: dict  # (model, metric) -> float
    n_resamples: int
    seed: int
    redraws: int

    def rows(self):
        for model in self.models:
            for metric in self.metrics:
                key = (model, metric)
                yield {
                    "model": model, "metric": metric,
                    "point": self.point[key],
                    "ci_lower": self.lower[key], "ci_upper": self.upper[key],
                    "rank1_share": self.rank1_share[key],
                }


def bootstrap_ranks(curves_by_model, times, events, metrics, n_resamples=200,
                    seed=0, tau_max=None, rng=None):
    """Resample enrollments over frozen predictions; never refits models.

    Each resample recomputes the censoring estimator and every metric for
    every model. Resamples with zero events (or a degenerate censoring
    estimate) are redrawn, up to ten attempts each. Rank-1 ties break by
    lexicographic model name.
    """
    names = sorted(curves_by_model)
    first = curves_by_model[names[0]]
    times, events = check_survival_target(times, events, n=first.n)
    tau = first.tau_max if tau_max is None else int(tau_max)
    rng = np.random.default_rng(seed) if rng is None else rng
    n = first.n

    point = _evaluate_subset(curves_by_model, times, events, metrics, tau)
    samples = {(m, k): [] for m in names for k in metrics}
    wins = {(m, k): 0 for m in names for k in metrics}
    redraws = 0

    for _ in range(n_resamples):
        for _attempt in range(MAX_REDRAWS_PER_RESAMPLE):
            idx = rng.integers(0, n, n)
            if events[idx].sum() == 0:
                redraws += 1
                continue
            try:
                vals = _evaluate_subset(curves_by_model, times, events, metrics, tau, idx)
            except EvaluationError:
                redraws += 1
                continue
            break
        else:
            raise EvaluationError("bootstrap: too many degenerate resamples")
        for metric in metrics:
            wins[(_rank1(vals, metric), metric)] += 1
            for m in names:
                samples[(m, metric)].append(vals[m][metric])

    lower, upper, share = {}, {}, {}
    for key, vals in samples.items():
        arr = np.asarray(vals)
        lower[key] = float(np.percentile(arr, 2.5))
        upper[key] = float(np.percentile(arr, 97.5))
        share[key] = wins[key] / n_resamples
    flat_point = {(m, k): point[m][k] for m in names for k in metrics}
    return BootstrapResult(models=names, metrics=list(metrics), point=flat_point,
                           lower=lower, upper=upper, rank1_share=share,
                           n_resamples=n_resamples, seed=seed, redraws=redraws)


@dataclass
class AblationRow:
    model: str
    arm: str
    removed_block: str
    delta_ibs: float  # nan for the dynamic arm (concordance evidence only)
    delta_td: float


@dataclass
class AblationResult:
    rows: list
    ibs_ratio: dict  # model -> delta temporal / delta static (comparable arm)


def _fit_eval_family(family, arm_data, encoder, params, seed, with_ibs):
    fitted = family.fit(arm_data, encoder, params=params, seed=seed)
    design = fitted.encoder.transform(arm_data.test_design_frame)
    curves = fitted.predict_curves(design, arm_data.test_ids)
    td = antolini_concordance(curves, arm_data.test_times, arm_data.test_events)
    ibs = np.nan
    if with_ibs:
        censoring = km_censoring(arm_data.test_times, arm_data.test_events)
        ibs = integrated_brier(curves, arm_data.test_times, arm_data.test_events,
                               censoring, arm_data.grid[-1])
    return ibs, td


def run_ablation(family, arm_data, encoder, params=None, seed=0, blocks=None):
    """Refit one family with each feature block removed in turn.

    Preprocessing is refit per variant (the column set changes); model
    hyperparameters stay fixed. The comparable arm is scored with IBS and
    time-dependent concordance, the dynamic arm with concordance only. The
    IBS ratio divides the temporal-block IBS increase by the static one.
    """
    arm = family.arm
    with_ibs = arm == ARM_COMPARABLE
    blocks = list(blocks) if blocks is not None else [BLOCK_STATIC, TEMPORAL_BLOCK[arm]]
    full_ibs, full_td = _fit_eval_family(family, arm_data, clone(encoder),
                                         params, seed, with_ibs)
    rows = []
    deltas = {}
    for block in blocks:
        reduced = clone(encoder).without_block(block)
        abl_ibs, abl_td = _fit_eval_family(family, arm_data, reduced,
                                           params, seed, with_ibs)
        row = AblationRow(model=family.name, arm=arm, removed_block=block,
                          delta_ibs=abl_ibs - full_ibs if with_ibs else np.nan,
                          delta_td=abl_td - full_td)
        rows.append(row)
        deltas[block] = row.delta_ibs
    ratios = {}
    if with_ibs and BLOCK_STATIC in deltas and TEMPORAL_BLOCK[arm] in deltas:
        static_delta = deltas[BLOCK_STATIC]
        ratios[family.name] = (deltas[TEMPORAL_BLOCK[arm]] / static_delta
                               if static_delta != 0 else np.nan)
    return AblationResult(rows=rows, ibs_ratio=ratios)


@dataclass
class ImportanceResult:
    model: str
    arm: str
    metric: str
    features: dict       # column -> (mean degradation, std over repeats)
    blocks: dict         # block tag -> (mean degradation, std over repeats)
    dominant_block: str
    top_feature: str
    n_repeats: int
    seed: int

    def rows(self):
        for kind, table in (("feature", self.features), ("block", self.blocks)):
            for name, (mean, std) in table.items():
                yield {"model": self.model, "arm": self.arm, "metric": self.metric,
                       "kind": kind, "name": name,
                       "mean_degradation": mean, "std_degradation": std}


def grouped_permutation_importance(fitted, design, times, events,
                                   metric=METRIC_TDC, n_repeats=10, seed=0,
                                   rng=None):
    """Mean metric degradation from permuting columns and whole blocks.

    Each column (and each block of columns, jointly) is permuted across rows
    ``n_repeats`` times; degradation is signed so that positive means worse.
    The dominant block has the largest mean joint degradation.
    """
    times, events = check_survival_target(times, events)
    rng = np.random.default_rng(seed) if rng is None else rng
    censoring = km_censoring(times, events)
    tau = int(fitted.grid[-1])

    def score(X):
        curves = SurvivalCurves(ids=np.arange(len(times)), grid=fitted.grid,
                                values=fitted.curves_from_design(X))
        if metric == METRIC_TDC:
            return antolini_concordance(curves, times, events)
        if metric == "ibs":
            return integrated_brier(curves, times, events, censoring, tau)
        if metric.startswith("brier@"):
            return brier_ipcw(curves, times, events, int(metric.split("@")[1]), censoring)
        raise EvaluationError(f"unknown importance metric '{metric}'")

    base = score(design.X)
    sign = 1.0 if higher_is_better(metric) else -1.0
    work = design.X.copy()
    n_rows = work.shape[0]

    def degradations(cols):
        saved = work[:, cols].copy()
        out = np.empty(n_repeats)
        for k in range(n_repeats):
            perm = rng.permutation(n_rows)
            work[:, cols] = saved[perm]
            out[k] = sign * (base - score(work))
        work[:, cols] = saved
        return float(out.mean()), float(out.std())

    features = {}
    for j, name in enumerate(design.columns):
        features[name] = degradations([j])
    blocks = {}
    for tag in sorted(set(design.blocks)):
        blocks[tag] = degradations(design.block_indices(tag))

    dominant = max(blocks, key=lambda t: blocks[t][0])
    top = max(features, key=lambda c: features[c][0])
    return ImportanceResult(model=fitted.name, arm=fitted.arm, metric=metric,
                            features=features, blocks=blocks,
                            dominant_block=dominant, top_feature=top,
                            n_repeats=n_repeats, seed=seed)


PH_LABEL_CLEAN = "clean"
PH_LABEL_LOCALIZED = "localized_departure"
PH_LABEL_BROAD = "broad_departure"


@dataclass
class PHAuditResult:
    columns: list
    statistics: np.ndarray
    pvalues: np.ndarray
    flagged: np.ndarray
    alpha: float
    label: str
    n_events: int
    flagged_fraction: float = field(init=False)

    def __post_init__(self):
        self.flagged_fraction = float(self.flagged.mean()) if len(self.flagged) else 0.0

    def rows(self):
        for j, col in enumerate(self.columns):
            yield {"column": col, "statistic": float(self.statistics[j]),
                   "p_value": float(self.pvalues[j]), "flagged": bool(self.flagged[j])}


def classify_ph(flagged_fraction):
    """Global label: <5% clean, 5-20% localized departure, >=20% broad."""
    if flagged_fraction < 0.05:
        return PH_LABEL_CLEAN
    if flagged_fraction < 0.20:
        return PH_LABEL_LOCALIZED
    return PH_LABEL_BROAD


def ph_audit(cox_model, X, times, events, alpha=0.05, columns=None):
    """Score-type test of Schoenfeld residual trend against transformed time.

    Per covariate, correlates the V-scaled Schoenfeld residuals with the
    centered Kaplan-Meier transform of event time; the squared standardized
    sum is referred to a chi-square with one degree of freedom.
    """
    from .models.cox import schoenfeld_residuals

    times, events = check_survival_target(times, events)
    m = int(events.sum())
    if m < 3:
        raise DataError("PH audit needs at least 3 events")
    event_times, resid, vbar = schoenfeld_residuals(cox_model, X, times, events)

    km = km_survival(times, events)
    g = 1.0 - km.at(event_times)
    c = g - g.mean()
    css = float(c @ c)
    if css <= 0:
        raise DataError("degenerate time transform: all events at one time")

    vinv = np.linalg.pinv(vbar)
    scaled = resid @ vinv
    u = scaled.T @ c
    denom = css * np.clip(np.diag(vinv), 1e-300, None)
    statistics = u ** 2 / denom
    pvalues = sps.chi2.sf(statistics, df=1)
    flagged = pvalues < alpha

    p = X.shape[1]
    cols = list(columns) if columns is not None else [f"x{j}" for j in range(p)]
    result = PHAuditResult(columns=cols, statistics=statistics, pvalues=pvalues,
                           flagged=flagged, alpha=alpha, label="", n_events=m)
    result.label = classify_ph(result.flagged_fraction)
    return result
