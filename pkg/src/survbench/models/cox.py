"""Cox proportional hazards with Breslow tie handling.

The partial likelihood is accumulated over distinct event times with suffix
sums maintained in one descending pass, so heavily tied weekly data and
continuous times share the same code path. The Breslow baseline cumulative
hazard turns fitted risk scores into full survival curves on the weekly
grid, and Schoenfeld residuals support the proportional-hazards audit.
"""

import json

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import DataError
from ..validation import as_float_matrix, check_columns_match, unpack_y
from .optim import newton_solve


def _grouped(times):
    """Distinct times ascending with row slices of a stable sort."""
    order = np.argsort(times, kind="stable")
    t_sorted = times[order]
    distinct, start = np.unique(t_sorted, return_index=True)
    bounds = np.append(start, len(times))
    return order, distinct, bounds


def cox_nll_grad(beta, X, times, events, l2=0.0, hessian=False):
    """Negative penalized Breslow partial log-likelihood with derivatives.

    One descending pass over distinct observed times maintains the risk-set
    suffix sums S0, S1, S2; event times contribute d*log(S0) minus the event
    rows' linear predictors.
    """
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    n, p = X.shape
    eta = X @ beta
    shift = eta.max()
    w = np.exp(eta - shift)

    order, distinct, bounds = _grouped(np.asarray(times, dtype=float))
    events = np.asarray(events)

    nll = 0.0
    grad = np.zeros(p)
    hess = np.zeros((p, p)) if hessian else None
    s0 = 0.0
    s1 = np.zeros(p)
    s2 = np.zeros((p, p)) if hessian else None

    for k in range(len(distinct) - 1, -1, -1):
        rows = order[bounds[k]:bounds[k + 1]]
        xg = X[rows]
        wg = w[rows]
        s0 += wg.sum()
        s1 += wg @ xg
        if hessian:
            s2 += xg.T @ (xg * wg[:, None])
        ev = rows[events[rows] == 1]
        d = ev.size
        if d == 0:
            continue
        nll += d * (np.log(s0) + shift) - eta[ev].sum()
        xbar = s1 / s0
        grad += d * xbar - X[ev].sum(axis=0)
        if hessian:
            hess += d * (s2 / s0 - np.outer(xbar, xbar))

    nll += 0.5 * l2 * beta @ beta
    grad += l2 * beta
    if not hessian:
        return nll, grad
    hess += l2 * np.eye(p)
    return nll, grad, hess


class CoxPH(BaseEstimator):
    """L2-penalized Cox model emitting survival curves via Breslow baseline."""

    def __init__(self, l2=1e-4, tol=1e-6, max_iter=100):
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y, columns=None):
        X = as_float_matrix(X)
        times, events = unpack_y(y)
        if events.sum() == 0:
            raise DataError("cannot fit a Cox model with zero events")
        self.columns_ = list(columns) if columns is not None else None

        def objective(beta):
            return cox_nll_grad(beta, X, times, events, l2=self.l2, hessian=True)

        beta, info = newton_solve(objective, np.zeros(X.shape[1]), tol=self.tol,
                                  max_iter=self.max_iter, grad_scale=events.sum())
        self.coef_ = beta
        self.n_iter_ = info["n_iter"]
        self.nll_path_ = info["nll_path"]
        self._baseline(X, times, events)
        return self

    def _baseline(self, X, times, events):
        """Breslow baseline cumulative hazard increments at event times."""
        w = np.exp(X @ self.coef_)
        order, distinct, bounds = _grouped(times)
        s0 = 0.0
        increments = []
        for k in range(len(distinct) - 1, -1, -1):
            rows = order[bounds[k]:bounds[k + 1]]
            s0 += w[rows].sum()
            d = int(events[rows].sum())
            if d:
                increments.append((distinct[k], d / s0))
        increments.reverse()
        self.baseline_times_ = np.array([t for t, _ in increments])
        self.baseline_cumhaz_ = np.cumsum([v for _, v in increments])

    def baseline_cumulative_hazard(self, grid):
        idx = np.searchsorted(self.baseline_times_, np.asarray(grid, dtype=float),
                              side="right")
        padded = np.concatenate([[0.0], self.baseline_cumhaz_])
        return padded[idx]

    def predict_risk_score(self, X, columns=None):
        if columns is not None and self.columns_ is not None:
            check_columns_match(self.columns_, columns, "CoxPH")
        return as_float_matrix(X) @ self.coef_

    def predict_survival(self, X, grid, columns=None):
        """S(t | x) = exp(-Lambda0(t) * exp(x' beta)) on the given grid."""
        scores = np.exp(self.predict_risk_score(X, columns))
        lam0 = self.baseline_cumulative_hazard(grid)
        return np.exp(-np.outer(scores, lam0))

    def to_json(self):
        return json.dumps({
            "model": "CoxPH", "link": "log-hazard-ratio", "l2": self.l2,
            "coef": self.coef_.tolist(),
            "baseline_times": self.baseline_times_.tolist(),
            "baseline_cumhaz": self.baseline_cumhaz_.tolist(),
            "columns": list(self.columns_ or []),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        state = json.loads(text)
        model = cls(l2=state["l2"])
        model.coef_ = np.asarray(state["coef"])
        model.baseline_times_ = np.asarray(state["baseline_times"])
        model.baseline_cumhaz_ = np.asarray(state["baseline_cumhaz"])
        model.columns_ = state["columns"] or None
        return model


def schoenfeld_residuals(model, X, times, events):
    """Schoenfeld residuals at event rows plus the mean risk-set covariance.

    Returns (event_times, residuals, vbar): one residual row per event in
    ascending time order, and the average over events of the weighted
    covariance of covariates over the risk set.
    """
    X = as_float_matrix(X)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=int)
    w = np.exp(X @ model.coef_)
    order, distinct, bounds = _grouped(times)
    p = X.shape[1]

    s0, s1, s2 = 0.0, np.zeros(p), np.zeros((p, p))
    rows_out, resid_out, vsum = [], [], np.zeros((p, p))
    for k in range(len(distinct) - 1, -1, -1):
        rows = order[bounds[k]:bounds[k + 1]]
        xg = X[rows]
        wg = w[rows]
        s0 += wg.sum()
        s1 += wg @ xg
        s2 += xg.T @ (xg * wg[:, None])
        ev = rows[events[rows] == 1]
        if ev.size == 0:
            continue
        xbar = s1 / s0
        vmat = s2 / s0 - np.outer(xbar, xbar)
        for i in ev:
            rows_out.append(distinct[k])
            resid_out.append(X[i] - xbar)
            vsum += vmat

    m = len(rows_out)
    if m == 0:
        raise DataError("no events: Schoenfeld residuals undefined")
    event_times = np.array(rows_out)[::-1]
    residuals = np.array(resid_out)[::-1]
    return event_times, residuals, vsum / m
