"""Dynamic-arm families fit on the person-period panel.

Both estimators carry one intercept per observed week index plus a shared
coefficient vector over the remaining design columns, everything jointly L2
penalized. Prediction for weeks beyond the fitted range reuses the last
week's intercept.
"""

import json

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator

from ..errors import DataError, SchemaError, SeparationError
from ..validation import as_float_matrix, check_columns_match
from .optim import logistic_nll_grad, newton_solve, poisson_nll_grad


class _WeeklyLinearModel(BaseEstimator):
    """Shared design handling for the weekly hazard and rate models."""

    link = None

    def __init__(self, l2=1e-4, week_col=None, tol=1e-6, max_iter=100):
        self.l2 = l2
        self.week_col = week_col
        self.tol = tol
        self.max_iter = max_iter

    def _design(self, X, fitting):
        X = as_float_matrix(X)
        if self.week_col is None:
            if fitting:
                self.week_values_ = None
            return np.hstack([np.ones((X.shape[0], 1)), X])
        weeks = X[:, self.week_col].astype(int)
        rest = np.delete(X, self.week_col, axis=1)
        if fitting:
            self.week_values_ = np.unique(weeks)
        idx = np.searchsorted(self.week_values_, weeks, side="right") - 1
        idx = np.clip(idx, 0, self.week_values_.size - 1)
        indicators = np.zeros((X.shape[0], self.week_values_.size))
        indicators[np.arange(X.shape[0]), idx] = 1.0
        return np.hstack([indicators, rest])

    def _n_intercepts(self):
        return 1 if self.week_values_ is None else self.week_values_.size

    @property
    def week_intercepts_(self):
        return self.coef_[: self._n_intercepts()]

    @property
    def beta_(self):
        return self.coef_[self._n_intercepts():]

    def _solve(self, D, y, objective):
        w0 = np.zeros(D.shape[1])
        coef, info = newton_solve(objective, w0, tol=self.tol,
                                  max_iter=self.max_iter, grad_scale=len(y))
        self.coef_ = coef
        self.n_iter_ = info["n_iter"]
        self.nll_path_ = info["nll_path"]
        return self

    def linear_predictor(self, X, columns=None):
        if columns is not None and getattr(self, "columns_", None) is not None:
            check_columns_match(self.columns_, columns, type(self).__name__)
        D = self._design(X, fitting=False)
        if D.shape[1] != self.coef_.size:
            raise SchemaError(
                f"{type(self).__name__}: design has {D.shape[1]} columns, "
                f"model was fitted with {self.coef_.size}")
        return D @ self.coef_

    def to_json(self):
        return json.dumps({
            "model": type(self).__name__,
            "link": self.link,
            "l2": self.l2,
            "week_col": self.week_col,
            "week_values": None if self.week_values_ is None else self.week_values_.tolist(),
            "coef": self.coef_.tolist(),
            "columns": list(getattr(self, "columns_", []) or []),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        state = json.loads(text)
        model = cls(l2=state["l2"], week_col=state["week_col"])
        model.week_values_ = (None if state["week_values"] is None
                              else np.asarray(state["week_values"]))
        model.coef_ = np.asarray(state["coef"])
        model.columns_ = state["columns"] or None
        return model


class DiscreteTimeHazard(_WeeklyLinearModel):
    """Linear weekly hazard model: logit h(t) = alpha_t + x' beta.

    Fit by damped Newton on the L2-penalized Bernoulli log-likelihood of the
    person-period rows; hazards are the logistic link of the linear
    predictor and always lie in (0, 1).
    """

    link = "logistic"

    def fit(self, X, y, columns=None):
        y = np.asarray(y, dtype=float)
        if not np.isin(np.unique(y), [0.0, 1.0]).all():
            raise DataError("hazard labels must be binary")
        if y.sum() == 0:
            raise DataError("cannot fit a hazard model with no event rows")
        D = self._design(X, fitting=True)
        self.columns_ = list(columns) if columns is not None else None

        def objective(w):
            return logistic_nll_grad(w, D, y, l2=self.l2, hessian=True)

        self._solve(D, y, objective)
        if self.l2 == 0:
            fitted = expit(D @ self.coef_)
            if np.abs(fitted - y).max() < 1e-4:
                raise SeparationError(
                    "perfect separation: fitted hazards saturate at the labels; "
                    "use a positive l2 penalty")
        return self

    def predict_weekly_hazard(self, X, columns=None):
        return expit(self.linear_predictor(X, columns))


class PoissonPiecewiseExponential(_WeeklyLinearModel):
    """Weekly Poisson rate model with log link and exposure offset.

    Each panel row contributes one week of exposure by default. The weekly
    hazard is derived from the fitted rate as 1 - exp(-rate), so it lies in
    [0, 1) by construction.
    """

    link = "log"

    def fit(self, X, y, exposure=None, columns=None):
        y = np.asarray(y, dtype=float)
        if np.any(y < 0):
            raise DataError("event counts must be non-negative")
        if y.sum() == 0:
            raise DataError("cannot fit a rate model with zero events")
        if exposure is None:
            exposure = np.ones_like(y)
        exposure = np.asarray(exposure, dtype=float)
        if np.any(exposure <= 0):
            raise DataError("exposures must be positive")
        D = self._design(X, fitting=True)
        self.columns_ = list(columns) if columns is not None else None

        def objective(w):
            return poisson_nll_grad(w, D, y, exposure=exposure, l2=self.l2, hessian=True)

        self._exposure_mean_ = float(exposure.mean())
        return self._solve(D, y, objective)

    def predict_weekly_rate(self, X, columns=None):
        return np.exp(self.linear_predictor(X, columns))

    def predict_weekly_hazard(self, X, columns=None):
        return 1.0 - np.exp(-self.predict_weekly_rate(X, columns))
