"""Model families for both benchmark arms."""

from .cox import CoxPH, cox_nll_grad, schoenfeld_residuals
from .discrete_time import DiscreteTimeHazard, PoissonPiecewiseExponential
from .forest import RandomSurvivalForest
from .optim import logistic_nll_grad, newton_solve, poisson_nll_grad
from .weibull import WeibullAFT, weibull_nll_grad

__all__ = [
    "CoxPH",
    "DiscreteTimeHazard",
    "PoissonPiecewiseExponential",
    "RandomSurvivalForest",
    "WeibullAFT",
    "cox_nll_grad",
    "logistic_nll_grad",
    "newton_solve",
    "poisson_nll_grad",
    "schoenfeld_residuals",
    "weibull_nll_grad",
]
