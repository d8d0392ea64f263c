"""Per-enrollment survival curves on a shared weekly grid."""

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .validation import check_weekly_grid


@dataclass
class SurvivalCurves:
    """Survival probabilities S(t) = P(T > t) on integer weeks 0..tau_max."""

    ids: np.ndarray
    grid: np.ndarray
    values: np.ndarray  # shape (n, len(grid))

    def __post_init__(self):
        self.grid = check_weekly_grid(self.grid)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.size:
            raise DataError("survival values must have one column per grid week")
        if np.any(self.values < -1e-12) or np.any(self.values > 1 + 1e-12):
            raise DataError("survival values must lie in [0, 1]")
        if np.any(np.diff(self.values, axis=1) > 1e-12):
            raise DataError("survival curves must be non-increasing")
        self.values = np.clip(self.values, 0.0, 1.0)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def tau_max(self):
        return int(self.grid[-1])

    def at(self, horizon):
        """Survival column at an integer horizon on the grid."""
        horizon = int(horizon)
        if horizon < 0 or horizon > self.tau_max:
            raise DataError(f"horizon {horizon} is outside the grid 0..{self.tau_max}")
        return self.values[:, horizon]

    def risk_at(self, horizon):
        return 1.0 - self.at(horizon)

    def take(self, indices):
        """Row subset/resample keeping grid; used by bootstrap resampling."""
        return SurvivalCurves(ids=self.ids[indices], grid=self.grid,
                              values=self.values[indices])


def reconstruct_survival(ids, weekly_hazards, tau_max=None):
    """Chain weekly hazards into survival curves: S(t) = prod_{u<=t} (1 - h(u)).

    Parameters
    ----------
    ids : array of row identifiers, one per enrollment.
    weekly_hazards : (n, W+1) array
        Hazard h(t) for weeks 0..W per enrollment, each in [0, 1].
    tau_max : int, optional
        Truncate the grid to 0..tau_max (requires W >= tau_max).
    """
    h = np.asarray(weekly_hazards, dtype=float)
    if h.ndim != 2:
        raise DataError("weekly hazards must be a 2-d array")
    if np.any(h < 0) or np.any(h > 1):
        raise DataError("weekly hazards must lie in [0, 1]")
    if tau_max is not None:
        if h.shape[1] < tau_max + 1:
            raise DataError("hazards do not cover the requested grid")
        h = h[:, : tau_max + 1]
    values = np.cumprod(1.0 - h, axis=1)
    grid = np.arange(h.shape[1])
    return SurvivalCurves(ids=np.asarray(ids), grid=grid, values=values)
