"""Input validation helpers shared by estimators and metric functions."""

import numpy as np

from .errors import DataError, SchemaError


def as_float_matrix(X, name="X"):
    """Coerce to a 2-d float64 array and reject non-finite entries."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise SchemaError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise DataError(f"{name} contains NaN or infinite entries")
    return X


def check_survival_target(times, events, n=None):
    """Validate an (observed time, event indicator) pair of arrays."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events)
    if times.ndim != 1 or events.ndim != 1 or times.shape != events.shape:
        raise SchemaError("times and events must be 1-d arrays of equal length")
    if n is not None and times.shape[0] != n:
        raise SchemaError(f"expected {n} survival targets, got {times.shape[0]}")
    if times.shape[0] == 0:
        raise DataError("empty survival target")
    if np.any(times < 0):
        raise DataError("observed times must be non-negative")
    uniq = np.unique(events)
    if not np.isin(uniq, [0, 1]).all():
        raise DataError("event indicators must be 0 or 1")
    return times, events.astype(int)


def unpack_y(y):
    """Split a (n, 2) [time, event] target array into its two columns."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[1] != 2:
        raise SchemaError("y must have shape (n, 2) with columns [time, event]")
    return check_survival_target(y[:, 0], y[:, 1])


def pack_y(times, events):
    """Stack times and event indicators into the (n, 2) target layout."""
    times, events = check_survival_target(times, events)
    return np.column_stack([times, events.astype(float)])


def check_columns_match(fitted_columns, columns, context):
    """Require an identical column layout between fit and apply."""
    if columns is None:
        return
    if list(columns) != list(fitted_columns):
        raise SchemaError(
            f"{context}: column layout differs from the fitted layout "
            f"({list(columns)[:5]}... vs {list(fitted_columns)[:5]}...)"
        )


def check_weekly_grid(grid):
    """Validate a shared weekly evaluation grid 0..tau_max."""
    grid = np.asarray(grid)
    if grid.ndim != 1 or grid.size == 0:
        raise SchemaError("grid must be a non-empty 1-d array")
    if grid[0] != 0 or np.any(np.diff(grid) != 1):
        raise SchemaError("grid must be consecutive integer weeks starting at 0")
    return grid.astype(int)
