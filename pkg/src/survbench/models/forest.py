"""Random survival forest: log-rank splits, Nelson-Aalen leaf estimators.

Each tree grows on a bootstrap resample of enrollments. At every node a
random feature subset is scanned over quantile-based candidate thresholds
(at most ``n_thresholds`` per feature, or every observed value in exhaustive
mode) and the split with the largest standardized two-sample log-rank
statistic wins. Leaves store Nelson-Aalen cumulative-hazard step functions
of their training rows; the ensemble survival curve is the across-tree mean
of exp(-H).
"""

import json
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator

from ..errors import DataError
from ..validation import as_float_matrix, unpack_y


def _suffix_sum(a, axis):
    if axis == 0:
        return np.cumsum(a[::-1], axis=0)[::-1]
    return np.cumsum(a[:, ::-1], axis=1)[:, ::-1]


def logrank_split_scan(xs, time_idx, n_times, events, min_leaf, thresholds):
    """Standardized log-rank statistic for each candidate threshold.

    Rows are bucketed jointly by (threshold bin, time), so per-threshold
    event and at-risk tables come from two bincounts plus prefix sums.
    Invalid splits (either side below ``min_leaf`` or zero variance) return
    -inf.
    """
    m = xs.size
    bins = np.searchsorted(thresholds, xs, side="left")
    n_bins = thresholds.size + 1
    key = bins * n_times + time_idx
    cnt = np.bincount(key, minlength=n_bins * n_times).reshape(n_bins, n_times)
    ev = np.bincount(key, weights=events, minlength=n_bins * n_times).reshape(n_bins, n_times)

    left_cnt = np.cumsum(cnt, axis=0)[: thresholds.size]
    left_ev = np.cumsum(ev, axis=0)[: thresholds.size]
    m_left = left_cnt.sum(axis=1)
    valid = (m_left >= min_leaf) & (m - m_left >= min_leaf)

    at_risk = _suffix_sum(cnt.sum(axis=0), 0)
    d_total = ev.sum(axis=0)
    at_risk_left = _suffix_sum(left_cnt, 1)

    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(at_risk > 0, at_risk_left / at_risk, 0.0)
        o_minus_e = (left_ev - frac * d_total).sum(axis=1)
        tie_corr = np.where(at_risk > 1, (at_risk - d_total) / np.maximum(at_risk - 1, 1), 0.0)
        var = (d_total * frac * (1.0 - frac) * tie_corr).sum(axis=1)
    stats = np.full(thresholds.size, -np.inf)
    ok = valid & (var > 0)
    stats[ok] = np.abs(o_minus_e[ok]) / np.sqrt(var[ok])
    return stats


def _nelson_aalen(rows, time_idx, events, n_times, distinct_times):
    cnt = np.bincount(time_idx[rows], minlength=n_times)
    ev = np.bincount(time_idx[rows], weights=events[rows], minlength=n_times)
    at_risk = _suffix_sum(cnt, 0)
    has_event = ev > 0
    increments = ev[has_event] / at_risk[has_event]
    return distinct_times[has_event], np.cumsum(increments)


@dataclass
class _Tree:
    feature: list
    threshold: list
    left: list
    right: list
    leaf_slot: list
    leaves: list  # (event_times, cumhaz) pairs

    def route(self, X):
        leaf_of = np.zeros(X.shape[0], dtype=int)
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if rows.size == 0:
                continue
            if self.leaf_slot[node] >= 0:
                leaf_of[rows] = self.leaf_slot[node]
                continue
            go_left = X[rows, self.feature[node]] <= self.threshold[node]
            stack.append((self.left[node], rows[go_left]))
            stack.append((self.right[node], rows[~go_left]))
        return leaf_of

    def leaf_cumhaz(self, grid):
        grid = np.asarray(grid, dtype=float)
        out = np.zeros((len(self.leaves), grid.size))
        for j, (t, h) in enumerate(self.leaves):
            padded = np.concatenate([[0.0], h])
            out[j] = padded[np.searchsorted(t, grid, side="right")]
        return out


def _grow_tree(X, times, events, params, seed_seq):
    rng = np.random.default_rng(seed_seq)
    n, p = X.shape
    boot = rng.integers(0, n, n)
    Xb = X[boot]
    distinct_times, time_idx = np.unique(times[boot], return_inverse=True)
    ev = events[boot].astype(float)
    n_times = distinct_times.size
    n_feats = max(1, int(round(params["feature_fraction"] * p)))

    tree = _Tree([], [], [], [], [], [])

    def new_node():
        for arr in (tree.feature, tree.threshold, tree.left, tree.right, tree.leaf_slot):
            arr.append(-1)
        return len(tree.feature) - 1

    def make_leaf(node, rows):
        tree.leaf_slot[node] = len(tree.leaves)
        tree.leaves.append(_nelson_aalen(rows, time_idx, ev, n_times, distinct_times))

    def grow(node, rows, depth):
        if (depth >= params["max_depth"] or rows.size < 2 * params["min_leaf"]
                or ev[rows].sum() == 0):
            make_leaf(node, rows)
            return
        feats = rng.choice(p, size=n_feats, replace=False)
        best = (-np.inf, None, None)
        for f in feats:
            xs = Xb[rows, f]
            if params["exhaustive"]:
                thresholds = np.unique(xs)[:-1]
            else:
                # Quantile-based candidates from sorted order positions.
                xs_sorted = np.sort(xs)
                pos = (np.arange(1, params["n_thresholds"] + 1)
                       * (xs.size - 1) // (params["n_thresholds"] + 1))
                thresholds = np.unique(xs_sorted[pos])
                if thresholds.size and thresholds[-1] == xs_sorted[-1]:
                    thresholds = thresholds[:-1]
            if thresholds.size == 0:
                continue
            stats = logrank_split_scan(xs, time_idx[rows], n_times, ev[rows],
                                       params["min_leaf"], thresholds)
            k = int(np.argmax(stats))
            if stats[k] > best[0]:
                best = (stats[k], int(f), float(thresholds[k]))
        if best[1] is None or not np.isfinite(best[0]):
            make_leaf(node, rows)
            return
        _, f, thr = best
        tree.feature[node] = f
        tree.threshold[node] = thr
        go_left = Xb[rows, f] <= thr
        left_id, right_id = new_node(), new_node()
        tree.left[node] = left_id
        tree.right[node] = right_id
        grow(left_id, rows[go_left], depth + 1)
        grow(right_id, rows[~go_left], depth + 1)

    root = new_node()
    grow(root, np.arange(n), 0)
    return tree


def _grow_chunk(X, times, events, params, seed_seqs):
    return [_grow_tree(X, times, events, params, s) for s in seed_seqs]


class RandomSurvivalForest(BaseEstimator):
    """Bagged survival trees with log-rank splitting.

    Parameters
    ----------
    n_trees : int
        Ensemble size; each tree sees one bootstrap resample.
    min_leaf : int
        Minimum rows on each side of a split.
    max_depth : int
        Maximum tree depth (0 grows a single marginal-estimate stump).
    feature_fraction : float
        Share of features scanned at each node.
    n_thresholds : int
        Quantile-based candidate thresholds per feature; ignored when
        ``exhaustive`` is set.
    """

    def __init__(self, n_trees=100, min_leaf=50, max_depth=6,
                 feature_fraction=0.7, n_thresholds=32, exhaustive=False,
                 seed=0, n_jobs=1):
        self.n_trees = n_trees
        self.min_leaf = min_leaf
        self.max_depth = max_depth
        self.feature_fraction = feature_fraction
        self.n_thresholds = n_thresholds
        self.exhaustive = exhaustive
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X, y, columns=None):
        X = as_float_matrix(X)
        times, events = unpack_y(y)
        if self.n_trees < 1:
            raise DataError("n_trees must be >= 1")
        if self.min_leaf > X.shape[0]:
            raise DataError("min_leaf exceeds the number of training rows")
        self.columns_ = list(columns) if columns is not None else None
        params = {
            "min_leaf": self.min_leaf, "max_depth": self.max_depth,
            "feature_fraction": self.feature_fraction,
            "n_thresholds": self.n_thresholds, "exhaustive": self.exhaustive,
        }
        seeds = np.random.SeedSequence(self.seed).spawn(self.n_trees)
        n_jobs = self.n_jobs if self.n_jobs and self.n_jobs > 0 else 1
        if n_jobs == 1:
            self.trees_ = [_grow_tree(X, times, events, params, s) for s in seeds]
            return self
        # One task per worker; per-tree seeds keep the result independent of
        # the chunking, so any n_jobs yields identical forests.
        chunks = np.array_split(np.arange(self.n_trees), n_jobs)
        grown = Parallel(n_jobs=n_jobs)(
            delayed(_grow_chunk)(X, times, events, params, [seeds[i] for i in chunk])
            for chunk in chunks if chunk.size)
        self.trees_ = [tree for batch in grown for tree in batch]
        return self

    def predict_survival(self, X, grid):
        """Across-tree mean of exp(-Nelson-Aalen cumulative hazard)."""
        X = as_float_matrix(X)
        total = np.zeros((X.shape[0], len(grid)))
        for tree in self.trees_:
            surv = np.exp(-tree.leaf_cumhaz(grid))
            total += surv[tree.route(X)]
        return total / len(self.trees_)

    def to_json(self):
        """JSON tree dump: per tree, parallel node arrays plus leaf steps."""
        trees = [{
            "feature": t.feature, "threshold": t.threshold,
            "left": t.left, "right": t.right, "leaf_slot": t.leaf_slot,
            "leaves": [[lt.tolist(), lh.tolist()] for lt, lh in t.leaves],
        } for t in self.trees_]
        return json.dumps({"model": "RandomSurvivalForest",
                           "params": self.get_params(), "trees": trees,
                           "columns": list(self.columns_ or [])}, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        state = json.loads(text)
        model = cls(**state["params"])
        model.columns_ = state["columns"] or None
        model.trees_ = [
            _Tree(t["feature"], t["threshold"], t["left"], t["right"], t["leaf_slot"],
                  [(np.asarray(lt), np.asarray(lh)) for lt, lh in t["leaves"]])
            for t in state["trees"]]
        return model
