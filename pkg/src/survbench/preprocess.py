"""Fit-on-train-only preprocessing into tagged numeric design matrices.

`CovariateEncoder` follows the sklearn transformer contract: `fit` learns
imputation medians, standardization moments and category vocabularies from
training rows only, and `transform` applies them to any row set, producing a
`DesignMatrix` whose columns carry feature-block tags. Unknown categories at
transform time encode as all-zero one-hot blocks.
"""

import json
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DataError, SchemaError

logger = logging.getLogger(__name__)

MISSING = "<missing>"


@dataclass
class DesignMatrix:
    """Dense numeric matrix with row ids, column names and block tags."""

    ids: np.ndarray
    X: np.ndarray
    columns: list
    blocks: list

    @property
    def shape(self):
        return self.X.shape

    def column_index(self, name):
        try:
            return self.columns.index(name)
        except ValueError:
            raise SchemaError(f"design matrix has no column '{name}'") from None

    def block_indices(self, tag):
        return [i for i, b in enumerate(self.blocks) if b == tag]

    def to_frame(self):
        frame = pd.DataFrame(self.X, columns=self.columns)
        frame.insert(0, "row_id", self.ids)
        return frame


class CovariateEncoder(BaseEstimator, TransformerMixin):
    """Median-impute, one-hot encode and standardize tabular covariates.

    Parameters
    ----------
    numeric : sequence of str
        Columns imputed with the training median and standardized to zero
        mean, unit variance (std floored at ``std_floor``).
    categorical : sequence of str
        Columns one-hot encoded over the lexicographically sorted training
        vocabulary plus a reserved missing category.
    passthrough : sequence of str
        Columns copied through untouched (the discrete week index).
    blocks : dict
        Feature-block tag per source column; every output column inherits the
        tag of its source.
    id_col : str
        Row-identifier column copied into the design matrix.
    """

    def __init__(self, numeric=(), categorical=(), passthrough=(),
                 blocks=None, id_col="enrollment_id", std_floor=1e-8):
        self.numeric = numeric
        self.categorical = categorical
        self.passthrough = passthrough
        self.blocks = blocks
        self.id_col = id_col
        self.std_floor = std_floor

    def _source_columns(self):
        return list(self.numeric) + list(self.categorical) + list(self.passthrough)

    def _block_tags(self):
        return dict(self.blocks or {})

    def fit(self, frame, y=None):
        if len(frame) == 0:
            raise DataError("cannot fit a preprocessing plan on zero rows")
        tags = self._block_tags()
        for col in self._source_columns():
            if col not in frame.columns:
                raise SchemaError(f"fit frame is missing column '{col}'")
            if col not in tags:
                raise SchemaError(f"no feature-block tag declared for column '{col}'")

        self.medians_, self.means_, self.stds_ = {}, {}, {}
        for col in list(self.numeric):
            vals = pd.to_numeric(frame[col], errors="coerce").to_numpy(dtype=float)
            ok = vals[np.isfinite(vals)]
            if ok.size == 0:
                logger.warning("numeric column '%s' is all-missing; median set to 0", col)
                self.medians_[col], self.means_[col], self.stds_[col] = 0.0, 0.0, 0.0
            else:
                self.medians_[col] = float(np.median(ok))
                self.means_[col] = float(ok.mean())
                self.stds_[col] = float(ok.std())

        self.categories_ = {}
        for col in list(self.categorical):
            vals = frame[col]
            seen = sorted({str(v) for v in vals[~pd.isna(vals)]})
            self.categories_[col] = seen + [MISSING]

        columns, out_tags = [], []
        for col in list(self.numeric):
            columns.append(col)
            out_tags.append(tags[col])
        for col in list(self.categorical):
            for level in self.categories_[col]:
                columns.append(f"{col}={level}")
                out_tags.append(tags[col])
        for col in list(self.passthrough):
            columns.append(col)
            out_tags.append(tags[col])
        self.columns_ = columns
        self.block_tags_ = out_tags
        return self

    def transform(self, frame):
        if not hasattr(self, "columns_"):
            raise SchemaError("encoder must be fitted before transform")
        for col in self._source_columns():
            if col not in frame.columns:
                raise SchemaError(f"column '{col}' present at fit but absent at apply")

        n = len(frame)
        parts = []
        for col in list(self.numeric):
            vals = pd.to_numeric(frame[col], errors="coerce").to_numpy(dtype=float)
            vals = np.where(np.isfinite(vals), vals, self.medians_[col])
            denom = max(self.stds_[col], self.std_floor)
            parts.append(((vals - self.means_[col]) / denom)[:, None])
        for col in list(self.categorical):
            raw = frame[col]
            labels = np.where(pd.isna(raw), MISSING, raw.astype(str))
            levels = self.categories_[col]
            block = np.zeros((n, len(levels)))
            index = {lvl: j for j, lvl in enumerate(levels)}
            hits = np.array([index.get(lbl, -1) for lbl in labels])
            rows = np.nonzero(hits >= 0)[0]
            block[rows, hits[rows]] = 1.0
            parts.append(block)
        for col in list(self.passthrough):
            vals = pd.to_numeric(frame[col], errors="coerce").to_numpy(dtype=float)
            if not np.isfinite(vals).all():
                raise DataError(f"passthrough column '{col}' contains missing values")
            parts.append(vals[:, None])

        X = np.hstack(parts) if parts else np.zeros((n, 0))
        ids = frame[self.id_col].to_numpy() if self.id_col in frame.columns else np.arange(n)
        return DesignMatrix(ids=ids, X=X, columns=list(self.columns_),
                            blocks=list(self.block_tags_))

    def without_block(self, tag):
        """Unfitted copy with every source column of the given block removed."""
        tags = self._block_tags()
        keep = {c for c, t in tags.items() if t != tag}
        kept_sources = [c for c in self._source_columns() if c in keep]
        if not kept_sources:
            raise DataError(f"removing block '{tag}' would empty the design matrix")
        return CovariateEncoder(
            numeric=[c for c in self.numeric if c in keep],
            categorical=[c for c in self.categorical if c in keep],
            passthrough=[c for c in self.passthrough if c in keep],
            blocks={c: t for c, t in tags.items() if t != tag},
            id_col=self.id_col, std_floor=self.std_floor)

    def to_json(self):
        """Serialize the fitted plan for audit reproducibility."""
        return json.dumps({
            "numeric": list(self.numeric), "categorical": list(self.categorical),
            "passthrough": list(self.passthrough), "blocks": self._block_tags(),
            "id_col": self.id_col, "std_floor": self.std_floor,
            "medians": self.medians_, "means": self.means_, "stds": self.stds_,
            "categories": self.categories_, "columns": self.columns_,
            "block_tags": self.block_tags_,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        state = json.loads(text)
        enc = cls(numeric=state["numeric"], categorical=state["categorical"],
                  passthrough=state["passthrough"], blocks=state["blocks"],
                  id_col=state["id_col"], std_floor=state["std_floor"])
        enc.medians_ = state["medians"]
        enc.means_ = state["means"]
        enc.stds_ = state["stds"]
        enc.categories_ = state["categories"]
        enc.columns_ = state["columns"]
        enc.block_tags_ = state["block_tags"]
        return enc
