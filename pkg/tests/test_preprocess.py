import numpy as np
import pandas as pd
import pytest

from survbench.errors import DataError, SchemaError
from survbench.preprocess import MISSING, CovariateEncoder


def make_encoder():
    return CovariateEncoder(
        numeric=["score"], categorical=["cat"],
        blocks={"score": "static_structural", "cat": "static_structural"},
        id_col="rid")


def frame(scores, cats, rids=None):
    rids = rids if rids is not None else [f"r{i}" for i in range(len(scores))]
    return pd.DataFrame({"rid": rids, "score": scores, "cat": cats})


class TestFit:
    def test_median_ignores_missing(self):
        enc = make_encoder().fit(frame([1.0, 3.0, np.nan], ["A", "B", None]))
        assert enc.medians_["score"] == 2.0

    def test_categories_sorted_with_missing_appended(self):
        enc = make_encoder().fit(frame([1, 2, 3], ["B", "A", None]))
        assert enc.categories_["cat"] == ["A", "B", MISSING]
        assert [c for c in enc.columns_ if c.startswith("cat=")] == [
            "cat=A", "cat=B", f"cat={MISSING}"]

    def test_all_missing_numeric_gets_zero_median(self, caplog):
        enc = make_encoder().fit(frame([np.nan, np.nan], ["A", "B"]))
        assert enc.medians_["score"] == 0.0

    def test_empty_input_is_error(self):
        with pytest.raises(DataError):
            make_encoder().fit(frame([], []))

    def test_constant_column_standardizes_to_zero(self):
        enc = make_encoder().fit(frame([2.0, 2.0, 2.0], ["A", "A", "B"]))
        design = enc.transform(frame([2.0, 2.0], ["A", "B"]))
        assert np.allclose(design.X[:, 0], 0.0)


class TestTransform:
    def test_unseen_category_encodes_all_zeros(self):
        enc = make_encoder().fit(frame([1, 2], ["A", "B"]))
        design = enc.transform(frame([1.0], ["C"]))
        cat_cols = [i for i, c in enumerate(design.columns) if c.startswith("cat=")]
        assert np.allclose(design.X[0, cat_cols], 0.0)

    def test_train_rows_standardize_to_unit_moments(self):
        rng = np.random.default_rng(3)
        train = frame(rng.normal(2, 5, 200), ["A"] * 200)
        enc = make_encoder().fit(train)
        X = enc.transform(train).X
        assert abs(X[:, 0].mean()) < 1e-9
        assert abs(X[:, 0].std() - 1.0) < 1e-9

    def test_missing_numeric_uses_train_median_not_test_median(self):
        enc = make_encoder().fit(frame([0.0, 10.0, 20.0], ["A", "A", "A"]))
        test = frame([100.0, 100.0, np.nan], ["A", "A", "A"])
        X = enc.transform(test).X
        imputed = X[2, 0] * max(enc.stds_["score"], 1e-8) + enc.means_["score"]
        assert imputed == pytest.approx(10.0)

    def test_missing_category_maps_to_missing_column(self):
        enc = make_encoder().fit(frame([1, 2], ["A", None]))
        design = enc.transform(frame([1.0], [None]))
        j = design.column_index(f"cat={MISSING}")
        assert design.X[0, j] == 1.0

    def test_absent_column_is_schema_error(self):
        enc = make_encoder().fit(frame([1, 2], ["A", "B"]))
        with pytest.raises(SchemaError, match="score"):
            enc.transform(pd.DataFrame({"rid": ["r0"], "cat": ["A"]}))

    def test_layout_idempotence(self):
        enc = make_encoder().fit(frame([1, 2, 3], ["A", "B", "A"]))
        test = frame([4, 5], ["B", "C"])
        a = enc.transform(test)
        b = enc.transform(test)
        assert a.columns == b.columns
        assert np.array_equal(a.X, b.X)

    def test_fit_statistics_immune_to_test_rows(self):
        train = frame([1.0, 2.0, 3.0], ["A", "B", "A"])
        enc = make_encoder().fit(train)
        stats = (dict(enc.medians_), dict(enc.means_), dict(enc.stds_),
                 {k: list(v) for k, v in enc.categories_.items()})
        enc.transform(frame([999.0], ["Z"]))
        assert stats == (enc.medians_, enc.means_, enc.stds_,
                         {k: list(v) for k, v in enc.categories_.items()})


class TestBlocks:
    def test_block_tags_partition_columns(self):
        enc = CovariateEncoder(
            numeric=["a", "b"], categorical=["c"], passthrough=["week"],
            blocks={"a": "static_structural", "b": "early_window_behavior",
                    "c": "static_structural", "week": "discrete_time_index"},
            id_col="rid")
        train = pd.DataFrame({"rid": [1, 2], "a": [1.0, 2.0], "b": [0.0, 1.0],
                              "c": ["x", "y"], "week": [0, 1]})
        design = enc.fit(train).transform(train)
        assert len(design.blocks) == len(design.columns)
        tagged = set()
        for tag in set(design.blocks):
            idx = design.block_indices(tag)
            assert not (tagged & set(idx))
            tagged |= set(idx)
        assert tagged == set(range(len(design.columns)))

    def test_without_block_removes_sources(self):
        enc = CovariateEncoder(
            numeric=["a", "b"], categorical=["c"],
            blocks={"a": "static_structural", "b": "early_window_behavior",
                    "c": "static_structural"}, id_col="rid")
        reduced = enc.without_block("static_structural")
        assert reduced.numeric == ["b"]
        assert reduced.categorical == []

    def test_without_last_block_is_error(self):
        enc = CovariateEncoder(numeric=["a"], blocks={"a": "static_structural"})
        with pytest.raises(DataError):
            enc.without_block("static_structural")


def test_json_roundtrip():
    enc = make_encoder().fit(frame([1.0, 2.0, np.nan], ["A", None, "B"]))
    restored = CovariateEncoder.from_json(enc.to_json())
    test = frame([np.nan, 5.0], [None, "C"])
    assert np.array_equal(enc.transform(test).X, restored.transform(test).X)
    assert restored.columns_ == enc.columns_
