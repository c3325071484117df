"""Tests for the cross-validation harness and metrics."""

from __future__ import annotations

import numpy as np
import pytest
from conftest import build_dataset, linear_dataset

from reflowshift.errors import ConstantActual, LengthMismatch, TooFewRows
from reflowshift.evaluate import (
    RfrParams,
    aggregate_folds,
    cross_validate,
    kfold_indices,
    per_type_rmse,
    r2,
    rmse,
    stratified_kfold_indices,
)
from reflowshift.nn import NnConfig


def test_kfold_even_split():
    folds = kfold_indices(20, 10, seed=0)
    assert [len(f) for f in folds] == [2] * 10


def test_kfold_remainder_split():
    folds = kfold_indices(23, 10, seed=0)
    sizes = sorted(len(f) for f in folds)
    assert sizes == [2] * 7 + [3] * 3


def test_kfold_partition_property():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(10, 500))
        k = int(rng.integers(2, min(10, n) + 1))
        folds = kfold_indices(n, k, seed=int(rng.integers(1e6)))
        joined = np.concatenate(folds)
        assert len(joined) == n
        assert set(joined.tolist()) == set(range(n))


def test_kfold_too_few_rows():
    with pytest.raises(TooFewRows):
        kfold_indices(5, 10, seed=0)


def test_stratified_partition_and_balance():
    labels = np.array(["A"] * 40 + ["B"] * 23 + ["C"] * 7)
    folds = stratified_kfold_indices(labels, k=5, seed=3)
    joined = np.concatenate(folds)
    assert set(joined.tolist()) == set(range(70))
    for value, total in (("A", 40), ("B", 23), ("C", 7)):
        counts = [int((labels[f] == value).sum()) for f in folds]
        assert max(counts) - min(counts) <= 1, value


def test_rmse_and_r2_basics():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert r2([1.0, 2.0], [1.0, 2.0]) == 1.0
    actual = np.array([1.0, 2.0, 3.0])
    assert r2(np.full(3, actual.mean()), actual) == pytest.approx(0.0)
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(np.sqrt(12.5))


def test_r2_constant_actual_raises():
    with pytest.raises(ConstantActual):
        r2([1.0, 2.0], [5.0, 5.0])
    with pytest.raises(LengthMismatch):
        rmse([1.0], [1.0, 2.0])


def test_per_type_rmse_groups():
    labels = np.array(["C1005", "C1005", "R0402", "R0402"])
    actual = np.array([1.0, 2.0, 3.0, 4.0])
    pred = np.array([1.5, 2.5, 2.0, 3.0])
    table = per_type_rmse(labels, actual, pred)
    assert set(table) == {"C1005", "R0402"}
    assert table["C1005"] == pytest.approx(0.5)
    assert table["R0402"] == pytest.approx(1.0)


def test_per_type_rmse_pooled_identity():
    rng = np.random.default_rng(1)
    labels = np.array(["C1005"] * 30 + ["R0603"] * 50 + ["C0402"] * 20)
    actual = rng.normal(size=100)
    pred = actual + rng.normal(scale=0.5, size=100)
    table = per_type_rmse(labels, actual, pred)
    counts = {"C1005": 30, "R0603": 50, "C0402": 20}
    pooled = np.sqrt(sum(counts[g] * table[g] ** 2 for g in table) / 100)
    assert pooled == pytest.approx(rmse(pred, actual), abs=1e-12)


def test_cross_validate_memorizing_forest():
    rng = np.random.default_rng(2)
    ds = linear_dataset(rng, n=120)
    report = cross_validate(ds, "rfr", "shift_x",
                            RfrParams(n_trees=1, feature_fraction=1.0),
                            k=5, seed=0)
    for fold in report.folds:
        assert fold.train_r2 == pytest.approx(1.0, abs=1e-9)
    # Pooled predictions cover every row exactly once.
    assert np.all(np.isfinite(report.predictions))
    assert sorted(np.bincount(report.fold_of_row).tolist()) == [24] * 5


def test_cross_validate_aggregates_match_recomputation():
    rng = np.random.default_rng(3)
    ds = linear_dataset(rng, n=90)
    report = cross_validate(ds, "rfr", "shift_y", RfrParams(n_trees=5),
                            k=4, seed=1)
    for metric in ("train_r2", "test_rmse", "train_rmse", "test_r2"):
        vals = np.array([getattr(f, metric) for f in report.folds])
        assert report.aggregates[metric]["mean"] == pytest.approx(vals.mean(), abs=1e-12)
        assert report.aggregates[metric]["std"] == pytest.approx(vals.std(), abs=1e-12)
    rebuilt = aggregate_folds(report.folds)
    assert rebuilt == report.aggregates


def test_cross_validate_svr_and_nn_families():
    rng = np.random.default_rng(4)
    ds = linear_dataset(rng, n=160)
    svr_report = cross_validate(ds, "svr", "shift_x", k=4, seed=2)
    assert svr_report.aggregates["train_r2"]["mean"] > 0.95
    nn_report = cross_validate(ds, "nn", "shift_x",
                               NnConfig(epochs=60, batch_size=16), k=4, seed=2)
    assert nn_report.aggregates["train_r2"]["mean"] > 0.9
    assert nn_report.params["epochs"] == 60


def test_cross_validate_no_leakage_from_test_rows():
    rng = np.random.default_rng(5)
    ds = linear_dataset(rng, n=100)
    base = cross_validate(ds, "rfr", "shift_x", RfrParams(n_trees=3),
                          k=5, seed=7)
    # Corrupt one row and find the fold where it is held out.
    victim = 13
    fold_of_victim = int(base.fold_of_row[victim])
    mutated = ds.subset(np.arange(ds.n))
    mutated.features[victim] += 100.0
    mutated.targets[victim, 0] -= 500.0
    changed = cross_validate(mutated, "rfr", "shift_x", RfrParams(n_trees=3),
                             k=5, seed=7)
    same = base.folds[fold_of_victim]
    other = changed.folds[fold_of_victim]
    # Training-side artifacts of that fold are untouched by the test row.
    assert same.kept_features == other.kept_features
    assert same.train_r2 == other.train_r2
    assert same.train_rmse == other.train_rmse


def test_cross_validate_deterministic():
    rng = np.random.default_rng(6)
    ds = linear_dataset(rng, n=80)
    a = cross_validate(ds, "rfr", "shift_rot", RfrParams(n_trees=4), k=4, seed=9)
    b = cross_validate(ds, "rfr", "shift_rot", RfrParams(n_trees=4), k=4, seed=9)
    assert np.array_equal(a.predictions, b.predictions)
    assert a.to_json() == b.to_json()


def test_report_json_shape():
    rng = np.random.default_rng(7)
    ds = linear_dataset(rng, n=60)
    report = cross_validate(ds, "rfr", "shift_x", RfrParams(n_trees=2), k=3, seed=0)
    doc = report.to_json()
    assert doc["model"] == "rfr"
    assert doc["target"] == "shift_x"
    assert len(doc["folds"]) == 3
    assert set(doc["aggregates"]) == {"train_r2", "test_rmse", "train_rmse", "test_r2"}
    assert all(isinstance(v, float) for v in doc["per_type_test_rmse"].values())
