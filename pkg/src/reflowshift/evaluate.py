"""K-fold cross-validation harness for the three learner families.

The protocol per fold: the correlation screen and (for SVR/NN) the
feature and target z-scores are fit on the training split only, then the
model trains and is scored as fitness R^2 on the training rows and RMSE
on the held-out rows (the complementary pair is recorded too, labeled as
diagnostics).  Fold aggregates are the mean and population standard
deviation over folds; the per-component-type table pools every fold's
test predictions and computes RMSE within each type/size group.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConstantActual, LengthMismatch, TooFewRows
from .nn import NnConfig, NnModel, predict_nn, train_nn
from .preprocess import (
    DEFAULT_SPEARMAN_TAU,
    Dataset,
    fit_scaler,
    select_features,
)
from .rfr import RfrModel, predict_rfr, train_rfr
from .svr import SvrModel, predict_svr, train_svr

TARGET_INDEX = {"shift_x": 0, "shift_y": 1, "shift_rot": 2}
FAMILIES = ("svr", "nn", "rfr")


@dataclass
class SvrParams:
    C: float = 1.0
    epsilon: float = 0.1
    tol: float = 1e-4
    max_iter: int = 100_000


@dataclass
class RfrParams:
    n_trees: int = 1000
    feature_fraction: float = 1.0 / 3.0
    per_node_subsets: bool = False


def default_params(family: str):
    if family == "svr":
        return SvrParams()
    if family == "nn":
        return NnConfig()
    if family == "rfr":
        return RfrParams()
    raise ValueError(f"unknown model family {family!r}")


def kfold_indices(n: int, k: int = 10, seed: int = 0) -> list[np.ndarray]:
    """Seeded shuffle split into k folds with sizes differing by at most 1."""
    if k < 2:
        raise ValueError("need at least 2 folds")
    if n < k:
        raise TooFewRows(f"cannot split {n} rows into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    base = n // k
    extra = n % k
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(np.sort(perm[start:start + size]))
        start += size
    return folds


def stratified_kfold_indices(labels, k: int = 10, seed: int = 0) -> list[np.ndarray]:
    """Fold split balanced over the given group labels."""
    labels = np.asarray(labels)
    n = len(labels)
    if n < k:
        raise TooFewRows(f"cannot split {n} rows into {k} folds")
    rng = np.random.default_rng(seed)
    buckets: list[list[int]] = [[] for _ in range(k)]
    cursor = 0
    for value in sorted(set(labels.tolist())):
        rows = np.nonzero(labels == value)[0]
        rows = rows[rng.permutation(len(rows))]
        for r in rows:
            buckets[cursor % k].append(int(r))
            cursor += 1
    return [np.sort(np.array(b, dtype=int)) for b in buckets]


def rmse(pred, actual) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape or pred.size == 0:
        raise LengthMismatch(f"pred {pred.shape} vs actual {actual.shape}")
    return float(np.sqrt(((pred - actual) ** 2).mean()))


def r2(pred, actual) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape or pred.size == 0:
        raise LengthMismatch(f"pred {pred.shape} vs actual {actual.shape}")
    denom = ((actual - actual.mean()) ** 2).sum()
    if denom == 0.0:
        raise ConstantActual("R^2 is undefined for constant actuals")
    return float(1.0 - ((pred - actual) ** 2).sum() / denom)


def per_type_rmse(type_labels, actual, pred) -> dict[str, float]:
    """RMSE within each component type/size group; absent groups omitted."""
    type_labels = np.asarray(type_labels)
    out: dict[str, float] = {}
    for label in sorted(set(type_labels.tolist())):
        mask = type_labels == label
        if mask.any():
            out[str(label)] = rmse(np.asarray(pred)[mask], np.asarray(actual)[mask])
    return out


@dataclass
class FoldMetrics:
    fold: int
    n_train: int
    n_test: int
    train_r2: float
    test_rmse: float
    train_rmse: float  # diagnostic extension
    test_r2: float     # diagnostic extension
    kept_features: list[str]


@dataclass
class CvReport:
    """Per-fold metrics plus aggregates and the per-type breakdown."""

    model: str
    target: str
    k: int
    seed: int
    tau: float
    params: dict
    folds: list[FoldMetrics]
    aggregates: dict
    per_type: dict[str, float]
    predictions: np.ndarray = field(repr=False)  # pooled test predictions by row
    actuals: np.ndarray = field(repr=False)
    fold_of_row: np.ndarray = field(repr=False)

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "target": self.target,
            "folds_k": self.k,
            "seed": self.seed,
            "spearman_tau": self.tau,
            "params": self.params,
            "folds": [asdict(f) for f in self.folds],
            "aggregates": self.aggregates,
            "per_type_test_rmse": self.per_type,
        }


def aggregate_folds(folds: list[FoldMetrics]) -> dict:
    """Mean and population standard deviation of each fold metric."""
    out = {}
    for name in ("train_r2", "test_rmse", "train_rmse", "test_r2"):
        vals = np.array([getattr(f, name) for f in folds], dtype=np.float64)
        out[name] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


def _model_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence((seed, fold)).generate_state(1)[0])


def fit_model(family: str, X: np.ndarray, y: np.ndarray, params=None,
              seed: int = 0, n_jobs: int = 1):
    """Train one model; SVR/NN standardize features and targets internally."""
    params = params if params is not None else default_params(family)
    if family == "svr":
        scaler = fit_scaler(X)
        center, scale = float(y.mean()), float(y.std())
        if scale < 1e-12:
            scale = 1.0
        model = train_svr(scaler.transform(X), (y - center) / scale,
                          C=params.C, epsilon=params.epsilon,
                          tol=params.tol, max_iter=params.max_iter)
        model.feature_scaler = scaler
        model.target_center = center
        model.target_scale = scale
        return model
    if family == "nn":
        scaler = fit_scaler(X)
        center, scale = float(y.mean()), float(y.std())
        if scale < 1e-12:
            scale = 1.0
        cfg = replace(params, seed=seed)
        model = train_nn(scaler.transform(X), (y - center) / scale, cfg)
        model.feature_scaler = scaler
        model.target_center = center
        model.target_scale = scale
        return model
    if family == "rfr":
        return train_rfr(X, y, n_trees=params.n_trees,
                         feature_fraction=params.feature_fraction,
                         seed=seed, n_jobs=n_jobs,
                         per_node_subsets=params.per_node_subsets)
    raise ValueError(f"unknown model family {family!r}")


def predict_model(model, X: np.ndarray):
    if isinstance(model, SvrModel):
        return predict_svr(model, X)
    if isinstance(model, NnModel):
        return predict_nn(model, X)
    if isinstance(model, RfrModel):
        return predict_rfr(model, X)
    raise ValueError(f"unknown model object {type(model).__name__}")


def cross_validate(dataset: Dataset, family: str, target: str, params=None,
                   k: int = 10, seed: int = 0, tau: float = DEFAULT_SPEARMAN_TAU,
                   n_jobs: int = 1, stratify: bool = False) -> CvReport:
    """Run the fold protocol for one model family and one target."""
    t_idx = TARGET_INDEX[target]
    params = params if params is not None else default_params(family)
    if stratify:
        folds = stratified_kfold_indices(dataset.type_labels(), k=k, seed=seed)
    else:
        folds = kfold_indices(dataset.n, k=k, seed=seed)

    y_all = dataset.targets[:, t_idx]
    pooled_pred = np.full(dataset.n, np.nan)
    fold_of_row = np.full(dataset.n, -1, dtype=int)
    metrics: list[FoldMetrics] = []

    for fold_id, test_idx in enumerate(folds):
        train_mask = np.ones(dataset.n, dtype=bool)
        train_mask[test_idx] = False
        train_idx = np.nonzero(train_mask)[0]

        train_ds = dataset.subset(train_idx)
        selection = select_features(train_ds, t_idx, tau=tau)
        kept = selection.kept
        X_train = dataset.features[np.ix_(train_idx, kept)]
        X_test = dataset.features[np.ix_(test_idx, kept)]
        y_train = y_all[train_idx]
        y_test = y_all[test_idx]

        model = fit_model(family, X_train, y_train, params,
                          seed=_model_seed(seed, fold_id), n_jobs=n_jobs)
        train_pred = predict_model(model, X_train)
        test_pred = predict_model(model, X_test)

        pooled_pred[test_idx] = test_pred
        fold_of_row[test_idx] = fold_id
        metrics.append(FoldMetrics(
            fold=fold_id,
            n_train=len(train_idx),
            n_test=len(test_idx),
            train_r2=r2(train_pred, y_train),
            test_rmse=rmse(test_pred, y_test),
            train_rmse=rmse(train_pred, y_train),
            test_r2=r2(test_pred, y_test),
            kept_features=selection.kept_names(dataset.feature_names),
        ))

    report = CvReport(
        model=family,
        target=target,
        k=k,
        seed=seed,
        tau=tau,
        params={key: value for key, value in asdict(params).items()},
        folds=metrics,
        aggregates=aggregate_folds(metrics),
        per_type=per_type_rmse(dataset.type_labels(), y_all, pooled_pred),
        predictions=pooled_pred,
        actuals=y_all.copy(),
        fold_of_row=fold_of_row,
    )
    return report
