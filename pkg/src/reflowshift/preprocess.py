"""Dataset container, cleaning, correlation filtering and standardization.

Cleaning is two-stage: rows with any missing (non-finite) field are
dropped, then rows whose targets fall outside a per-target IQR fence are
removed.  Feature screening keeps features whose tie-aware Spearman
correlation with the target clears a threshold; it is fit per target and,
inside cross-validation, on training rows only.  Standardization is a
plain z-score whose parameters likewise come from training rows only;
it feeds the SVR and NN learners, while the forest consumes raw features
(split points are scale-equivariant).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDataset, LengthMismatch, NoFeaturesLeft

TARGET_NAMES = ("shift_x", "shift_y", "shift_rot")
META_NAMES = ("board_id", "combination_id", "replicate_id", "component_type", "size_class")

DEFAULT_OUTLIER_FENCE = 3.0
DEFAULT_SPEARMAN_TAU = 0.02

_CONST_STD = 1e-12


@dataclass
class Dataset:
    """Feature matrix, target matrix and row metadata, all row-aligned.

    Targets may contain NaN before cleaning (missing post-reflow
    measurements); after ``drop_missing`` everything is finite.
    """

    features: np.ndarray           # (n, n_features) float64
    targets: np.ndarray            # (n, 3) float64, NaN = missing
    feature_names: list[str]
    meta: dict[str, np.ndarray]    # keys META_NAMES, each length n

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        n = self.features.shape[0]
        if self.features.ndim != 2 or self.features.shape[1] != len(self.feature_names):
            raise ValueError("feature matrix does not match feature names")
        if self.targets.shape != (n, len(TARGET_NAMES)):
            raise ValueError(f"target matrix must be (n, {len(TARGET_NAMES)})")
        for key in META_NAMES:
            if key not in self.meta or len(self.meta[key]) != n:
                raise ValueError(f"meta column {key!r} missing or wrong length")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(
            self.features[idx],
            self.targets[idx],
            list(self.feature_names),
            {k: np.asarray(v)[idx] for k, v in self.meta.items()},
        )

    def type_labels(self) -> np.ndarray:
        """Component group labels like 'C1005' / 'R0402'."""
        return np.array([
            f"{t}{s}" for t, s in zip(self.meta["component_type"], self.meta["size_class"])
        ])


def drop_missing(dataset: Dataset) -> tuple[Dataset, int]:
    """Remove rows with any non-finite feature or target; report the count."""
    ok = np.isfinite(dataset.features).all(axis=1) & np.isfinite(dataset.targets).all(axis=1)
    removed = int((~ok).sum())
    if not ok.any():
        raise EmptyDataset("no complete rows left after removing missing records")
    return dataset.subset(np.nonzero(ok)[0]), removed


def remove_outliers(dataset: Dataset, k: float = DEFAULT_OUTLIER_FENCE) -> tuple[Dataset, int]:
    """Drop rows with any target outside [Q1 - k*IQR, Q3 + k*IQR].

    Quartiles are computed per target over the incoming rows (linear
    interpolation); the fence never widens for the surviving rows, so the
    pass is single-shot and deterministic.
    """
    if dataset.n == 0:
        raise EmptyDataset("cannot remove outliers from an empty dataset")
    q1 = np.percentile(dataset.targets, 25.0, axis=0)
    q3 = np.percentile(dataset.targets, 75.0, axis=0)
    iqr = q3 - q1
    lo, hi = q1 - k * iqr, q3 + k * iqr
    ok = ((dataset.targets >= lo) & (dataset.targets <= hi)).all(axis=1)
    removed = int((~ok).sum())
    if not ok.any():
        raise EmptyDataset("outlier fence removed every row")
    return dataset.subset(np.nonzero(ok)[0]), removed


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """Midranks: tied values share the average of their positions (1-based)."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    xs = x[order]
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Tie-aware Spearman correlation: Pearson correlation of midranks.

    Returns 0 when either input is constant.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"got shapes {x.shape} and {y.shape}")
    if len(x) < 3:
        raise LengthMismatch("need at least 3 observations")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt((rx * rx).sum() * (ry * ry).sum())
    if denom == 0.0:
        return 0.0
    return float((rx * ry).sum() / denom)


@dataclass
class FeatureSelection:
    """Result of the correlation screen for one target."""

    kept: list[int]
    dropped: list[int]
    correlations: np.ndarray  # per original feature
    threshold: float

    def kept_names(self, feature_names) -> list[str]:
        return [feature_names[i] for i in self.kept]

    def dropped_names(self, feature_names) -> list[str]:
        return [feature_names[i] for i in self.dropped]


def select_features(dataset: Dataset, target_index: int,
                    tau: float = DEFAULT_SPEARMAN_TAU) -> FeatureSelection:
    """Keep features whose |spearman(feature, target)| >= tau."""
    if dataset.n == 0:
        raise EmptyDataset("cannot screen features on an empty dataset")
    if not (0.0 <= tau < 1.0):
        raise ValueError(f"threshold must be in [0, 1), got {tau}")
    y = dataset.targets[:, target_index]
    corr = np.array([
        spearman(dataset.features[:, j], y) for j in range(len(dataset.feature_names))
    ])
    kept = [j for j in range(len(corr)) if abs(corr[j]) >= tau]
    dropped = [j for j in range(len(corr)) if abs(corr[j]) < tau]
    if not kept:
        raise NoFeaturesLeft(f"threshold {tau} dropped all {len(corr)} features")
    return FeatureSelection(kept, dropped, corr, tau)


@dataclass
class Scaler:
    """Per-column z-score parameters fit on training rows only."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        safe = np.where(self.std < _CONST_STD, 1.0, self.std)
        inv = np.where(self.std < _CONST_STD, 0.0, 1.0 / safe)
        return (X - self.mean) * inv

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=np.float64) * self.std + self.mean

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Scaler":
        return cls(np.asarray(obj["mean"], dtype=np.float64),
                   np.asarray(obj["std"], dtype=np.float64))


def fit_scaler(X: np.ndarray) -> Scaler:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("scaler needs a non-empty 2-D matrix")
    return Scaler(X.mean(axis=0), X.std(axis=0))


def apply_scaler(scaler: Scaler, X: np.ndarray) -> np.ndarray:
    return scaler.transform(X)
