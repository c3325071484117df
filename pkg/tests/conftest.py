"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np

from reflowshift.preprocess import Dataset

TYPE_CYCLE = [("R", "1005"), ("C", "1005"), ("R", "0603"),
              ("C", "0603"), ("R", "0402"), ("C", "0402")]


def build_dataset(features, targets) -> Dataset:
    """Dataset with synthetic meta columns cycling over the six types."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    targets = np.asarray(targets, dtype=float)
    n = features.shape[0]
    types = [TYPE_CYCLE[i % len(TYPE_CYCLE)] for i in range(n)]
    meta = {
        "board_id": np.arange(n) % 20 + 1,
        "combination_id": np.arange(n) % 33 + 1,
        "replicate_id": np.arange(n) % 20 + 1,
        "component_type": np.array([t[0] for t in types]),
        "size_class": np.array([t[1] for t in types]),
    }
    names = [f"f{j}" for j in range(features.shape[1])]
    return Dataset(features, targets, names, meta)


def linear_dataset(rng, n=200, p=6) -> Dataset:
    """Three targets with known linear structure plus small noise."""
    X = rng.normal(size=(n, p))
    y = np.column_stack([
        3.0 * X[:, 0] + rng.normal(scale=0.2, size=n),
        -2.0 * X[:, 1] + rng.normal(scale=0.2, size=n),
        X[:, 2] + 0.5 * X[:, 3] + rng.normal(scale=0.2, size=n),
    ])
    return build_dataset(X, y)
