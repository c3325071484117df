"""File formats: the canonical dataset CSV and versioned JSON model files.

Dataset CSV: UTF-8, comma-separated, one header row.  Columns are the
five meta fields (board_id, combination_id, replicate_id,
component_type, size_class), the 48 features in schema order, then the
three shift targets.  Floats are rendered with 9 significant digits;
missing targets are empty cells.  A sidecar `<name>.schema.json`
documents every column's category, unit and definition.

Model files are JSON with a `schema_version` guard; loading rejects
files written under a different feature schema.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import ParseError, SchemaMismatch
from .features import FEATURE_NAMES, SCHEMA_VERSION, feature_schema
from .nn import NnConfig, NnModel
from .preprocess import META_NAMES, TARGET_NAMES, Dataset, Scaler
from .rfr import RfrModel, SplitTree
from .svr import SvrModel

MODEL_FILE_VERSION = "1"

_INT_META = ("board_id", "combination_id", "replicate_id")


def _fmt(value: float) -> str:
    return format(float(value), ".9g")


def write_dataset_csv(path, dataset: Dataset) -> None:
    """Write the canonical CSV plus its schema sidecar."""
    path = Path(path)
    header = list(META_NAMES) + list(dataset.feature_names) + list(TARGET_NAMES)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.n):
            row = [
                int(dataset.meta["board_id"][i]),
                int(dataset.meta["combination_id"][i]),
                int(dataset.meta["replicate_id"][i]),
                str(dataset.meta["component_type"][i]),
                str(dataset.meta["size_class"][i]),
            ]
            row += [_fmt(v) for v in dataset.features[i]]
            row += ["" if not np.isfinite(t) else _fmt(t) for t in dataset.targets[i]]
            writer.writerow(row)
    write_schema_sidecar(path)


def write_schema_sidecar(csv_path) -> Path:
    """Document the CSV columns next to the file."""
    csv_path = Path(csv_path)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "meta_columns": [
            {"name": "board_id", "type": "int", "definition": "board / replicate carrier id"},
            {"name": "combination_id", "type": "int", "definition": "design combination 1..33"},
            {"name": "replicate_id", "type": "int", "definition": "replication index"},
            {"name": "component_type", "type": "str", "definition": "R resistor / C capacitor"},
            {"name": "size_class", "type": "str", "definition": "1005 | 0603 | 0402"},
        ],
        "feature_columns": [asdict(spec) for spec in feature_schema()],
        "target_columns": [
            {"name": "shift_x", "unit": "um", "definition": "post-reflow minus pre-reflow x"},
            {"name": "shift_y", "unit": "um", "definition": "post-reflow minus pre-reflow y"},
            {"name": "shift_rot", "unit": "deg", "definition": "post-reflow minus pre-reflow rotation"},
        ],
    }
    sidecar = csv_path.with_suffix(csv_path.suffix + ".schema.json")
    sidecar.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return sidecar


def read_dataset_csv(path) -> Dataset:
    """Parse the canonical CSV; errors carry row and column context."""
    path = Path(path)
    expected = list(META_NAMES) + list(FEATURE_NAMES) + list(TARGET_NAMES)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if header != expected:
            raise ParseError(
                f"{path}: header does not match the canonical dataset schema "
                f"(expected {len(expected)} columns, got {len(header)})")
        n_meta = len(META_NAMES)
        n_feat = len(FEATURE_NAMES)
        features, targets = [], []
        meta = {name: [] for name in META_NAMES}
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise ParseError(f"{path}:{line_no}: expected {len(expected)} cells, "
                                 f"got {len(row)}")
            try:
                for name in _INT_META:
                    meta[name].append(int(row[expected.index(name)]))
            except ValueError as exc:
                raise ParseError(f"{path}:{line_no}: bad meta value ({exc})") from None
            meta["component_type"].append(row[3])
            meta["size_class"].append(row[4])
            feat_row = np.empty(n_feat)
            for j, cell in enumerate(row[n_meta:n_meta + n_feat]):
                try:
                    feat_row[j] = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}:{line_no}: column {FEATURE_NAMES[j]!r}: "
                        f"cannot parse {cell!r}") from None
            features.append(feat_row)
            tgt_row = np.empty(3)
            for j, cell in enumerate(row[n_meta + n_feat:]):
                if cell == "":
                    tgt_row[j] = np.nan
                    continue
                try:
                    tgt_row[j] = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}:{line_no}: column {TARGET_NAMES[j]!r}: "
                        f"cannot parse {cell!r}") from None
            targets.append(tgt_row)
    n = len(features)
    return Dataset(
        np.vstack(features) if n else np.empty((0, n_feat)),
        np.vstack(targets) if n else np.empty((0, 3)),
        list(FEATURE_NAMES),
        {
            "board_id": np.array(meta["board_id"], dtype=int),
            "combination_id": np.array(meta["combination_id"], dtype=int),
            "replicate_id": np.array(meta["replicate_id"], dtype=int),
            "component_type": np.array(meta["component_type"], dtype=object),
            "size_class": np.array(meta["size_class"], dtype=object),
        },
    )


def _scaler_to_json(scaler: Scaler | None):
    return None if scaler is None else scaler.to_json()


def _scaler_from_json(obj) -> Scaler | None:
    return None if obj is None else Scaler.from_json(obj)


def save_model(path, model, target: str, feature_names: list[str]) -> None:
    """Persist a trained model of any family as versioned JSON."""
    if isinstance(model, SvrModel):
        family, payload = "svr", {
            "w": model.w.tolist(),
            "b": model.b,
            "epsilon": model.epsilon,
            "C": model.C,
            "feature_scaler": _scaler_to_json(model.feature_scaler),
            "target_center": model.target_center,
            "target_scale": model.target_scale,
            "n_iter": model.n_iter,
            "gap": model.gap,
        }
    elif isinstance(model, NnModel):
        family, payload = "nn", {
            "weights": [w.tolist() for w in model.weights],
            "biases": [b.tolist() for b in model.biases],
            "config": asdict(model.config),
            "feature_scaler": _scaler_to_json(model.feature_scaler),
            "target_center": model.target_center,
            "target_scale": model.target_scale,
        }
    elif isinstance(model, RfrModel):
        family, payload = "rfr", {
            "seed": model.seed,
            "n_trees": model.n_trees,
            "feature_fraction": model.feature_fraction,
            "per_node_subsets": model.per_node_subsets,
            "n_features": model.n_features,
            "importances": model.importances.tolist(),
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                    "count": t.count.tolist(),
                    "feature_subset": t.feature_subset.tolist(),
                }
                for t in model.trees
            ],
        }
    else:
        raise ValueError(f"cannot persist model of type {type(model).__name__}")

    doc = {
        "model_file_version": MODEL_FILE_VERSION,
        "schema_version": SCHEMA_VERSION,
        "family": family,
        "target": target,
        "feature_names": list(feature_names),
        "model": payload,
    }
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def load_model(path):
    """Load a model file; returns (model, manifest).

    The manifest carries family, target and the kept feature names.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from None
    for key in ("model_file_version", "schema_version", "family", "target",
                "feature_names", "model"):
        if key not in doc:
            raise ParseError(f"{path}: missing field {key!r}")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise SchemaMismatch(
            f"{path}: written under feature schema {doc['schema_version']!r}, "
            f"this build uses {SCHEMA_VERSION!r}")
    if doc["model_file_version"] != MODEL_FILE_VERSION:
        raise SchemaMismatch(
            f"{path}: model file version {doc['model_file_version']!r} "
            f"unsupported (expected {MODEL_FILE_VERSION!r})")
    payload = doc["model"]
    family = doc["family"]
    if family == "svr":
        model = SvrModel(
            w=np.asarray(payload["w"], dtype=np.float64),
            b=float(payload["b"]),
            epsilon=float(payload["epsilon"]),
            C=float(payload["C"]),
            feature_scaler=_scaler_from_json(payload["feature_scaler"]),
            target_center=float(payload["target_center"]),
            target_scale=float(payload["target_scale"]),
            n_iter=int(payload["n_iter"]),
            gap=float(payload["gap"]),
        )
    elif family == "nn":
        model = NnModel(
            weights=[np.asarray(w, dtype=np.float64) for w in payload["weights"]],
            biases=[np.asarray(b, dtype=np.float64) for b in payload["biases"]],
            config=NnConfig(**payload["config"]),
            feature_scaler=_scaler_from_json(payload["feature_scaler"]),
            target_center=float(payload["target_center"]),
            target_scale=float(payload["target_scale"]),
        )
    elif family == "rfr":
        trees = [
            SplitTree(
                feature=np.asarray(t["feature"], dtype=np.int32),
                threshold=np.asarray(t["threshold"], dtype=np.float64),
                left=np.asarray(t["left"], dtype=np.int32),
                right=np.asarray(t["right"], dtype=np.int32),
                value=np.asarray(t["value"], dtype=np.float64),
                count=np.asarray(t["count"], dtype=np.int32),
                feature_subset=np.asarray(t["feature_subset"], dtype=np.int64),
            )
            for t in payload["trees"]
        ]
        model = RfrModel(
            trees=trees,
            importances=np.asarray(payload["importances"], dtype=np.float64),
            n_features=int(payload["n_features"]),
            feature_fraction=float(payload["feature_fraction"]),
            seed=int(payload["seed"]),
            per_node_subsets=bool(payload["per_node_subsets"]),
        )
    else:
        raise ParseError(f"{path}: unknown model family {family!r}")
    manifest = {
        "family": family,
        "target": doc["target"],
        "feature_names": list(doc["feature_names"]),
        "schema_version": doc["schema_version"],
    }
    return model, manifest
