"""Figure rendering for evaluation reports and importance rankings.

Everything draws through the Agg backend straight to files; the CLI
drops these next to the delimited outputs of the same run.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import CvReport

TARGET_LABELS = {"shift_x": "shift x (um)", "shift_y": "shift y (um)",
                 "shift_rot": "shift rotation (deg)"}
_MODEL_COLORS = {"svr": "#4477aa", "nn": "#ee6677", "rfr": "#228833"}


def _model_color(name: str) -> str:
    return _MODEL_COLORS.get(name, "#777777")


def save_metrics_figure(reports: list[CvReport], path) -> Path:
    """Grouped bars of fold-mean test RMSE and train R^2 per model/target."""
    targets = sorted({r.target for r in reports}, key=list(TARGET_LABELS).index)
    models = sorted({r.model for r in reports})
    by_key = {(r.model, r.target): r for r in reports}

    fig, axes = plt.subplots(1, 2, figsize=(11, 4.2))
    width = 0.8 / max(1, len(models))
    xs = np.arange(len(targets))
    for metric, axis, label in (("test_rmse", axes[0], "test RMSE (fold mean +- std)"),
                                ("train_r2", axes[1], "train R^2 (fold mean +- std)")):
        for mi, model in enumerate(models):
            means, stds = [], []
            for tgt in targets:
                rep = by_key.get((model, tgt))
                means.append(rep.aggregates[metric]["mean"] if rep else np.nan)
                stds.append(rep.aggregates[metric]["std"] if rep else 0.0)
            axis.bar(xs + mi * width, means, width, yerr=stds, capsize=3,
                     label=model.upper(), color=_model_color(model))
        axis.set_xticks(xs + width * (len(models) - 1) / 2)
        axis.set_xticklabels(targets)
        axis.set_title(label)
        axis.grid(axis="y", alpha=0.3)
    axes[0].legend()
    if any(r.aggregates["train_r2"]["mean"] > 0 for r in reports):
        axes[1].set_ylim(0.0, 1.05)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_per_type_figure(reports: list[CvReport], path) -> Path:
    """Per component-type test RMSE, one panel per target."""
    targets = sorted({r.target for r in reports}, key=list(TARGET_LABELS).index)
    models = sorted({r.model for r in reports})
    by_key = {(r.model, r.target): r for r in reports}
    types = sorted({t for r in reports for t in r.per_type})

    fig, axes = plt.subplots(1, len(targets), figsize=(4.2 * len(targets), 3.8),
                             squeeze=False)
    width = 0.8 / max(1, len(models))
    xs = np.arange(len(types))
    for ti, tgt in enumerate(targets):
        axis = axes[0][ti]
        for mi, model in enumerate(models):
            rep = by_key.get((model, tgt))
            vals = [rep.per_type.get(t, np.nan) if rep else np.nan for t in types]
            axis.bar(xs + mi * width, vals, width, label=model.upper(),
                     color=_model_color(model))
        axis.set_xticks(xs + width * (len(models) - 1) / 2)
        axis.set_xticklabels(types, rotation=45, ha="right")
        axis.set_title(TARGET_LABELS.get(tgt, tgt))
        axis.grid(axis="y", alpha=0.3)
    axes[0][0].set_ylabel("test RMSE by component type")
    axes[0][0].legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_prediction_scatter(report: CvReport, path) -> Path:
    """Pooled held-out predictions against actual shifts."""
    fig, axis = plt.subplots(figsize=(4.6, 4.4))
    actual, pred = report.actuals, report.predictions
    axis.scatter(actual, pred, s=8, alpha=0.35, color=_model_color(report.model),
                 edgecolors="none")
    lo = min(actual.min(), pred.min())
    hi = max(actual.max(), pred.max())
    axis.plot([lo, hi], [lo, hi], "k--", linewidth=1)
    axis.set_xlabel(f"actual {TARGET_LABELS.get(report.target, report.target)}")
    axis.set_ylabel("predicted (pooled test folds)")
    axis.set_title(f"{report.model.upper()} on {report.target}")
    axis.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_importance_figure(names, importances, path, top_n: int = 20) -> Path:
    """Horizontal bars of the strongest impurity importances."""
    importances = np.asarray(importances, dtype=np.float64)
    order = np.argsort(-importances)[:top_n][::-1]
    fig, axis = plt.subplots(figsize=(6.5, 0.3 * len(order) + 1.2))
    axis.barh(np.arange(len(order)), importances[order], color="#228833")
    axis.set_yticks(np.arange(len(order)))
    axis.set_yticklabels([names[i] for i in order], fontsize=8)
    axis.set_xlabel("normalized impurity importance")
    axis.grid(axis="x", alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
