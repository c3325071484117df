"""Command-line interface tying the pipeline together.

Subcommands: generate, preprocess, train, evaluate, predict, importance,
schema.  Every run is reproducible: inputs, seed and config fully
determine the outputs.  Flag precedence is command line over config file
over built-in defaults.  Errors print one machine-parsable line on
stderr (`error code=<n> class=<Name>: <message>`) and exit with the
class-specific code.
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path

import click
import numpy as np

from . import __version__
from .datagen import GenConfig, ShiftCoefficients, dataset_from_records, generate_records
from .dataio import load_model, read_dataset_csv, save_model, write_dataset_csv
from .errors import (
    IO_ERROR_EXIT_CODE,
    ParseError,
    ReflowShiftError,
    SchemaMismatch,
    WrongModelFamily,
)
from .evaluate import (
    FAMILIES,
    TARGET_INDEX,
    CvReport,
    cross_validate,
    default_params,
    fit_model,
    predict_model,
    r2,
)
from .features import feature_schema
from .preprocess import (
    DEFAULT_OUTLIER_FENCE,
    DEFAULT_SPEARMAN_TAU,
    META_NAMES,
    drop_missing,
    remove_outliers,
    select_features,
)
from .rfr import select_important

_TYPE_ORDER = ("C1005", "R1005", "C0603", "R0603", "C0402", "R0402")


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: config is not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: config root must be a JSON object")
    return doc


def _apply_section(params, section: dict, label: str):
    """Overlay a config-file section onto a params dataclass."""
    if not section:
        return params
    known = {f.name for f in fields(params)}
    unknown = set(section) - known
    if unknown:
        raise ParseError(f"config section {label!r} has unknown keys: {sorted(unknown)}")
    return replace(params, **section)


def _gen_config(cfg_file: dict, seed, replications, missing_rate, limit) -> GenConfig:
    section = dict(cfg_file.get("datagen", {}))
    shift = ShiftCoefficients()
    if "shift" in section:
        shift = _apply_section(shift, section.pop("shift"), "datagen.shift")
    gen = _apply_section(GenConfig(shift=shift), section, "datagen")
    flag_values = {"seed": seed, "replications": replications,
                   "missing_rate": missing_rate, "limit": limit}
    overrides = {k: v for k, v in flag_values.items() if v is not None}
    return replace(gen, **overrides) if overrides else gen


def _model_params(family: str, cfg_file: dict):
    return _apply_section(default_params(family), cfg_file.get(family, {}), family)


def _resolve_tau(tau_flag, cfg_file: dict) -> float:
    if tau_flag is not None:
        return tau_flag
    return cfg_file.get("preprocess", {}).get("spearman_tau", DEFAULT_SPEARMAN_TAU)


def _clean_for_modeling(dataset):
    dataset, removed = drop_missing(dataset)
    if removed:
        click.echo(f"note: dropped {removed} incomplete rows before modeling")
    return dataset


@click.group()
@click.version_option(version=__version__, prog_name="reflowshift")
def cli():
    """Predict chip component shift during reflow from process measurements."""


@cli.command()
@click.option("--output", required=True, type=click.Path(dir_okay=False),
              help="Destination CSV path.")
@click.option("--seed", type=int, default=None, help="Generator seed (default 0).")
@click.option("--replications", type=int, default=None,
              help="Replicates per design cell (default 20).")
@click.option("--missing-rate", type=float, default=None,
              help="Fraction of records losing their targets (default 0.005).")
@click.option("--limit", type=int, default=None,
              help="Seeded down-sample to this many records.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON config file.")
def generate(output, seed, replications, missing_rate, limit, config_path):
    """Generate the synthetic assembly dataset CSV (plus schema sidecar)."""
    cfg_file = _load_config(config_path)
    gen = _gen_config(cfg_file, seed, replications, missing_rate, limit)
    records = generate_records(gen)
    dataset = dataset_from_records(records)
    write_dataset_csv(output, dataset)
    click.echo(f"wrote {dataset.n} records to {output} (seed {gen.seed})")


@cli.command("preprocess")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--output", required=True, type=click.Path(dir_okay=False),
              help="Cleaned CSV path.")
@click.option("--outlier-k", type=float, default=None,
              help=f"IQR fence multiplier (default {DEFAULT_OUTLIER_FENCE}).")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None,
              help="Cleaning report JSON path (default <output>.report.json).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None)
def preprocess_cmd(input_path, output, outlier_k, report_path, config_path):
    """Drop missing records, remove target outliers, write the cleaned CSV."""
    cfg_file = _load_config(config_path)
    if outlier_k is None:
        outlier_k = cfg_file.get("preprocess", {}).get("outlier_k", DEFAULT_OUTLIER_FENCE)
    dataset = read_dataset_csv(input_path)
    rows_in = dataset.n
    dataset, missing_removed = drop_missing(dataset)
    dataset, outliers_removed = remove_outliers(dataset, k=outlier_k)
    write_dataset_csv(output, dataset)
    report = {
        "input": str(input_path),
        "rows_in": rows_in,
        "missing_removed": missing_removed,
        "outliers_removed": outliers_removed,
        "rows_out": dataset.n,
        "outlier_fence_k": outlier_k,
    }
    report_file = Path(report_path) if report_path else Path(output + ".report.json")
    report_file.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    click.echo(f"rows in: {rows_in}  missing removed: {missing_removed}  "
               f"outliers removed: {outliers_removed}  rows out: {dataset.n}")
    click.echo(f"cleaned CSV: {output}  report: {report_file}")


@cli.command()
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Cleaned dataset CSV.")
@click.option("--output", required=True, type=click.Path(dir_okay=False),
              help="Model JSON path.")
@click.option("--model", "family", required=True, type=click.Choice(FAMILIES))
@click.option("--target", required=True, type=click.Choice(sorted(TARGET_INDEX)))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--tau", type=float, default=None,
              help=f"Correlation screen threshold (default {DEFAULT_SPEARMAN_TAU}).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None)
def train(input_path, output, family, target, seed, threads, tau, config_path):
    """Train one model for one shift target and persist it as JSON."""
    cfg_file = _load_config(config_path)
    tau = _resolve_tau(tau, cfg_file)
    params = _model_params(family, cfg_file)
    dataset = _clean_for_modeling(read_dataset_csv(input_path))
    t_idx = TARGET_INDEX[target]
    selection = select_features(dataset, t_idx, tau=tau)
    X = dataset.features[:, selection.kept]
    y = dataset.targets[:, t_idx]
    model = fit_model(family, X, y, params, seed=seed, n_jobs=threads)
    kept_names = selection.kept_names(dataset.feature_names)
    save_model(output, model, target, kept_names)
    train_r2 = r2(predict_model(model, X), y)
    click.echo(f"trained {family} on {target}: {dataset.n} rows, "
               f"{len(kept_names)} features kept, train R^2 = {train_r2:.3f}")
    click.echo(f"model file: {output} (seed {seed})")


def _format_table1(reports: list[CvReport]) -> str:
    targets = ("shift_x", "shift_y", "shift_rot")
    units = {"shift_x": "um", "shift_y": "um", "shift_rot": "deg"}
    models = sorted({r.model for r in reports})
    by_key = {(r.model, r.target): r for r in reports}
    header1 = f"{'':8s}"
    header2 = f"{'Model':8s}"
    for tgt in targets:
        header1 += f"| {tgt + ' (' + units[tgt] + ')':^35s} "
        header2 += f"| {'RMSE avg':>9s}{'std':>7s} {'R2 avg':>9s}{'std':>7s} "
    lines = [header1, header2, "-" * len(header2)]
    for model in models:
        line = f"{model.upper():8s}"
        for tgt in targets:
            rep = by_key.get((model, tgt))
            if rep is None:
                line += f"| {'-':>9s}{'-':>7s} {'-':>9s}{'-':>7s} "
                continue
            agg = rep.aggregates
            line += (f"| {agg['test_rmse']['mean']:>9.2f}{agg['test_rmse']['std']:>7.2f} "
                     f"{agg['train_r2']['mean']:>9.2f}{agg['train_r2']['std']:>7.2f} ")
        lines.append(line)
    lines.append("")
    lines.append("test RMSE and train R^2: mean and standard deviation over folds")
    return "\n".join(lines)


def _format_table2(reports: list[CvReport]) -> str:
    targets = ("shift_x", "shift_y", "shift_rot")
    models = sorted({r.model for r in reports})
    by_key = {(r.model, r.target): r for r in reports}
    types = [t for t in _TYPE_ORDER
             if any(t in r.per_type for r in reports)]
    types += sorted({t for r in reports for t in r.per_type} - set(types))
    header1 = f"{'':8s}"
    header2 = f"{'Type':8s}"
    for tgt in targets:
        width = 8 * len(models)
        header1 += f"| {tgt:^{width}s} "
        header2 += "| " + "".join(f"{m.upper():>8s}" for m in models) + " "
    lines = [header1, header2, "-" * len(header2)]
    for type_label in types:
        line = f"{type_label:8s}"
        for tgt in targets:
            cells = ""
            for model in models:
                rep = by_key.get((model, tgt))
                value = rep.per_type.get(type_label) if rep else None
                cells += f"{value:>8.2f}" if value is not None else f"{'-':>8s}"
            line += f"| {cells} "
        lines.append(line)
    lines.append("")
    lines.append("pooled test RMSE per component type")
    return "\n".join(lines)


def _write_fold_csv(path: Path, reports: list[CvReport]) -> None:
    import csv as _csv

    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["model", "target", "fold", "n_train", "n_test",
                         "train_r2", "test_rmse", "train_rmse", "test_r2"])
        for rep in reports:
            for f in rep.folds:
                writer.writerow([rep.model, rep.target, f.fold, f.n_train, f.n_test,
                                 format(f.train_r2, ".9g"), format(f.test_rmse, ".9g"),
                                 format(f.train_rmse, ".9g"), format(f.test_r2, ".9g")])


def _write_predictions_csv(path: Path, dataset, reports: list[CvReport]) -> None:
    import csv as _csv

    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        header = list(META_NAMES) + ["fold", "target", "model", "actual", "predicted"]
        writer.writerow(header)
        for rep in reports:
            for i in range(dataset.n):
                writer.writerow([
                    int(dataset.meta["board_id"][i]),
                    int(dataset.meta["combination_id"][i]),
                    int(dataset.meta["replicate_id"][i]),
                    str(dataset.meta["component_type"][i]),
                    str(dataset.meta["size_class"][i]),
                    int(rep.fold_of_row[i]),
                    rep.target,
                    rep.model,
                    format(rep.actuals[i], ".9g"),
                    format(rep.predictions[i], ".9g"),
                ])


@cli.command()
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Cleaned dataset CSV.")
@click.option("--output", "output_dir", required=True, type=click.Path(file_okay=False),
              help="Report directory.")
@click.option("--model", "family", default="all",
              type=click.Choice(list(FAMILIES) + ["all"]), show_default=True)
@click.option("--target", default="all",
              type=click.Choice(sorted(TARGET_INDEX) + ["all"]), show_default=True)
@click.option("--folds", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--tau", type=float, default=None)
@click.option("--stratify/--no-stratify", default=False, show_default=True,
              help="Balance folds over component types.")
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="Render PNG figures next to the delimited outputs.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None)
def evaluate(input_path, output_dir, family, target, folds, seed, threads, tau,
             stratify, figures, config_path):
    """Cross-validate the requested models and write reports and figures."""
    cfg_file = _load_config(config_path)
    tau = _resolve_tau(tau, cfg_file)
    families = list(FAMILIES) if family == "all" else [family]
    targets = list(TARGET_INDEX) if target == "all" else [target]
    dataset = _clean_for_modeling(read_dataset_csv(input_path))

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports: list[CvReport] = []
    for fam in families:
        params = _model_params(fam, cfg_file)
        for tgt in targets:
            report = cross_validate(dataset, fam, tgt, params, k=folds, seed=seed,
                                    tau=tau, n_jobs=threads, stratify=stratify)
            reports.append(report)
            doc = report.to_json()
            (out / f"cv_{fam}_{tgt}.json").write_text(
                json.dumps(doc, indent=2) + "\n", encoding="utf-8")
            agg = report.aggregates
            click.echo(f"{fam}/{tgt}: test RMSE {agg['test_rmse']['mean']:.2f} "
                       f"(+-{agg['test_rmse']['std']:.2f}), "
                       f"train R^2 {agg['train_r2']['mean']:.3f}")

    table1 = _format_table1(reports)
    table2 = _format_table2(reports)
    (out / "table_overall.txt").write_text(table1 + "\n", encoding="utf-8")
    (out / "table_per_type.txt").write_text(table2 + "\n", encoding="utf-8")
    _write_fold_csv(out / "folds.csv", reports)
    _write_predictions_csv(out / "predictions.csv", dataset, reports)
    if figures:
        from .figures import (
            save_metrics_figure,
            save_per_type_figure,
            save_prediction_scatter,
        )

        fig_dir = out / "figures"
        fig_dir.mkdir(exist_ok=True)
        save_metrics_figure(reports, fig_dir / "cv_metrics.png")
        save_per_type_figure(reports, fig_dir / "per_type_rmse.png")
        for rep in reports:
            save_prediction_scatter(
                rep, fig_dir / f"pred_vs_actual_{rep.model}_{rep.target}.png")
    click.echo("")
    click.echo(table1)
    click.echo(f"\nreports in {out} (seed {seed}, folds {folds})")


@cli.command()
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Feature CSV.")
@click.option("--model-file", "model_files", required=True, multiple=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--output", required=True, type=click.Path(dir_okay=False),
              help="Predictions CSV path.")
def predict(input_path, model_files, output):
    """Append model predictions to a feature CSV."""
    import csv as _csv

    dataset = read_dataset_csv(input_path)
    columns: list[tuple[str, np.ndarray]] = []
    for mf in model_files:
        model, manifest = load_model(mf)
        name_to_col = {n: i for i, n in enumerate(dataset.feature_names)}
        missing = [n for n in manifest["feature_names"] if n not in name_to_col]
        if missing:
            raise SchemaMismatch(f"{mf}: input CSV lacks feature columns {missing}")
        cols = [name_to_col[n] for n in manifest["feature_names"]]
        preds = (predict_model(model, dataset.features[:, cols])
                 if dataset.n else np.empty(0))
        columns.append((f"pred_{manifest['target']}_{manifest['family']}", preds))

    with Path(output).open("w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        header = (list(META_NAMES) + list(dataset.feature_names)
                  + ["shift_x", "shift_y", "shift_rot"]
                  + [name for name, _ in columns])
        writer.writerow(header)
        for i in range(dataset.n):
            row = [
                int(dataset.meta["board_id"][i]),
                int(dataset.meta["combination_id"][i]),
                int(dataset.meta["replicate_id"][i]),
                str(dataset.meta["component_type"][i]),
                str(dataset.meta["size_class"][i]),
            ]
            row += [format(v, ".9g") for v in dataset.features[i]]
            row += ["" if not np.isfinite(t) else format(t, ".9g")
                    for t in dataset.targets[i]]
            row += [format(vals[i], ".9g") for _, vals in columns]
            writer.writerow(row)
    click.echo(f"wrote {dataset.n} predictions ({len(columns)} model(s)) to {output}")


@cli.command()
@click.option("--model-file", "model_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--top", type=int, default=20, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), default=None,
              help="Also write the full ranking as text.")
@click.option("--figures/--no-figures", default=False, show_default=True,
              help="Render a PNG bar chart next to the output.")
def importance(model_file, top, output, figures):
    """Rank forest feature importances and show the derived subset."""
    model, manifest = load_model(model_file)
    if manifest["family"] != "rfr":
        raise WrongModelFamily(
            f"{model_file}: importance needs an rfr model, got {manifest['family']!r}")
    names = manifest["feature_names"]
    order = np.argsort(-model.importances)
    lines = [f"{'rank':>4s}  {'importance':>10s}  feature"]
    for rank, idx in enumerate(order, start=1):
        lines.append(f"{rank:>4d}  {model.importances[idx]:>10.4f}  {names[idx]}")
    kept = select_important(model.importances)
    summary = (f"derived {len(kept)} factor(s) above the uniform share: "
               + (", ".join(names[i] for i in kept) if kept else "(none)"))
    click.echo("\n".join(lines[: top + 1]))
    click.echo(summary)
    if output:
        Path(output).write_text("\n".join(lines) + "\n" + summary + "\n",
                                encoding="utf-8")
    if figures:
        from .figures import save_importance_figure

        target_file = Path(output) if output else Path(model_file)
        png = target_file.with_suffix(".importance.png")
        save_importance_figure(names, model.importances, png, top_n=top)
        click.echo(f"figure: {png}")


@cli.command()
@click.option("--json", "as_json", is_flag=True, default=False,
              help="Emit machine-readable JSON.")
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def schema(as_json, output):
    """Print the 48-feature reference table (name, category, unit, definition)."""
    specs = feature_schema()
    if as_json:
        text = json.dumps([asdict(s) for s in specs], indent=2)
    else:
        name_w = max(len(s.name) for s in specs)
        cat_w = max(len(s.category) for s in specs)
        unit_w = max(len(s.unit) for s in specs)
        lines = [f"{'#':>2s}  {'name':<{name_w}s}  {'category':<{cat_w}s}  "
                 f"{'unit':<{unit_w}s}  definition"]
        for i, s in enumerate(specs, start=1):
            lines.append(f"{i:>2d}  {s.name:<{name_w}s}  {s.category:<{cat_w}s}  "
                         f"{s.unit:<{unit_w}s}  {s.definition}")
        text = "\n".join(lines)
    if output:
        Path(output).write_text(text + "\n", encoding="utf-8")
        click.echo(f"schema written to {output}")
    else:
        click.echo(text)


def main():
    try:
        cli(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(130)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except ReflowShiftError as exc:
        print(f"error code={exc.exit_code} class={type(exc).__name__}: {exc}",
              file=sys.stderr)
        sys.exit(exc.exit_code)
    except OSError as exc:
        print(f"error code={IO_ERROR_EXIT_CODE} class=IoError: {exc}", file=sys.stderr)
        sys.exit(IO_ERROR_EXIT_CODE)


if __name__ == "__main__":
    main()
