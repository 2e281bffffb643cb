"""Named replication recipes: a schema, a RecipeSpec preprocessing stage, and
an analysis plan, shipped as JSON config files next to this module.

Recipes read real-world CSVs leniently (extra columns are ignored, documented
shapes are checked as warnings unless strict mode is requested) and write one
JSON + CSV pair per analysis under <output_dir>/<recipe>/.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import stats
from .boosting import BoostConfig, Ensemble, train, train_classifier
from .dataset import (CATEGORICAL, ColumnSchema, Dataset, DatasetError, RecipeSpec,
                      apply_recipe, parse_cells, retype_target, train_test_split,
                      _Dialect)

RECIPE_DIR = Path(__file__).parent / "recipes"


class RecipeError(ValueError):
    pass


@dataclass
class ReplicationRecipe:
    name: str
    description: str
    schema: list[ColumnSchema]
    optional_columns: list[ColumnSchema]
    expected_input_shape: tuple[int | None, int | None] | None
    spec: RecipeSpec
    analyses: list[dict]


def available_recipes() -> list[str]:
    return sorted(p.stem for p in RECIPE_DIR.glob("*.json"))


def _parse_schema(entries) -> list[ColumnSchema]:
    return [ColumnSchema(e["name"], e.get("kind", "numeric"), e.get("missing_marker"))
            for e in entries]


def load_recipe(name_or_path) -> ReplicationRecipe:
    path = Path(name_or_path)
    if not path.suffix:
        path = RECIPE_DIR / f"{name_or_path}.json"
    if not path.exists():
        raise RecipeError(
            f"unknown recipe {name_or_path!r}; available: {', '.join(available_recipes())}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    derived, filters, dropped = [], [], []
    drop_rows = False
    for step in doc.get("preprocess", []):
        op = step["op"]
        if op == "add_ratio_column":
            derived.append((step["new_name"], step["num"], step["den"],
                            float(step.get("scale", 1.0))))
        elif op == "filter_rows":
            filters.append((step["column"], step["excluded"]))
        elif op == "drop_missing":
            dropped.extend(step.get("columns", []))
            drop_rows = True
        else:
            raise RecipeError(f"{doc['name']}: unknown preprocess op {op!r}")
    expected = doc.get("expected_shape")
    spec = RecipeSpec(doc["name"], derived, filters, dropped, drop_rows,
                      tuple(expected) if expected else None)
    e_in = doc.get("expected_input_shape")
    return ReplicationRecipe(
        name=doc["name"],
        description=doc.get("description", ""),
        schema=_parse_schema(doc["schema"]),
        optional_columns=_parse_schema(doc.get("optional_columns", [])),
        expected_input_shape=tuple(e_in) if e_in else None,
        spec=spec,
        analyses=doc.get("analyses", []),
    )


def load_known_columns(path, schema: list[ColumnSchema],
                       optional: list[ColumnSchema] = ()) -> tuple[Dataset, int]:
    """Lenient CSV read: keep schema + optional columns, ignore the rest.

    Returns the Dataset plus the raw column count of the file (for shape
    checks). Required columns that are absent raise.
    """
    try:
        fh = open(path, "r", newline="", encoding="utf-8")
    except FileNotFoundError:
        raise DatasetError(f"no such file: {path}") from None
    with fh:
        reader = csv.reader(fh, dialect=_Dialect)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file, no header") from None
        rows = [row for row in reader]
    missing = [c.name for c in schema if c.name not in header]
    if missing:
        raise DatasetError(f"{path}: missing required columns {missing}")
    use = list(schema) + [c for c in optional if c.name in header]
    pos = {name: i for i, name in enumerate(header)}
    columns, labels = {}, {}
    for c in use:
        i = pos[c.name]
        cells = [row[i] if i < len(row) else "" for row in rows]
        parsed = parse_cells(cells, c, where=str(path))
        if c.kind == CATEGORICAL:
            columns[c.name], labels[c.name] = parsed
        else:
            columns[c.name] = parsed
    return Dataset(use, columns, labels), len(header)


def _check_input_shape(recipe: ReplicationRecipe, n_rows: int, n_raw_cols: int) -> list[str]:
    if recipe.expected_input_shape is None:
        return []
    want_rows, want_cols = recipe.expected_input_shape
    warnings = []
    if want_rows is not None and n_rows != want_rows:
        warnings.append(f"{recipe.name}: input has {n_rows} rows, documented {want_rows}")
    if want_cols is not None and n_raw_cols != want_cols:
        warnings.append(f"{recipe.name}: input has {n_raw_cols} columns, "
                        f"documented {want_cols}")
    return warnings


def _nan_to_none(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_nan_to_none(v) for v in obj]
    return obj


def _merged_importance(ensembles: list[Ensemble]) -> dict[str, float]:
    """Gain importance summed over ensembles, one-hot children folded back
    onto their source column."""
    merged: dict[str, float] = {}
    for ens in ensembles:
        report = stats.feature_importance(ens, metric="gain")
        for name, gain in zip(report.feature_names, report.gain):
            src, _, label = name.partition("=")
            key = src if label and src in ens.categorical_levels else name
            merged[key] = merged.get(key, 0.0) + float(gain)
    return merged


def _run_analysis(spec: dict, ds: Dataset, seed: int):
    op = spec["op"]
    if op == "chi2":
        table = stats.contingency_table(ds, spec["a"], spec["b"])
        result = stats.chi_squared_test(table)
        return {"a": spec["a"], "b": spec["b"], "table": table.to_dict(),
                **result.to_dict()}
    if op == "anova1":
        table = stats.one_way_anova(ds, spec["response"], spec["factor"])
        return {"response": spec["response"], "rows": table.to_rows()}
    if op == "anova2":
        table = stats.two_way_anova(ds, spec["response"], spec["factor_a"], spec["factor_b"])
        return {"response": spec["response"], "rows": table.to_rows()}
    if op == "correlation":
        corr = stats.pearson_correlation_matrix(ds, spec["columns"])
        return corr.to_dict()
    if op == "group_summary":
        groups = stats.group_summary(ds, spec["value"], spec["by"])
        return {"value": spec["value"], "by": spec["by"],
                "groups": [g.to_dict() for g in groups]}
    if op == "train_importance":
        return _run_train_importance(spec, ds, seed)
    if op == "split_regression":
        return _run_split_regression(spec, ds, seed)
    raise RecipeError(f"unknown analysis op {op!r}")


def _analysis_config(spec: dict, seed: int) -> BoostConfig:
    max_leaves = spec.get("max_leaves")
    return BoostConfig(
        n_trees=int(spec.get("trees", 100)),
        learning_rate=float(spec.get("learning_rate", 0.1)),
        max_depth=int(spec.get("max_depth", 6)),
        max_leaves=int(max_leaves) if max_leaves else None,
        max_bins=int(spec.get("max_bins", 256)),
        grower=spec.get("grower", "level_wise"),
        efb_max_conflicts=0 if spec.get("efb") else None,
        seed=seed,
    )


def _run_train_importance(spec: dict, ds: Dataset, seed: int) -> dict:
    config = _analysis_config(spec, seed)
    sub = ds.select_columns(list(spec["features"]) + [spec["target"]])
    sub = retype_target(sub, spec["target"])
    if spec.get("task", "regression") == "classification":
        model = train_classifier(sub, config)
        ensembles = model.ensembles
        classes = model.classes
    else:
        model = train(sub, replace(config, loss="squared_error"))
        ensembles = [model]
        classes = None
    merged = _merged_importance(ensembles)
    ranking = sorted(merged.items(), key=lambda kv: (-kv[1], kv[0]))
    return {"target": spec["target"], "grower": config.grower,
            "n_trees": config.n_trees, "max_depth": config.max_depth,
            "classes": classes, "importance": merged,
            "ranking": [{"feature": k, "gain": v} for k, v in ranking]}


def _run_split_regression(spec: dict, ds: Dataset, seed: int) -> dict:
    config = _analysis_config(spec, seed)
    fraction = float(spec.get("train_fraction", 0.75))
    sub = ds.select_columns(list(spec["features"]) + [spec["target"]])
    sub = retype_target(sub, spec["target"])
    train_ds, test_ds = train_test_split(sub, fraction, seed)
    model = train(train_ds, config)
    y_tr = train_ds.columns[spec["target"]]
    y_te = test_ds.columns[spec["target"]]
    rmse_tr = float(np.sqrt(np.mean((model.predict(train_ds) - y_tr) ** 2)))
    rmse_te = float(np.sqrt(np.mean((model.predict(test_ds) - y_te) ** 2)))
    merged = _merged_importance([model])
    ranking = sorted(merged.items(), key=lambda kv: (-kv[1], kv[0]))
    return {"target": spec["target"], "train_fraction": fraction,
            "train_rows": train_ds.n_rows, "test_rows": test_ds.n_rows,
            "observed_fraction": train_ds.n_rows / sub.n_rows,
            "rmse_train": rmse_tr, "rmse_test": rmse_te,
            "importance": merged,
            "ranking": [{"feature": k, "gain": v} for k, v in ranking]}


def _analysis_ready(spec: dict, ds: Dataset) -> list[str]:
    """Columns the analysis needs but the dataset lacks."""
    refs = []
    for key in ("a", "b", "response", "factor", "factor_a", "factor_b", "value", "target"):
        if key in spec:
            refs.append(spec[key])
    refs.extend(spec.get("columns", []))
    refs.extend(spec.get("by", []))
    refs.extend(spec.get("features", []))
    return [r for r in refs if r not in ds.columns]


def _csv_rows(name: str, result: dict) -> tuple[list[str], list[list]]:
    """Flatten one analysis result into a small CSV table."""
    if "rows" in result:  # ANOVA tables
        header = ["term", "sum_sq", "dof", "mean_sq", "F", "p_value"]
        return header, [[r[h] for h in header] for r in result["rows"]]
    if "r" in result:  # correlation matrix: r then r_squared blocks
        header = ["matrix", "label"] + result["labels"]
        rows = []
        for kind in ("r", "r_squared"):
            for lbl, vals in zip(result["labels"], result[kind]):
                rows.append([kind, lbl] + vals)
        return header, rows
    if "groups" in result:
        header = ["group", "count", "mean", "median", "q1", "q3", "min", "max"]
        rows = [["|".join(g["group"])] + [g[h] for h in header[1:]]
                for g in result["groups"]]
        return header, rows
    if "statistic" in result:  # chi-squared
        header = ["a", "b", "statistic", "dof", "p_value"]
        return header, [[result[h] for h in header]]
    if "ranking" in result:
        header = ["feature", "gain"]
        return header, [[r["feature"], r["gain"]] for r in result["ranking"]]
    return ["key", "value"], [[k, v] for k, v in result.items()]


def run_recipe(recipe, data_path, output_dir=None, seed: int = 0,
               strict_shapes: bool = False) -> dict:
    """Execute a recipe end to end; returns the full report bundle.

    Shape mismatches are warnings by default (strict mode raises); analyses
    whose columns are unavailable are skipped with a warning.
    """
    if not isinstance(recipe, ReplicationRecipe):
        recipe = load_recipe(recipe)
    warnings: list[str] = []
    ds, raw_cols = load_known_columns(data_path, recipe.schema, recipe.optional_columns)
    warnings += _check_input_shape(recipe, ds.n_rows, raw_cols)
    ds, shape_warnings = apply_recipe(ds, recipe.spec)
    warnings += shape_warnings
    if strict_shapes and warnings:
        raise RecipeError("; ".join(warnings))

    results: dict[str, dict] = {}
    for spec in recipe.analyses:
        name = spec.get("name", spec["op"])
        absent = _analysis_ready(spec, ds)
        if absent:
            warnings.append(f"{recipe.name}: skipped analysis {name!r} "
                            f"(missing columns {absent})")
            continue
        results[name] = _run_analysis(spec, ds, seed)

    bundle = {
        "recipe": recipe.name,
        "seed": seed,
        "input": str(data_path),
        "rows_after_preprocess": ds.n_rows,
        "columns_after_preprocess": len(ds.schema),
        "warnings": warnings,
        "analyses": results,
    }
    if output_dir is not None:
        _write_bundle(bundle, recipe.name, output_dir)
    return bundle


def _write_bundle(bundle: dict, name: str, output_dir) -> None:
    out = Path(output_dir) / name
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(_nan_to_none(bundle), indent=2) + "\n", encoding="utf-8")
    for analysis, result in bundle["analyses"].items():
        (out / f"{analysis}.json").write_text(
            json.dumps(_nan_to_none(result), indent=2) + "\n", encoding="utf-8")
        header, rows = _csv_rows(analysis, result)
        with open(out / f"{analysis}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, dialect=_Dialect)
            writer.writerow(header)
            writer.writerows(rows)
