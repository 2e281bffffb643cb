"""Command-line surface: ingestion, replication recipes, training, prediction,
model persistence, and the statistics commands.

Exit codes: 0 success, 2 validation error (bad flags, schema/shape problems),
1 runtime error (corrupt model files, unexpected failures). All commands are
deterministic given their inputs and --seed; reports carry the seed and no
timestamps.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import stats
from .boosting import (BoostConfig, Classifier, ConfigError, ModelFormatError,
                       load_model, save_model, train, train_classifier)
from .dataset import (CATEGORICAL, ColumnSchema, Dataset, DatasetError, _Dialect,
                      load_csv, retype_target)
from .recipes import (RecipeError, available_recipes, load_known_columns,
                      run_recipe)
from .stats import StatsError

VALIDATION_ERRORS = (DatasetError, ConfigError, StatsError, RecipeError)


def _load_schema_file(path) -> list[ColumnSchema]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DatasetError(f"no such schema file: {path}") from None
    except json.JSONDecodeError as exc:
        raise DatasetError(f"schema file {path} is not valid JSON: {exc}") from None
    return [ColumnSchema(e["name"], e.get("kind", "numeric"), e.get("missing_marker"))
            for e in doc]


def _schema_from_model(model) -> list[ColumnSchema]:
    """Reconstruct an input schema for prediction from a model document."""
    ens = model.ensembles[0] if isinstance(model, Classifier) else model
    schema: list[ColumnSchema] = []
    seen = set()
    for name in ens.feature_names:
        src, _, label = name.partition("=")
        if label and src in ens.categorical_levels:
            if src not in seen:
                schema.append(ColumnSchema(src, CATEGORICAL))
                seen.add(src)
        elif name not in seen:
            schema.append(ColumnSchema(name, "numeric"))
            seen.add(name)
    return schema


def _nan_to_none(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_nan_to_none(v) for v in obj]
    return obj


def _write_result(result: dict, output: str | None, csv_table=None) -> None:
    """JSON to stdout or --output; .csv paths get the flattened table."""
    if output is None:
        print(json.dumps(_nan_to_none(result), indent=2))
        return
    path = Path(output)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".csv" and csv_table is not None:
        header, rows = csv_table
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, dialect=_Dialect)
            writer.writerow(header)
            writer.writerows(rows)
        return
    path.write_text(json.dumps(_nan_to_none(result), indent=2) + "\n", encoding="utf-8")


def _load_input(args, strict: bool = False) -> Dataset:
    """Strict loading validates the full header; lenient loading picks the
    schema's columns out of a possibly wider file."""
    if args.schema is None:
        raise DatasetError("--schema is required for this command")
    schema = _load_schema_file(args.schema)
    if strict:
        return load_csv(args.input, schema)
    ds, _ = load_known_columns(args.input, schema)
    return ds


def _config_from_args(args) -> BoostConfig:
    return BoostConfig(
        n_trees=args.trees,
        learning_rate=args.learning_rate,
        lambda_=getattr(args, "lambda_"),
        gamma=args.gamma,
        max_depth=args.max_depth,
        max_leaves=args.max_leaves,
        max_bins=args.max_bins,
        grower=args.grower,
        loss=args.loss,
        goss_a=args.goss_a,
        goss_b=args.goss_b,
        efb_max_conflicts=args.efb_max_conflicts,
        ordered_blocks=args.ordered_blocks,
        ordered_permutations=args.ordered_permutations,
        seed=args.seed,
    )


def _cmd_ingest(args) -> int:
    ds = _load_input(args, strict=True)
    _write_result(ds.summary(), args.output)
    return 0


def _cmd_recipe(args) -> int:
    bundle = run_recipe(args.recipe, args.input, output_dir=args.output_dir,
                        seed=args.seed, strict_shapes=args.strict_shapes)
    for warning in bundle["warnings"]:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"recipe {bundle['recipe']}: {len(bundle['analyses'])} analyses "
          f"-> {args.output_dir}")
    return 0


def _cmd_train(args) -> int:
    ds = _load_input(args)
    if args.target is not None:
        ds = retype_target(ds, args.target)
    if ds.target_name() is None:
        raise DatasetError("no target column; mark one in the schema or pass --target")
    config = _config_from_args(args)
    if config.loss == "logistic":
        y = ds.columns[ds.target_name()]
        if set(np.unique(y)) <= {0.0, 1.0}:
            model = train(ds, config)
        else:
            model = train_classifier(ds, config)
    else:
        model = train(ds, config)
    save_model(model, args.output)
    n = len(model.ensembles) if isinstance(model, Classifier) else 1
    print(f"trained {config.grower} model ({config.n_trees} trees x {n}) -> {args.output}")
    return 0


def _predictions_table(model, ds: Dataset):
    if isinstance(model, Classifier):
        proba = model.predict_proba(ds)
        classes = model.predict_class(ds)
        header = ["class"] + [f"p_{c:g}" for c in model.classes]
        rows = [[repr(float(classes[i]))] + [repr(float(p)) for p in proba[i]]
                for i in range(len(classes))]
        return header, rows
    raw = model.predict(ds)
    if model.loss == "logistic":
        proba = model.predict_proba(ds)
        return ["raw_score", "probability"], \
            [[repr(float(r)), repr(float(p))] for r, p in zip(raw, proba)]
    return ["prediction"], [[repr(float(r))] for r in raw]


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    schema = _load_schema_file(args.schema) if args.schema else _schema_from_model(model)
    ds, _ = load_known_columns(args.input, schema)
    header, rows = _predictions_table(model, ds)
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, dialect=_Dialect)
        writer.writerow(header)
        writer.writerows(rows)
    print(f"wrote {len(rows)} predictions -> {args.output}")
    return 0


def _importance_result(model, metric: str, normalized: bool) -> dict:
    ensembles = model.ensembles if isinstance(model, Classifier) else [model]
    merged_gain: dict[str, float] = {}
    merged_count: dict[str, float] = {}
    for ens in ensembles:
        report = stats.feature_importance(ens, metric="gain")
        for name, g, c in zip(report.feature_names, report.gain, report.split_count):
            merged_gain[name] = merged_gain.get(name, 0.0) + float(g)
            merged_count[name] = merged_count.get(name, 0.0) + float(c)
    values = merged_gain if metric == "gain" else merged_count
    if normalized:
        total = sum(values.values())
        if total <= 0:
            raise StatsError("cannot normalize: total importance is zero")
        values = {k: v / total for k, v in values.items()}
    ranking = sorted(values.items(), key=lambda kv: (-kv[1], kv[0]))
    return {"metric": metric, "normalized": normalized,
            "ranking": [{"feature": k, "value": v} for k, v in ranking]}


def _cmd_importance(args) -> int:
    model = load_model(args.model)
    result = _importance_result(model, args.metric, args.normalized)
    table = (["feature", "value"],
             [[r["feature"], repr(float(r["value"]))] for r in result["ranking"]])
    _write_result(result, args.output, table)
    return 0


def _cmd_chi2(args) -> int:
    ds = _load_input(args)
    table = stats.contingency_table(ds, args.a, args.b)
    res = stats.chi_squared_test(table)
    result = {"a": args.a, "b": args.b, "table": table.to_dict(), **res.to_dict()}
    csv_table = (["a", "b", "statistic", "dof", "p_value"],
                 [[args.a, args.b, res.statistic, res.dof, res.p_value]])
    _write_result(result, args.output, csv_table)
    return 0


def _cmd_anova(args) -> int:
    ds = _load_input(args)
    if args.factor2 is not None:
        table = stats.two_way_anova(ds, args.response, args.factor, args.factor2)
    else:
        table = stats.one_way_anova(ds, args.response, args.factor)
    rows = table.to_rows()
    header = ["term", "sum_sq", "dof", "mean_sq", "F", "p_value"]
    _write_result({"response": args.response, "rows": rows}, args.output,
                  (header, [[r[h] for h in header] for r in rows]))
    return 0


def _cmd_corr(args) -> int:
    ds = _load_input(args)
    columns = [c.strip() for c in args.columns.split(",") if c.strip()]
    corr = stats.pearson_correlation_matrix(ds, columns)
    result = corr.to_dict()
    header = ["matrix", "label"] + result["labels"]
    rows = []
    for kind in ("r", "r_squared"):
        for lbl, vals in zip(result["labels"], result[kind]):
            rows.append([kind, lbl] + vals)
    _write_result(result, args.output, (header, rows))
    return 0


def _cmd_summary(args) -> int:
    ds = _load_input(args)
    by = [c.strip() for c in args.by.split(",") if c.strip()]
    groups = stats.group_summary(ds, args.value, by)
    result = {"value": args.value, "by": by, "groups": [g.to_dict() for g in groups]}
    header = ["group", "count", "mean", "median", "q1", "q3", "min", "max"]
    rows = [["|".join(g.group), g.count, g.mean, g.median, g.q1, g.q3,
             g.minimum, g.maximum] for g in groups]
    _write_result(result, args.output, (header, rows))
    return 0


def _cmd_report(args) -> int:
    model = load_model(args.model)
    ensembles = model.ensembles if isinstance(model, Classifier) else [model]
    result = {
        "kind": "classifier" if isinstance(model, Classifier) else "ensemble",
        "classes": model.classes if isinstance(model, Classifier) else None,
        "loss": ensembles[0].loss,
        "n_trees": sum(len(e.trees) for e in ensembles),
        "n_features": len(ensembles[0].feature_names),
        "feature_names": ensembles[0].feature_names,
        "config": ensembles[0].config,
        "importance_gain": _importance_result(model, "gain", False)["ranking"],
        "importance_split_count": _importance_result(model, "split_count", False)["ranking"],
    }
    _write_result(result, args.output)
    return 0


def _add_io_flags(p, schema=True, output=True):
    p.add_argument("--input", required=True, help="input CSV path")
    if schema:
        p.add_argument("--schema", help="JSON schema file for the CSV")
    if output:
        p.add_argument("--output", help="output file (.json, or .csv where supported)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boostlab",
        description="Gradient-boosted trees (level-wise, leaf-wise, oblivious) "
                    "with a statistics toolkit and replication recipes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a CSV and emit its summary")
    _add_io_flags(p)
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("recipe", help="run a named replication recipe")
    p.add_argument("--recipe", required=True,
                   help=f"one of: {', '.join(available_recipes())} (or a JSON path)")
    p.add_argument("--input", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict-shapes", action="store_true",
                   help="treat documented-shape mismatches as errors")
    p.set_defaults(fn=_cmd_recipe)

    p = sub.add_parser("train", help="train a model and save it as JSON")
    _add_io_flags(p, output=False)
    p.add_argument("--target", help="column to use as the target")
    p.add_argument("--output", required=True, help="model file to write")
    p.add_argument("--loss", default="squared_error", choices=["squared_error", "logistic"])
    p.add_argument("--grower", default="level_wise",
                   choices=["level_wise", "leaf_wise", "oblivious"])
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--lambda", dest="lambda_", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--max-depth", type=int, default=6)
    p.add_argument("--max-leaves", type=int, default=None)
    p.add_argument("--max-bins", type=int, default=256)
    p.add_argument("--goss-a", type=float, default=None)
    p.add_argument("--goss-b", type=float, default=None)
    p.add_argument("--efb-max-conflicts", type=int, default=None)
    p.add_argument("--ordered-blocks", type=int, default=None)
    p.add_argument("--ordered-permutations", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("predict", help="score a CSV with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--schema", help="optional schema; defaults to the model's features")
    p.add_argument("--output", required=True, help="predictions CSV")
    p.set_defaults(fn=_cmd_predict)

    p = sub.add_parser("importance", help="feature importance of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--metric", default="gain", choices=["gain", "split_count"])
    p.add_argument("--normalized", action="store_true")
    p.add_argument("--output")
    p.set_defaults(fn=_cmd_importance)

    p = sub.add_parser("chi2", help="chi-squared independence test")
    _add_io_flags(p)
    p.add_argument("--a", required=True, help="first categorical column")
    p.add_argument("--b", required=True, help="second categorical column")
    p.set_defaults(fn=_cmd_chi2)

    p = sub.add_parser("anova", help="one-way (or additive two-way) ANOVA")
    _add_io_flags(p)
    p.add_argument("--response", required=True)
    p.add_argument("--factor", required=True)
    p.add_argument("--factor2", help="second factor for the additive two-way table")
    p.set_defaults(fn=_cmd_anova)

    p = sub.add_parser("corr", help="Pearson correlation matrix with R-squared")
    _add_io_flags(p)
    p.add_argument("--columns", required=True, help="comma-separated numeric columns")
    p.set_defaults(fn=_cmd_corr)

    p = sub.add_parser("summary", help="grouped count/mean/quartile table")
    _add_io_flags(p)
    p.add_argument("--value", required=True, help="numeric column to summarize")
    p.add_argument("--by", required=True, help="comma-separated categorical columns")
    p.set_defaults(fn=_cmd_summary)

    p = sub.add_parser("report", help="describe a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--output")
    p.set_defaults(fn=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ModelFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - runtime failures exit 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
