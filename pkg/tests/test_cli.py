import json

import numpy as np
import pytest

from boostlab.cli import main

from fixtures import write_education_csv, write_mexican_csv


def write_schema(path, entries):
    path.write_text(json.dumps(entries), encoding="utf-8")
    return path


def make_training_csv(path, n=60, seed=0):
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=n)
    x1 = rng.normal(size=n)
    y = 2.0 * x0 - x1 + rng.normal(scale=0.05, size=n)
    lines = ["x0,x1,y"] + [f"{float(a)!r},{float(b)!r},{float(c)!r}"
                           for a, b, c in zip(x0, x1, y)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


REG_SCHEMA = [{"name": "x0"}, {"name": "x1"}, {"name": "y", "kind": "target"}]


class TestIngest:
    def test_summary_json(self, tmp_path, capsys):
        csv_path = make_training_csv(tmp_path / "d.csv")
        schema = write_schema(tmp_path / "s.json", REG_SCHEMA)
        out = tmp_path / "summary.json"
        code = main(["ingest", "--input", str(csv_path), "--schema", str(schema),
                     "--output", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["n_rows"] == 60
        assert [c["name"] for c in doc["columns"]] == ["x0", "x1", "y"]

    def test_missing_schema_is_validation_error(self, tmp_path):
        csv_path = make_training_csv(tmp_path / "d.csv")
        assert main(["ingest", "--input", str(csv_path)]) == 2

    def test_bad_file_is_validation_error(self, tmp_path):
        schema = write_schema(tmp_path / "s.json", REG_SCHEMA)
        assert main(["ingest", "--input", str(tmp_path / "none.csv"),
                     "--schema", str(schema)]) == 2


class TestTrainPredict:
    def train(self, tmp_path, *extra):
        csv_path = make_training_csv(tmp_path / "d.csv")
        schema = write_schema(tmp_path / "s.json", REG_SCHEMA)
        model = tmp_path / "model.json"
        code = main(["train", "--input", str(csv_path), "--schema", str(schema),
                     "--output", str(model), "--trees", "10", "--max-depth", "3",
                     *extra])
        assert code == 0
        return csv_path, schema, model

    def test_round_trip_predictions_are_byte_identical(self, tmp_path):
        csv_path, schema, model = self.train(tmp_path)
        p1 = tmp_path / "p1.csv"
        p2 = tmp_path / "p2.csv"
        assert main(["predict", "--model", str(model), "--input", str(csv_path),
                     "--output", str(p1)]) == 0
        # reload the model through its file and predict again
        assert main(["predict", "--model", str(model), "--input", str(csv_path),
                     "--output", str(p2)]) == 0
        assert p1.read_bytes() == p2.read_bytes()
        assert p1.read_text().splitlines()[0] == "prediction"

    def test_train_is_deterministic(self, tmp_path):
        _, _, m1 = self.train(tmp_path)
        text1 = m1.read_bytes()
        _, _, m2 = self.train(tmp_path)
        assert text1 == m2.read_bytes()

    def test_corrupt_model_exits_1(self, tmp_path):
        csv_path, schema, model = self.train(tmp_path)
        corrupted = model.read_text()[:-5]
        model.write_text(corrupted)
        out = tmp_path / "p.csv"
        assert main(["predict", "--model", str(model), "--input", str(csv_path),
                     "--output", str(out)]) == 1

    def test_ordered_oblivious_flags_route(self, tmp_path):
        _, _, model = self.train(tmp_path, "--grower", "oblivious",
                                 "--ordered-blocks", "4")
        doc = json.loads(model.read_text())
        assert doc["config"]["grower"] == "oblivious"
        assert doc["config"]["ordered_blocks"] == 4
        assert all("level_splits" in t for t in doc["trees"])

    def test_goss_flags_route(self, tmp_path):
        _, _, model = self.train(tmp_path, "--grower", "leaf_wise",
                                 "--goss-a", "0.4", "--goss-b", "0.4")
        doc = json.loads(model.read_text())
        assert doc["config"]["goss_a"] == 0.4

    def test_invalid_flag_combo_exits_2(self, tmp_path):
        csv_path = make_training_csv(tmp_path / "d.csv")
        schema = write_schema(tmp_path / "s.json", REG_SCHEMA)
        code = main(["train", "--input", str(csv_path), "--schema", str(schema),
                     "--output", str(tmp_path / "m.json"), "--goss-a", "0.5",
                     "--goss-b", "0.2"])  # goss without leaf_wise
        assert code == 2

    def test_classification_via_target_flag(self, tmp_path):
        csv_path = write_mexican_csv(tmp_path / "mex.csv", n=60)
        schema_entries = [{"name": n, "kind": "categorical"}
                          for n in ("diabetes", "obesity", "tobacco", "cov-res")]
        schema = write_schema(tmp_path / "s.json", schema_entries)
        model = tmp_path / "clf.json"
        code = main(["train", "--input", str(csv_path), "--schema", str(schema),
                     "--target", "cov-res", "--loss", "logistic",
                     "--trees", "5", "--output", str(model)])
        assert code == 0
        doc = json.loads(model.read_text())
        assert doc["format"] == "boostlab.classifier"
        preds = tmp_path / "p.csv"
        assert main(["predict", "--model", str(model), "--input", str(csv_path),
                     "--output", str(preds)]) == 0
        header = preds.read_text().splitlines()[0]
        assert header.startswith("class,")


class TestImportanceAndReport:
    def test_importance_ranking(self, tmp_path):
        csv_path = make_training_csv(tmp_path / "d.csv")
        schema = write_schema(tmp_path / "s.json", REG_SCHEMA)
        model = tmp_path / "model.json"
        main(["train", "--input", str(csv_path), "--schema", str(schema),
              "--output", str(model), "--trees", "20"])
        out = tmp_path / "imp.json"
        assert main(["importance", "--model", str(model), "--normalized",
                     "--output", str(out)]) == 0
        doc = json.loads(out.read_text())
        ranking = doc["ranking"]
        assert ranking[0]["feature"] == "x0"  # dominant coefficient
        assert sum(r["value"] for r in ranking) == pytest.approx(1.0)
        csv_out = tmp_path / "imp.csv"
        assert main(["importance", "--model", str(model),
                     "--output", str(csv_out)]) == 0
        assert csv_out.read_text().splitlines()[0] == "feature,value"

    def test_report_describes_model(self, tmp_path):
        csv_path = make_training_csv(tmp_path / "d.csv")
        schema = write_schema(tmp_path / "s.json", REG_SCHEMA)
        model = tmp_path / "model.json"
        main(["train", "--input", str(csv_path), "--schema", str(schema),
              "--output", str(model), "--trees", "7"])
        out = tmp_path / "report.json"
        assert main(["report", "--model", str(model), "--output", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["n_trees"] == 7
        assert doc["loss"] == "squared_error"
        assert doc["feature_names"] == ["x0", "x1"]


class TestStatsCommands:
    def test_chi2_command(self, tmp_path):
        csv_path = write_mexican_csv(tmp_path / "mex.csv", n=80)
        schema = write_schema(tmp_path / "s.json",
                              [{"name": "diabetes", "kind": "categorical"},
                               {"name": "cov-res", "kind": "categorical"}])
        # lenient ingest is recipe-only; build a small file with just 2 cols
        import csv as _csv
        with open(csv_path) as fh:
            rows = list(_csv.reader(fh))
        header = rows[0]
        di = header.index("diabetes")
        ci = header.index("cov-res")
        small = tmp_path / "small.csv"
        with open(small, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["diabetes", "cov-res"])
            w.writerows([[r[di], r[ci]] for r in rows[1:]])
        out = tmp_path / "chi2.json"
        assert main(["chi2", "--input", str(small), "--schema", str(schema),
                     "--a", "diabetes", "--b", "cov-res", "--output", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["dof"] == 2  # three cov-res levels in the raw file
        assert 0.0 <= doc["p_value"] <= 1.0

    def test_anova_command_one_and_two_way(self, tmp_path):
        csv_path = write_education_csv(tmp_path / "edu.csv")
        schema = write_schema(tmp_path / "s.json", [
            {"name": "Data as of", "kind": "categorical"},
            {"name": "Start Date", "kind": "categorical"},
            {"name": "End Date", "kind": "categorical"},
            {"name": "Sex", "kind": "categorical"},
            {"name": "Education", "kind": "categorical"},
            {"name": "Race", "kind": "categorical"},
            {"name": "COVID-19 Deaths"}, {"name": "Total Deaths"}])
        out = tmp_path / "anova.json"
        assert main(["anova", "--input", str(csv_path), "--schema", str(schema),
                     "--response", "Total Deaths", "--factor", "Race",
                     "--output", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert [r["term"] for r in doc["rows"]] == ["Race", "Residual"]
        assert main(["anova", "--input", str(csv_path), "--schema", str(schema),
                     "--response", "Total Deaths", "--factor", "Race",
                     "--factor2", "Sex", "--output", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert [r["term"] for r in doc["rows"]] == ["Race", "Sex", "Residual"]

    def test_corr_command(self, tmp_path, capsys):
        csv_path = make_training_csv(tmp_path / "d.csv")
        schema = write_schema(tmp_path / "s.json", REG_SCHEMA)
        assert main(["corr", "--input", str(csv_path), "--schema", str(schema),
                     "--columns", "x0,x1,y"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["labels"] == ["x0", "x1", "y"]
        r = np.array(doc["r"], dtype=float)
        assert r[0, 2] > 0.5  # y is built mostly from x0

    def test_summary_command(self, tmp_path):
        csv_path = write_education_csv(tmp_path / "edu.csv")
        schema = write_schema(tmp_path / "s.json", [
            {"name": "Data as of", "kind": "categorical"},
            {"name": "Start Date", "kind": "categorical"},
            {"name": "End Date", "kind": "categorical"},
            {"name": "Sex", "kind": "categorical"},
            {"name": "Education", "kind": "categorical"},
            {"name": "Race", "kind": "categorical"},
            {"name": "COVID-19 Deaths"}, {"name": "Total Deaths"}])
        out = tmp_path / "summary.csv"
        assert main(["summary", "--input", str(csv_path), "--schema", str(schema),
                     "--value", "COVID-19 Deaths", "--by", "Race,Sex",
                     "--output", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "group,count,mean,median,q1,q3,min,max"
        assert len(lines) == 1 + 6  # 3 races x 2 sexes


class TestRecipeCommand:
    def test_recipe_end_to_end(self, tmp_path):
        csv_path = write_education_csv(tmp_path / "edu.csv")
        out_dir = tmp_path / "out"
        assert main(["recipe", "--recipe", "education-covid", "--input",
                     str(csv_path), "--output-dir", str(out_dir)]) == 0
        assert (out_dir / "education-covid" / "report.json").exists()

    def test_strict_shapes_flag(self, tmp_path):
        csv_path = write_education_csv(tmp_path / "edu.csv")
        lines = csv_path.read_text().splitlines()
        csv_path.write_text("\n".join(lines[:-1]) + "\n")
        assert main(["recipe", "--recipe", "education-covid", "--input",
                     str(csv_path), "--output-dir", str(tmp_path / "o"),
                     "--strict-shapes"]) == 2
