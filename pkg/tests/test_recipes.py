import json

import numpy as np
import pytest

from boostlab.recipes import (RecipeError, available_recipes, load_recipe,
                              run_recipe)

from fixtures import (write_covid19_csv, write_education_csv, write_mexican_csv,
                      write_region_csv)


def test_all_four_recipes_ship():
    assert available_recipes() == ["covid19-vax", "education-covid",
                                   "mexican-covid", "region-health"]


def test_unknown_recipe_rejected():
    with pytest.raises(RecipeError, match="unknown recipe"):
        load_recipe("nope")


class TestEducationRecipe:
    def test_full_run_on_shape_exact_fixture(self, tmp_path):
        csv_path = write_education_csv(tmp_path / "edu.csv")
        bundle = run_recipe("education-covid", csv_path, output_dir=tmp_path / "out")
        assert bundle["warnings"] == []
        assert bundle["rows_after_preprocess"] == 72
        assert bundle["columns_after_preprocess"] == 9  # CTDPercentage added
        anova = bundle["analyses"]["anova_education_race"]
        terms = {r["term"]: r for r in anova["rows"]}
        assert set(terms) == {"Education", "Race", "Residual"}
        assert 0.0 <= terms["Race"]["p_value"] <= 1.0
        for analysis in ("boxplot_by_race", "boxplot_by_education",
                         "interaction_education_race"):
            assert analysis in bundle["analyses"]
            out_json = tmp_path / "out" / "education-covid" / f"{analysis}.json"
            out_csv = tmp_path / "out" / "education-covid" / f"{analysis}.csv"
            assert out_json.exists() and out_csv.exists()

    def test_race_groups_cover_fixture(self, tmp_path):
        csv_path = write_education_csv(tmp_path / "edu.csv")
        bundle = run_recipe("education-covid", csv_path)
        groups = bundle["analyses"]["boxplot_by_race"]["groups"]
        assert {g["group"][0] for g in groups} == {"Hispanic", "Non-Hispanic White",
                                                   "Non-Hispanic Black"}
        assert all(g["count"] == 24 for g in groups)

    def test_strict_mode_rejects_wrong_shape(self, tmp_path):
        csv_path = write_education_csv(tmp_path / "edu.csv")
        # drop a row so the documented 72x8 check fails
        lines = csv_path.read_text().splitlines()
        csv_path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(RecipeError, match="71"):
            run_recipe("education-covid", csv_path, strict_shapes=True)
        bundle = run_recipe("education-covid", csv_path, strict_shapes=False)
        assert any("71" in w for w in bundle["warnings"])


class TestRegionRecipe:
    def test_cleaning_reaches_documented_shape(self, tmp_path):
        csv_path = write_region_csv(tmp_path / "region.csv")
        bundle = run_recipe("region-health", csv_path, output_dir=tmp_path / "out")
        assert bundle["warnings"] == []
        assert bundle["rows_after_preprocess"] == 1252
        assert bundle["columns_after_preprocess"] == 15

    def test_correlation_and_regression_outputs(self, tmp_path):
        csv_path = write_region_csv(tmp_path / "region.csv")
        bundle = run_recipe("region-health", csv_path)
        corr = bundle["analyses"]["condition_correlation"]
        assert len(corr["labels"]) == 12
        mat = np.array(corr["r"], dtype=float)
        assert mat.shape == (12, 12)
        reg = bundle["analyses"]["covid_regression"]
        assert reg["train_rows"] == 939 and reg["test_rows"] == 313
        assert abs(reg["observed_fraction"] - 0.75) < 0.01
        assert reg["rmse_train"] < reg["rmse_test"] * 2  # sanity, not a bound
        assert len(reg["ranking"]) == 10
        # the fixture builds the target into AllCause/AllNatural most strongly
        top3 = {r["feature"] for r in reg["ranking"][:3]}
        assert top3 & {"AllCause", "AllNatural"}


class TestMexicanRecipe:
    def test_fifty_row_fixture_runs_all_analyses(self, tmp_path):
        csv_path = write_mexican_csv(tmp_path / "mex.csv", n=50)
        bundle = run_recipe("mexican-covid", csv_path, output_dir=tmp_path / "out")
        names = set(bundle["analyses"])
        assert {"chi2_diabetes", "chi2_asthma", "chi2_cardiovascular",
                "chi2_hypertension", "chi2_renal_chronic", "chi2_tobacco"} <= names
        assert {"oblivious_10_full", "oblivious_100_full", "oblivious_1000_full",
                "oblivious_10_modified", "oblivious_100_modified",
                "oblivious_1000_modified", "level_wise_modified",
                "leaf_wise_2000_modified"} <= names
        chi = bundle["analyses"]["chi2_diabetes"]
        assert chi["dof"] == 1
        assert 0.0 <= chi["p_value"] <= 1.0
        # pending results (label 3) filtered, so only two outcome classes remain
        assert len(chi["table"]["col_labels"]) == 2
        for name in ("oblivious_1000_full", "leaf_wise_2000_modified"):
            imp = bundle["analyses"][name]
            assert imp["classes"] == [1.0, 2.0]
            assert len(imp["ranking"]) >= 10
        # giveaway features only appear in the full runs
        full_feats = {r["feature"] for r in
                      bundle["analyses"]["oblivious_10_full"]["ranking"]}
        mod_feats = {r["feature"] for r in
                     bundle["analyses"]["oblivious_10_modified"]["ranking"]}
        assert "intubed" in full_feats and "intubed" not in mod_feats

    def test_planted_association_is_detected(self, tmp_path):
        csv_path = write_mexican_csv(tmp_path / "mex.csv", n=400, seed=3)
        recipe = load_recipe("mexican-covid")
        recipe.analyses = [a for a in recipe.analyses
                           if a["name"] in ("chi2_diabetes", "oblivious_100_modified")]
        bundle = run_recipe(recipe, csv_path)
        assert bundle["analyses"]["chi2_diabetes"]["p_value"] < 0.001
        imp = bundle["analyses"]["oblivious_100_modified"]
        top5 = [r["feature"] for r in imp["ranking"][:5]]
        assert "diabetes" in top5


class TestCovid19Recipe:
    def test_with_population(self, tmp_path):
        csv_path = write_covid19_csv(tmp_path / "vax.csv", with_population=True)
        bundle = run_recipe("covid19-vax", csv_path, output_dir=tmp_path / "out")
        assert bundle["warnings"] == []
        assert bundle["rows_after_preprocess"] == 24
        assert bundle["columns_after_preprocess"] == 15
        corr = bundle["analyses"]["vaccination_correlation"]
        labels = corr["labels"]
        mat = np.array(corr["r"], dtype=float)
        i = labels.index("Full-Dose")
        j = labels.index("State-Cases-Percentage")
        assert mat[i, j] < 0  # vaccination anti-correlates with case share

    def test_without_population_skips_derivation(self, tmp_path):
        csv_path = write_covid19_csv(tmp_path / "vax.csv", with_population=False)
        bundle = run_recipe("covid19-vax", csv_path)
        assert any("State-Cases-Percentage" in w for w in bundle["warnings"])
        assert "vaccination_correlation" not in bundle["analyses"]
        assert "cases_by_mask_mandate" not in bundle["analyses"]


class TestDeterminism:
    def test_repeated_runs_write_identical_bytes(self, tmp_path):
        csv_path = write_mexican_csv(tmp_path / "mex.csv", n=40)
        out1 = tmp_path / "o1"
        out2 = tmp_path / "o2"
        run_recipe("mexican-covid", csv_path, output_dir=out1, seed=0)
        run_recipe("mexican-covid", csv_path, output_dir=out2, seed=0)
        files1 = sorted(p.relative_to(out1) for p in out1.rglob("*") if p.is_file())
        files2 = sorted(p.relative_to(out2) for p in out2.rglob("*") if p.is_file())
        assert files1 == files2
        for rel in files1:
            assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes(), rel

    def test_seed_recorded_in_report(self, tmp_path):
        csv_path = write_education_csv(tmp_path / "edu.csv")
        out = tmp_path / "out"
        run_recipe("education-covid", csv_path, output_dir=out, seed=17)
        report = json.loads((out / "education-covid" / "report.json").read_text())
        assert report["seed"] == 17
