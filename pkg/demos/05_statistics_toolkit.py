"""The statistical side of the library: independence tests, ANOVA tables,
correlation matrices, grouped summaries, and model feature importance."""

import numpy as np

from boostlab import (BoostConfig, ColumnSchema, Dataset, chi_squared_test,
                      contingency_table, feature_importance, group_summary,
                      one_way_anova, pearson_correlation_matrix, train,
                      two_way_anova)

rng = np.random.default_rng(11)

# --- chi-squared independence test -------------------------------------------
n = 500
condition = rng.choice([0, 1], size=n, p=[0.7, 0.3]).astype(np.int32)
outcome = np.where(rng.random(n) < np.where(condition == 1, 0.65, 0.35), 0, 1)
ds = Dataset(
    [ColumnSchema("condition", "categorical"), ColumnSchema("outcome", "categorical")],
    {"condition": condition, "outcome": outcome.astype(np.int32)},
    {"condition": ["no", "yes"], "outcome": ["positive", "negative"]},
)
table = contingency_table(ds, "condition", "outcome")
res = chi_squared_test(table)
print("contingency counts:\n", table.counts)
print(f"chi2 = {res.statistic:.3f}, dof = {res.dof}, p = {res.p_value:.2e}\n")

# --- one- and two-way ANOVA ---------------------------------------------------
groups = np.repeat(["A", "B", "C"], 30)
sexes = np.tile(np.repeat(["m", "f"], 15), 3)
response = (rng.normal(size=90) + np.repeat([0.0, 0.8, 2.0], 30)
            + np.where(sexes == "f", 0.4, 0.0))
ads = Dataset(
    [ColumnSchema("y"), ColumnSchema("group", "categorical"),
     ColumnSchema("sex", "categorical")],
    {"y": response,
     "group": np.searchsorted(["A", "B", "C"], groups).astype(np.int32),
     "sex": (sexes == "m").astype(np.int32)},
    {"group": ["A", "B", "C"], "sex": ["f", "m"]},
)
one = one_way_anova(ads, "y", "group").terms[0]
print(f"one-way ANOVA by group: F = {one.f_stat:.2f}, Pr>F = {one.p_value:.2e}")
both = two_way_anova(ads, "y", "group", "sex")
for term in both.terms:
    print(f"two-way term {term.name:>5}: SS = {term.sum_sq:7.2f}, "
          f"F = {term.f_stat:6.2f}, Pr>F = {term.p_value:.3g}")
print()

# --- correlation with r-squared ----------------------------------------------
z = rng.normal(size=200)
cds = Dataset([ColumnSchema(c) for c in ("a", "b", "noise")],
              {"a": z + rng.normal(scale=0.3, size=200),
               "b": -z + rng.normal(scale=0.5, size=200),
               "noise": rng.normal(size=200)})
corr = pearson_correlation_matrix(cds, ["a", "b", "noise"])
print("correlation matrix (r):")
for label, row in zip(corr.labels, corr.matrix):
    print(f"  {label:>6}: " + "  ".join(f"{v:+.2f}" for v in row))
print()

# --- grouped box-plot numbers ---------------------------------------------
summaries = group_summary(ads, "y", ["group"])
print("group summaries (count, median, q1, q3):")
for s in summaries:
    print(f"  {s.group[0]}: n={s.count}, median={s.median:.2f}, "
          f"q1={s.q1:.2f}, q3={s.q3:.2f}")
print()

# --- feature importance from a trained ensemble ----------------------------
x0 = rng.normal(size=400)
x1 = rng.normal(size=400)
x2 = rng.normal(size=400)
target = np.where(x0 > 0, 2.0, -2.0) + 0.3 * x1
tds = Dataset([ColumnSchema(c) for c in ("x0", "x1", "x2")]
              + [ColumnSchema("y", "target")],
              {"x0": x0, "x1": x1, "x2": x2, "y": target})
ens = train(tds, BoostConfig(n_trees=40, max_depth=3, seed=0))
report = feature_importance(ens, metric="gain", normalized=True)
print("gain importance (fraction of total):")
for name, value in report.ranking():
    print(f"  {name}: {value:.3f}")
