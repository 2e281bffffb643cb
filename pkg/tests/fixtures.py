"""Synthetic CSV fixtures shaped like the four recipe input files."""

import csv

import numpy as np

EDUCATIONS = ["8th grade or less", "High school", "Some college", "Associate degree",
              "Bachelor degree", "Master degree", "Doctorate", "Professional degree",
              "GED", "9-12th grade no diploma", "Unknown", "Graduate degree"]
RACES = ["Hispanic", "Non-Hispanic White", "Non-Hispanic Black"]

MEXICAN_COLUMNS = ["id", "sex", "patient-type", "entry-date", "date-symptoms",
                   "date-died", "intubed", "pneumonia", "age", "pregnancy",
                   "diabetes", "copd", "asthma", "inmsupr", "hypertension",
                   "other-disease", "cardiovascular", "obesity", "renal-chronic",
                   "tobacco", "contact-other-covid", "cov-res", "icu"]

REGION_CONDITIONS = ["AllCause", "AllNatural", "Septicemia", "Malignant Neoplasms",
                     "Diabetes Mellitus", "Alzheimer Disease", "Influenza and Pneumonia",
                     "Chronic Lower Respiratory Diseases", "Diseases of Heart",
                     "Cerebrovascular Diseases", "COVID-19 (Multiple Cause of Death)",
                     "COVID-19 (Underlying Cause of Death)"]


def _write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_education_csv(path, seed=0):
    """72 rows x 8 columns, no missing values, nonzero total deaths."""
    rng = np.random.default_rng(seed)
    header = ["Data as of", "Start Date", "End Date", "Sex", "Education", "Race",
              "COVID-19 Deaths", "Total Deaths"]
    rows = []
    for edu in EDUCATIONS:
        for race in RACES:
            for sex in ("Male", "Female"):
                total = int(rng.integers(200, 5000))
                frac = rng.uniform(0.05, 0.30)
                if race == "Hispanic":
                    frac += 0.05
                rows.append(["2022-03-01", "2020-01-01", "2021-12-31", sex, edu,
                             race, int(total * frac), total])
    assert len(rows) == 72
    _write(path, header, rows)
    return path


def write_region_csv(path, seed=0, n_rows=3410, n_complete=1252):
    """Raw 3410x36 file whose 15 recipe columns leave 1252 complete rows."""
    rng = np.random.default_rng(seed)
    schema_cols = (["Date Of Death Year", "AgeGroup", "HHS Region"] + REGION_CONDITIONS)
    junk_cols = [f"Unused{k}" for k in range(36 - len(schema_cols))]
    header = schema_cols + junk_cols
    complete = set(rng.choice(n_rows, size=n_complete, replace=False).tolist())
    age_groups = ["0-24", "25-44", "45-64", "65-74", "75-84", "85+"]
    rows = []
    for i in range(n_rows):
        year = int(rng.integers(2019, 2022))
        age = age_groups[int(rng.integers(len(age_groups)))]
        region = f"Region {int(rng.integers(1, 11))}"
        base = rng.uniform(50, 400)
        covid_u = rng.uniform(0, 80) + 0.2 * base
        conditions = [
            base * 4 + covid_u, base * 3.5 + covid_u * 0.9,
            rng.uniform(0, 30), rng.uniform(10, 120),
            rng.uniform(5, 60) + 0.3 * covid_u, rng.uniform(0, 50),
            rng.uniform(0, 40), rng.uniform(5, 70), rng.uniform(20, 200),
            rng.uniform(5, 60), covid_u * 1.1 + rng.uniform(0, 10), covid_u,
        ]
        row = [year, age, region] + [round(c, 2) for c in conditions]
        if i not in complete:
            hole = int(rng.integers(3, len(schema_cols)))
            row[hole] = ""  # the schema marks "" as the missing token
        row += [int(rng.integers(0, 9)) for _ in junk_cols]
        rows.append(row)
    _write(path, header, rows)
    return path


def write_mexican_csv(path, n=50, seed=0):
    """Small file with the real 23-column layout and a planted
    diabetes/cov-res association."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        diabetes = int(rng.choice([1, 2], p=[0.35, 0.65]))
        if diabetes == 1:
            covres = int(rng.choice([1, 2, 3], p=[0.70, 0.20, 0.10]))
        else:
            covres = int(rng.choice([1, 2, 3], p=[0.25, 0.65, 0.10]))
        rows.append([
            f"p{i:05d}", int(rng.choice([1, 2])), int(rng.choice([1, 2])),
            "01-01-2021", "01-01-2021", "9999-99-99",
            int(rng.choice([1, 2, 97])), int(rng.choice([1, 2])),
            int(rng.integers(1, 95)), int(rng.choice([1, 2, 97, 98])),
            diabetes, int(rng.choice([1, 2])), int(rng.choice([1, 2])),
            int(rng.choice([1, 2])), int(rng.choice([1, 2])), int(rng.choice([1, 2])),
            int(rng.choice([1, 2])), int(rng.choice([1, 2])), int(rng.choice([1, 2])),
            int(rng.choice([1, 2])), int(rng.choice([1, 2, 99])), covres,
            int(rng.choice([1, 2, 97])),
        ])
    _write(path, MEXICAN_COLUMNS, rows)
    return path


def write_covid19_csv(path, seed=0, with_population=True):
    """24 states x 13 documented columns (plus the user-supplied population)."""
    rng = np.random.default_rng(seed)
    header = ["State", "Total-Cases", "One-Dose", "Full-Dose", "COV-Boost",
              "Mask-Usage", "Mask-Mandate", "Age", "Male-Percentage", "Diabetes",
              "Obesity", "Heart-Disease", "Smoking"]
    if with_population:
        header = header + ["State-Population"]
    rows = []
    for i in range(24):
        pop = int(rng.integers(600_000, 30_000_000))
        full = rng.uniform(40, 80)
        boost = rng.uniform(10, 45)
        cases_pct = max(2.0, 20.0 - 0.12 * full - 0.08 * boost + rng.normal(0, 1.5))
        row = [f"State{i:02d}", int(pop * cases_pct / 100), round(full * 1.1, 1),
               round(full, 1), round(boost, 1), round(rng.uniform(40, 95), 1),
               rng.choice(["Yes", "No"]), round(rng.uniform(34, 45), 1),
               round(rng.uniform(47, 52), 1), round(rng.uniform(7, 14), 1),
               round(rng.uniform(22, 38), 1), round(rng.uniform(5, 10), 1),
               round(rng.uniform(12, 25), 1)]
        if with_population:
            row.append(pop)
        rows.append(row)
    _write(path, header, rows)
    return path
