#!/usr/bin/env python3
"""Writes data/anes_synthetic.csv: 200 synthetic respondents with ANES-like
columns and positive survey weights. No real survey data is used.

Deterministic: rerunning reproduces the checked-in file byte for byte.
"""
import csv
import pathlib

import numpy as np

ROWS = 200
SEED = 20240201

GENDER = ["Female", "Male", "Other"]
GENDER_P = [0.51, 0.47, 0.02]
RACE = ["White", "Black", "Hispanic", "Asian", "Native American", "Multiracial"]
RACE_P = [0.60, 0.13, 0.16, 0.06, 0.02, 0.03]
EDUCATION = [
    "No high school diploma",
    "High school graduate",
    "Some college",
    "2-year degree",
    "4-year degree",
    "Post-graduate degree",
]
EDUCATION_P = [0.08, 0.27, 0.20, 0.10, 0.22, 0.13]
REGION = ["Northeast", "Midwest", "South", "West"]
REGION_P = [0.17, 0.21, 0.38, 0.24]
IDEOLOGY = ["Very liberal", "Liberal", "Moderate", "Conservative", "Very conservative"]
IDEOLOGY_P = [0.10, 0.20, 0.35, 0.23, 0.12]
PARTY_BY_IDEOLOGY = {
    "Very liberal": (["Democrat", "Independent"], [0.85, 0.15]),
    "Liberal": (["Democrat", "Independent", "Republican"], [0.70, 0.25, 0.05]),
    "Moderate": (["Democrat", "Independent", "Republican"], [0.33, 0.40, 0.27]),
    "Conservative": (["Democrat", "Independent", "Republican"], [0.06, 0.24, 0.70]),
    "Very conservative": (["Independent", "Republican"], [0.12, 0.88]),
}
HAS_CHILD = ["Yes", "No"]
HAS_CHILD_P = [0.35, 0.65]
INCOME = [
    "Under $30,000",
    "$30,000 to $59,999",
    "$60,000 to $99,999",
    "$100,000 to $149,999",
    "$150,000 or more",
]
INCOME_P = [0.22, 0.24, 0.25, 0.16, 0.13]
MISSING_RATE = 0.04


def main() -> None:
    rng = np.random.default_rng(SEED)
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "anes_synthetic.csv"
    header = ["age", "gender", "race", "education", "region", "ideology", "party",
              "has_child", "income", "weight"]
    rows = []
    for _ in range(ROWS):
        ideology = rng.choice(IDEOLOGY, p=IDEOLOGY_P)
        parties, party_p = PARTY_BY_IDEOLOGY[ideology]
        row = {
            "age": str(int(rng.integers(18, 90))),
            "gender": rng.choice(GENDER, p=GENDER_P),
            "race": rng.choice(RACE, p=RACE_P),
            "education": rng.choice(EDUCATION, p=EDUCATION_P),
            "region": rng.choice(REGION, p=REGION_P),
            "ideology": ideology,
            "party": rng.choice(parties, p=party_p),
            "has_child": rng.choice(HAS_CHILD, p=HAS_CHILD_P),
            "income": rng.choice(INCOME, p=INCOME_P),
            "weight": f"{rng.lognormal(0.0, 0.45):.4f}",
        }
        for col in ("education", "income", "party"):
            if rng.random() < MISSING_RATE:
                row[col] = ""
        rows.append(row)

    with out.open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=header, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)

    weights = [float(r["weight"]) for r in rows]
    assert len(rows) == ROWS and min(weights) > 0
    print(f"wrote {out} ({len(rows)} rows, min weight {min(weights)})")


if __name__ == "__main__":
    main()
