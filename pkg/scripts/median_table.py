"""Print median outcomes per scenario from a summary.csv written by `schoolsim simulate`."""

import argparse
import csv
from collections import defaultdict

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("summary", help="path to summary.csv")
ap.add_argument("--stat", default="median", choices=["mean", "q25", "median", "q75", "min", "max"])
args = ap.parse_args()

table = defaultdict(dict)
with open(args.summary, newline="") as fh:
    for row in csv.DictReader(fh):
        table[row["scenario_id"]][row["outcome"]] = float(row[args.stat])

outcomes = sorted({o for cols in table.values() for o in cols})
width = max(len(s) for s in table)
print(f"{'scenario':<{width}}  " + "  ".join(f"{o[:24]:>24}" for o in outcomes))
for sid, cols in table.items():
    print(f"{sid:<{width}}  " + "  ".join(f"{cols[o]:>24.4f}" for o in outcomes))
