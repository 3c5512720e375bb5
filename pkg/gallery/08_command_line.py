# %% [markdown]
# The command-line front end on CSV files, driven from Python.

# %%
import csv
import tempfile
from pathlib import Path

import numpy as np

from sbll_survey.cli import main
from sbll_survey.montecarlo import gen_population

work = Path(tempfile.mkdtemp())
frame = gen_population(1, N=500, sigma0=0.2, d_total=6, seed=8)
ids = [f"u{k}" for k in range(500)]
with open(work / "pop.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["id", *frame.column_names])
    w.writerows([i, *map(float, row)] for i, row in zip(ids, frame.covariates))
take = np.sort(np.random.default_rng(0).choice(500, 100, replace=False))
with open(work / "sample.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["id", "y"])
    w.writerows([ids[k], float(frame.responses[k])] for k in take)

# %%
main(["estimate", str(work / "pop.csv"), str(work / "sample.csv"), "--vars", "x3,x6",
      "--weights-out", str(work / "weights.csv")])
print((work / "weights.csv").read_text().splitlines()[:3])

# %%
main(["select", str(work / "pop.csv"), str(work / "sample.csv")])
