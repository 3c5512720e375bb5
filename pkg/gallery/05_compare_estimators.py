# %% [markdown]
# HT, linear regression (GREG), one-step spline and SBLL on a nonlinear
# population: the MSE ratio against SBLL shows what smoothing buys.

# %%
from sbll_survey.montecarlo import SimConfig, run_cell, summarize

cell = run_cell(SimConfig(model=2, n=100, sigma0=0.4, reps=200, seed=1))
csv_text, table = summarize([cell])
print(table)
for name, s in cell.summaries.items():
    print(f"{name:5s} MSE / MSE(SBLL) = {s.mse_ratio:7.2f}")
