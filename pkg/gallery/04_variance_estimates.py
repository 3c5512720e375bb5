# %% [markdown]
# Variance estimates and a normal-theory interval. V is the HT double sum of
# residuals; V_g weights the residuals by g. Both are for N^-1 times the total.

# %%
import numpy as np

from sbll_survey import draw_srs, estimate, make_srs
from sbll_survey.montecarlo import gen_population

frame = gen_population(1, N=1000, sigma0=0.4, seed=2)
design = make_srs(1000, 200)
rep = estimate(draw_srs(design, frame, seed=9), frame, "sbll", [2, 5])
print(f"total {rep.total:.2f}  se(V) {rep.se_ht:.2f}  se(V_g) {rep.se_g:.2f}")
print(f"95% interval: {rep.total - 1.96 * rep.se_ht:.2f} .. {rep.total + 1.96 * rep.se_ht:.2f}"
      f"   (truth {frame.total:.2f})")

# %% coverage over a few hundred samples
hits = 0
for r in range(300):
    e = estimate(draw_srs(design, frame, seed=(9, r)), frame, "sbll", [2, 5])
    hits += abs(e.total - frame.total) <= 1.96 * e.se_ht
print("coverage:", hits / 300)
