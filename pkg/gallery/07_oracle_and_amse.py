# %% [markdown]
# The population ("oracle") fit: the same pipeline run on a census with unit
# weights. Its residuals give the anticipated MSE that the sample variance
# estimator targets.

# %%
import itertools

import numpy as np

from sbll_survey import SampleData, draw_srs, estimate, make_srs
from sbll_survey.montecarlo import MODELS, gen_population
from sbll_survey.oracle import amse, oracle_for, oracle_total
from sbll_survey.splinebasis import PopulationFrame

frame = gen_population(3, N=1000, sigma0=0.4, seed=6)
fit = oracle_for(frame, 200, MODELS[3]["active"])
design = make_srs(1000, 200)
print("N^2 AMSE       :", 1000**2 * amse(fit, design))

v = [estimate(draw_srs(design, frame, seed=(6, r)), frame, "sbll", MODELS[3]["active"]).variance_ht
     for r in range(100)]
print("mean N^2 V (100):", 1000**2 * np.mean(v))

# %% on a tiny population the difference estimator is exactly unbiased
x = np.array([0.05, 0.2, 0.4, 0.55, 0.8, 1.0])
tiny = PopulationFrame(x[:, None], np.array([1.0, 2.6, 1.9, 3.3, 2.4, 4.0]))
tfit = oracle_for(tiny, 3)
d = make_srs(6, 3)
tot = [oracle_total(tfit, SampleData(list(s), tiny.responses[list(s)], d))
       for s in itertools.combinations(range(6), 3)]
print("mean over 20 samples:", np.mean(tot), " truth:", tiny.total)
print("enumerated variance :", np.var(np.array(tot) / 6), " exact AMSE:", amse(tfit, d, exact=True))
