# %% [markdown]
# Stage two and the estimator: local linear re-smoothing, the total and its
# g-weights. The weights depend on the covariates only and reproduce the
# population totals of every auxiliary variable.

# %%
import numpy as np

from sbll_survey import default_spec, draw_srs, make_srs, rot_kernel, sbll_fit, sbll_total
from sbll_survey.montecarlo import gen_population

frame = gen_population(3, N=1000, sigma0=0.1, seed=5)
sample = draw_srs(make_srs(1000, 200), frame, seed=1)
cols = [1, 4, 7]

spec = default_spec(sample, frame, cols)
kernel = rot_kernel(sample, frame, spec)
fit = sbll_fit(sample, frame, spec, kernel)
print("bandwidths:", np.round(kernel.bandwidths, 4))
print("diagnostics:", fit.diagnostics)

# %%
t_hat = sbll_total(fit, sample)
print(f"true total {frame.total:10.3f}")
print(f"SBLL total {t_hat:10.3f}")
print(f"HT total   {fit.pilot.ht_total:10.3f}")

# %% calibration: weighted sample totals equal population totals
w = fit.g_weights / sample.pi
print("sum g y / pi - total:", w @ sample.responses - t_hat)
for c in cols:
    print(f"x{c + 1}: weighted {w @ frame.covariates[sample.indices, c]:9.4f}"
          f"  population {frame.covariates[:, c].sum():9.4f}")
print("g range:", np.round([fit.g_weights.min(), fit.g_weights.max()], 3))
