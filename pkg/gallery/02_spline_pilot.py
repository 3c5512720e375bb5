# %% [markdown]
# Stage one: a design-weighted linear spline fit of every additive component.

# %%
import numpy as np

from sbll_survey import PopulationFrame, component_at, draw_srs, fit_pilot, knot_count, knots_for, make_srs

rng = np.random.default_rng(3)
N, n = 2000, 300
X = rng.random((N, 2))
y = np.sin(2 * np.pi * X[:, 0]) + 4 * (X[:, 1] - 0.5) ** 2 + 0.2 * rng.standard_normal(N)
frame = PopulationFrame(X, y)
sample = draw_srs(make_srs(N, n), frame, seed=11)

# %% knots: the rule grows like n^(1/4) log n but leaves room for n/2 parameters
J = knot_count(n, d=2)
spec = knots_for(frame, sample, J)
print("J =", J, " basis size =", spec.size)
print("first knots of x1:", np.round(spec.knots[0][:4], 3))

# %%
pilot = fit_pilot(sample, frame, spec)
grid = np.linspace(0, 1, 6)
print("m1 pilot:", np.round(component_at(pilot, 0, grid), 3))
print("m1 truth:", np.round(np.sin(2 * np.pi * grid) - np.sin(2 * np.pi * X[:, 0]).mean(), 3))

# %% components are centred with the design weights
print("weighted means:", pilot.weights @ pilot.sample_components() / N)
