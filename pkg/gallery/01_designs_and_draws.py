# %% [markdown]
# Simple random sampling: inclusion probabilities and reproducible draws.

# %%
import numpy as np

from sbll_survey import PopulationFrame, delta, draw_srs, make_srs

design = make_srs(1000, 100)
print("pi_i      ", design.pi)
print("pi_ij     ", design.pi_pair)
print("Delta_ii  ", delta(design, 0, 0))
print("Delta_ij  ", delta(design, 0, 1))

# %% the same seed always gives the same sample
rng = np.random.default_rng(1)
frame = PopulationFrame(rng.random((1000, 3)), rng.normal(size=1000))
a = draw_srs(design, frame, seed=42)
b = draw_srs(design, frame, seed=42)
print("identical draws:", np.array_equal(a.indices, b.indices))

# %% tuple seeds split streams: (master seed, replication)
firsts = [draw_srs(design, frame, seed=(7, rep)).indices[:5] for rep in range(3)]
for rep, idx in enumerate(firsts):
    print(f"rep {rep}:", idx)

# %% every unit is equally likely to be drawn
small = make_srs(10, 3)
gen = np.random.default_rng(0)
freq = np.bincount(np.concatenate([small.draw(gen) for _ in range(5000)]), minlength=10) / 5000
print("inclusion frequencies:", np.round(freq, 3))
