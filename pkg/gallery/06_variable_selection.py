# %% [markdown]
# BIC selection of auxiliary variables. Ten uniform covariates are
# generated; Model 1 only uses x3 and x6.

# %%
from sbll_survey import backward_select, draw_srs, forward_select, make_srs
from sbll_survey.montecarlo import gen_population

frame = gen_population(1, N=1000, sigma0=0.1, seed=4)
sample = draw_srs(make_srs(1000, 200), frame, seed=3)

fwd = forward_select(sample, frame)
print("forward path:")
for subset, bic in fwd.path:
    print(f"  {bic:9.4f}  {[frame.column_names[c] for c in subset]}")
print("chosen:", [frame.column_names[c] for c in fwd.chosen], " d_max:", fwd.d_max)

# %%
bwd = backward_select(sample, frame)
print("backward chosen:", [frame.column_names[c] for c in bwd.chosen])
