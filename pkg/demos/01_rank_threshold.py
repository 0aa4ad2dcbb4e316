# %% [markdown]
# How many random settings does a pair need?
#
# A pair system becomes solvable once the configurations it observes give a
# rank-51 slice of the coefficient matrix.  Whether that happens depends only
# on the random preparation/measurement table, so it can be studied without
# simulating any dynamics.

# %%
import numpy as np

from liouvlearn import rank_analysis as ra

r_grid = np.arange(20, 221, 10)
scan = ra.single_pair_rank_probability(r_grid, n_samples=1000, seed=0)

print("  R   p(R)   +-")
for r, p, se in zip(scan.r_values, scan.probabilities, scan.stderr):
    print(f"{r:4d}  {p:5.3f}  {se:.3f}")
print("first R with a full-rank draw:", scan.threshold)

# %% [markdown]
# The curve has the shape of a Gumbel CDF, exp(-exp(-(R - R0)/mu)).

# %%
fit = ra.fit_gumbel(scan)
print(f"R0 = {fit.r0:.2f} +- {fit.r0_se:.2f}, mu = {fit.mu:.2f} +- {fit.mu_se:.2f}")
print("max misfit:", float(np.max(np.abs(fit(r_grid) - scan.probabilities))))

# %% [markdown]
# Treating the pairs as independent, all N(N-1)/2 pairs are full rank with
# probability p(R)^(N(N-1)/2).  Inverting gives a budget for a target success
# probability, which grows only logarithmically with N.

# %%
for n in (2, 4, 10, 50):
    print(f"N = {n:3d}: R(0.5) = {ra.recommend_r(n, 0.5, fit):4d}, "
          f"R(0.99) = {ra.recommend_r(n, 0.99, fit):4d}")

# %%
small = ra.multi_pair_rank_probability([60, 80, 100, 120], [2, 4, 6], n_samples=300, seed=1)
print("p(R, N) with N = 2, 4, 6 in columns")
print(np.column_stack([small.r_values, small.probabilities]).round(3))
print("independent-pairs prediction")
print(np.column_stack([ra.independence_prediction(small.probabilities[:, 0], n)
                       for n in (2, 4, 6)]).round(3))
