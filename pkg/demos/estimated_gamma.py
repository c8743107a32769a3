"""
Plug-in gamma from the data
===========================

In practice m0 and delta are unknown.  A two-component mixture with the
null fixed at N(0, 1) is fitted by EM to the z-scores, and the fitted
values are passed to the gamma solver.
"""

import numpy as np
from scipy import stats

from scaledmt.asymptotic import AsymptoticProblem, optimal_gamma
from scaledmt.estimation import em_fit, estimated_optimal_gamma

rng = np.random.default_rng(2024)
m, m1, delta = 5000, 500, 3.0
z = rng.standard_normal(m)
z[:m1] += delta
p = stats.norm.sf(z)

fit = em_fit(z)
print(f"EM: pi0={fit.pi0:.4f} (true {1 - m1 / m}), delta={fit.delta:.3f} (true {delta}), "
      f"{fit.iterations} iterations")

# %%
for lam in (1.5, 4.0, 10.0):
    est = estimated_optimal_gamma(0.05, lam, pvalues=p)
    known = optimal_gamma(AsymptoticProblem.gaussian(m, m - m1, delta, lam=lam))
    print(f"lambda={lam:5.1f}: plug-in gamma={est.gamma:.3f}, known-parameter gamma={known.gamma:.3f}")

# %%
# Without any signal the fit is flagged and the default gamma = 0.5 is used.
null = estimated_optimal_gamma(0.05, 4.0, zscores=rng.standard_normal(m))
print("all-null data: gamma", null.gamma, "fallback", null.fallback)
