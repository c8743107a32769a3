"""
The price of a false positive
=============================

One null statistic N(0, 1) and one alternative N(delta, 1) are tested
against a common critical value.  Under the cost lambda*V - T the best
critical value is log(lambda)/delta + delta/2.  Reading this backwards,
a level-alpha test is optimal for exactly one price lambda(delta).
"""

import numpy as np
from scipy import stats

from scaledmt.optimality import figure1_data, lambda_of_delta, optimal_cv, peak_lambda

# With lambda = 1 the optimal critical value sits halfway between the means.
print("cv_opt(delta=3, lambda=1) =", optimal_cv(3.0, 1.0))

# The implied price lambda(delta) for the usual levels.  It peaks at
# delta = z_{1-alpha}, where lambda = exp(z^2 / 2).
for alpha in (0.05, 0.01):
    z = stats.norm.isf(alpha)
    print(f"alpha={alpha}: peak lambda {peak_lambda(alpha):.6f} at delta={z:.4f}; "
          f"lambda(2z) = {lambda_of_delta(2 * z, alpha):.3g}")

# %%
# A coarse view of the two curves (the full grid is what the
# ``scaledmt model-case`` command writes out).
deltas = np.round(np.arange(0.5, 5.01, 0.5), 10)
table = figure1_data([0.01, 0.05], deltas)
print(f"\n{'delta':>6} {'alpha=0.01':>11} {'alpha=0.05':>11}")
for d in deltas:
    row = table[table["delta"] == d]
    print(f"{d:6.2f} {row['lam'][0]:11.4f} {row['lam'][1]:11.4f}")

# Beyond delta = 2 z_{1-alpha} the implied price drops below one: the
# test is then more conservative than any sensible cost would justify.
