"""
Exact finite-m laws of the step-up procedure
============================================

For thresholds t_1 <= ... <= t_m the number of rejections R has an exact
distribution built from order-statistic probabilities.  Given R = r, the
number of false rejections is binomial, which gives closed expressions
for the distribution and moments of V / s(R v 1).
"""

import numpy as np

from scaledmt import (
    MixtureModel,
    ScalingFunction,
    build_thresholds,
    power_exact,
    psi,
    rejection_count_pmf,
    sev_exact,
    sfdp_cdf,
    sfdp_moment,
)

# Probability that the sorted uniforms stay under a boundary.
print("psi(0.2, 0.5) =", psi([0.2, 0.5]), "(closed form 2*0.2*0.5 - 0.2**2 = 0.16)")

# %%
# Twenty tests, 70% true nulls, alternatives shifted by delta = 2.
m, alpha = 20, 0.05
model = MixtureModel(m, 0.7, delta=2.0)

for gamma in (0.0, 0.5, 1.0):
    s = ScalingFunction.power(gamma)
    t = build_thresholds(s, m, alpha)
    pmf = rejection_count_pmf(model, t)
    print(
        f"gamma={gamma:.1f}: E[R]={np.dot(np.arange(m + 1), pmf):.3f} "
        f"SEV={sev_exact(model, t, s):.6f} "
        f"E[(V/s)^2]={sfdp_moment(model, t, s, 2):.5f} "
        f"P(V/s <= 0.2)={sfdp_cdf(model, t, s, 0.2):.4f} "
        f"power={power_exact(model, t):.4f}"
    )

# The scaled expected value equals pi0 * alpha = 0.035 for every member
# of the family, while power grows with gamma.  Bonferroni (gamma = 0) and
# Benjamini-Hochberg (gamma = 1) are the two ends.
