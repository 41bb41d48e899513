"""
Gradient variance
=================

Monte-Carlo variance of one partial derivative against the closed-form value
for a sector-controllable spin chain, then the log-log fit against the
restricted algebra dimension.
"""

from plateaulab.models import build_model
from plateaulab.variance import estimate, fit_observation

rows = []
for n in (4, 6, 8, 10):
    model = build_model("xxz_c", n, m=1)
    est = estimate(model, L=6 * n, n_samples=1000, seed=n, workers=4)
    rows.append(est)
    print(f"n={n:2d} var={est.variance:.4f} +- {est.se:.4f} theory={est.theory:.4f} "
          f"dim_sub={est.dim_g_sub}")

fit = fit_observation([(r.dim_g_sub, r.variance) for r in rows])
print(f"slope {fit.slope:.3f}, pearson r {fit.pearson_r:.3f}")
