"""
Spin-irrep toy model
====================

A single irrep of SU(2) of dimension d: the deep-circuit variance does not
shrink with d for the unnormalized cost.
"""

from plateaulab.models import build_model
from plateaulab.variance import mc_variance, su2_variance_prediction

for d in (8, 16, 32):
    for m in (0.5, (d - 1) / 2):
        est = mc_variance(build_model("su2_toy", d, m=m), 100, n_samples=600, seed=d)
        print(f"d={d:2d} m={m:5.1f} var={est.variance:8.3f} +- {est.se:.3f} "
              f"predicted {su2_variance_prediction(d, m):8.3f}")
