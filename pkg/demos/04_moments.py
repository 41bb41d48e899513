"""
Second moments
==============

Layer moment operators, their distance from Haar, and the Haar trace
identities checked by sampling.
"""

from plateaulab.models import build_model
from plateaulab.moments import (depth_for_epsilon, expressibility_norm, haar_identity_check,
                                haar_second_moment, layer_moment)

one = layer_moment(build_model("hea", 2).generators)
haar = haar_second_moment(one.d)
n1 = expressibility_norm(one, haar)
for L in (1, 2, 3, 4):
    print(L, round(expressibility_norm(one.power(L), haar), 4), round(n1 ** L, 4))

# a sampled moment agrees with the exact one within its standard error
mc = layer_moment(build_model("hea", 2).generators, "monte-carlo", samples=5000, seed=1)
print("sampled norm", expressibility_norm(mc, haar), "se", mc.se)

print("layers for 1e-3:", depth_for_epsilon(n1, 1e-3))

for name, row in haar_identity_check(4, 20_000, seed=0).items():
    print(name, abs(row["residual"]), row["se"])
