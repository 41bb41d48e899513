"""
Invariant sectors
=================

Magnetization, reflection and momentum sectors; restricted algebras.
"""

import numpy as np

from plateaulab.dla import subspace_dla_dimension
from plateaulab.models import build_model
from plateaulab.symmetry import cyclic_sector_dimension, label_family, sector_isometry

n = 4
for sector in label_family(n, ["m", "parity"]):
    print(sector.label_text, sector.d_k)

# the symmetric spin chain generates the full unitary algebra on each block;
# the uniform variant does not
for name in ("xxz_c", "xxz_u"):
    gens = list(build_model(name, n, m=2).generators)
    for sector in label_family(n, ["m", "parity"]):
        if sector.d_k >= 3:
            dim, full = subspace_dla_dimension(gens, sector)
            print(name, sector.label_text, dim, "full rank" if full else "rank deficient")

# momentum-zero sectors of odd cyclic chains
for n in (3, 5, 7):
    print(n, sector_isometry(n, {"k": 0}).d_k, cyclic_sector_dimension(n, 0))

# |+>^n lies entirely in the even reflection, even flip sector
plus = np.full(16, 0.25)
print(sector_isometry(4, {"parity": 1, "z2": 1}).projection_norm(plus))
