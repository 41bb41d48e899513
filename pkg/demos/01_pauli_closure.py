"""
Pauli algebra and Lie closures
==============================

Commutators of Pauli sums, then the dimension of the algebra generated by a
few circuit families.
"""

from plateaulab.dla import lie_closure
from plateaulab.models import build_model
from plateaulab.pauli import PauliSum, herm_commutator

# -i[XY, ZI]: the anticommuting pair gives a single new string
a = PauliSum.parse("XY")
b = PauliSum.parse("ZI")
print(herm_commutator(a, b).to_text())

# open transverse-field Ising chains: the algebra grows as n^2
for n in range(2, 7):
    alg = lie_closure(list(build_model("tfim", n).generators))
    print(f"tfim n={n}: dim={alg.dimension} (n^2={n * n}) after {alg.rounds} rounds")

# a periodic chain breaks the quadratic law
for n in range(3, 7):
    print("closed tfim", n, lie_closure(list(build_model("tfim", n, "closed").generators)).dimension)

# the hardware-efficient ansatz is controllable: su(2^n) has 4^n - 1 elements
for n in (2, 3):
    print("hea", n, lie_closure(list(build_model("hea", n).generators)).dimension, 4 ** n - 1)

# results serialize to JSON
print(lie_closure(list(build_model("tfim", 3).generators), model="tfim").to_json())
