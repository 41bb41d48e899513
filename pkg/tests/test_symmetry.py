from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st

from plateaulab.models import build_model
from plateaulab.pauli import DimensionError, pauli_sum
from plateaulab.symmetry import (IncompatibleLabelsError, InvarianceError, cyclic_projector,
                                 cyclic_sector_dimension, cyclic_shift_operator, label_family,
                                 leakage, magnetization_operator, magnetization_sectors,
                                 reflection_parity_operator, sector_isometry,
                                 verify_sector_invariance, verify_symmetry, z2_operator)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_magnetization_dimensions_are_binomial(n):
    assert [s.d_k for s in magnetization_sectors(n)] == [comb(n, m) for m in range(n + 1)]


@given(st.integers(2, 6), st.sampled_from([("m", "parity"), ("parity", "z2"), ("k",),
                                            ("z2", "k")]))
def test_families_partition_the_space(n, names):
    if "k" in names and "parity" in names and n > 2:
        return
    sectors = label_family(n, names)
    q = np.vstack([s.isometry for s in sectors])
    assert q.shape == (2 ** n, 2 ** n)
    np.testing.assert_allclose(q @ q.conj().T, np.eye(2 ** n), atol=1e-10)


def test_sector_rows_are_eigenvectors():
    n = 4
    s = sector_isometry(n, {"parity": -1, "z2": 1})
    p, f = reflection_parity_operator(n), z2_operator(n).to_dense()
    v = s.isometry.conj()
    np.testing.assert_allclose(v @ p.T, -v, atol=1e-12)
    np.testing.assert_allclose(v @ f.T, v, atol=1e-12)


def test_cyclic_prime_formula():
    for n in (3, 5, 7):
        assert cyclic_sector_dimension(n, 0) == 2 + (2 ** n - 2) // n
        assert sector_isometry(n, {"k": 0}).d_k == 2 + (2 ** n - 2) // n


def test_cyclic_projector_is_projector():
    p = cyclic_projector(4, 1)
    np.testing.assert_allclose(p @ p, p, atol=1e-12)
    r = cyclic_shift_operator(4)
    np.testing.assert_allclose(np.linalg.matrix_power(r, 4), np.eye(16))


def test_plus_state_in_even_sector():
    for n in (2, 4, 6):
        s = sector_isometry(n, {"parity": 1, "z2": 1})
        plus = np.full(2 ** n, 2 ** (-n / 2))
        assert abs(s.projection_norm(plus) - 1) < 1e-10


def test_empty_sector_and_labels():
    s = sector_isometry(3, {"m": 0, "parity": -1})
    assert s.d_k == 0
    assert sector_isometry(3, {"m": 1, "parity": 1}).label_text == "m=1,parity=+1"


def test_incompatible_and_bad_labels():
    with pytest.raises(IncompatibleLabelsError):
        sector_isometry(4, {"m": 2, "z2": 1})
    with pytest.raises(IncompatibleLabelsError):
        sector_isometry(5, {"parity": 1, "k": 1})
    with pytest.raises(ValueError):
        sector_isometry(3, {"spin": 1})
    with pytest.raises(ValueError):
        sector_isometry(3, {"parity": 2})
    with pytest.raises(DimensionError):
        sector_isometry(21, {"m": 1})


def test_verify_symmetry_flags_offender():
    gens = [pauli_sum(("ZZ", 1.0)), pauli_sum(("XI", 1.0))]
    check = verify_symmetry(gens, magnetization_operator(2))
    assert not check.ok and check.offending == 1
    assert verify_symmetry(gens[:1], magnetization_operator(2))


def test_model_generators_preserve_their_sector():
    for name, kw in [("xxz_c", {"m": 2}), ("tfim", {}), ("ltfim", {}), ("er_qaoa", {"seed": 3})]:
        model = build_model(name, 4, **kw)
        verify_sector_invariance(model.generators, model.sector())


def test_leakage_detects_broken_symmetry():
    s = sector_isometry(3, {"m": 1})
    assert leakage(pauli_sum(("XXI", 1.0), ("YYI", 1.0)), s) < 1e-12
    with pytest.raises(InvarianceError):
        verify_sector_invariance([pauli_sum(("XII", 1.0))], s)
