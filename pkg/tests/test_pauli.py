import numpy as np
import pytest
from hypothesis import given, strategies as st

from plateaulab.pauli import (CapacityError, PauliString, PauliSum, basis_action, diagonal,
                              herm_commutator, hs_inner, multiply, pauli_sum, to_dense)

SINGLE = {
    "I": np.eye(2), "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]), "Z": np.diag([1, -1]),
}


def kron_label(label):
    out = np.array([[1.0]])
    for c in label:
        out = np.kron(out, SINGLE[c])
    return out


labels = st.integers(1, 4).flatmap(
    lambda n: st.text(alphabet="IXYZ", min_size=n, max_size=n))


@given(labels)
def test_label_round_trip_and_dense(label):
    p = PauliString.from_label(label)
    assert p.label == label
    np.testing.assert_allclose(to_dense(p), kron_label(label))


@given(st.integers(1, 4).flatmap(lambda n: st.tuples(
    st.text(alphabet="IXYZ", min_size=n, max_size=n),
    st.text(alphabet="IXYZ", min_size=n, max_size=n))))
def test_multiply_matches_matrix_product(pair):
    a, b = (PauliString.from_label(s) for s in pair)
    k, r = multiply(a, b)
    np.testing.assert_allclose(1j ** k * to_dense(r), to_dense(a) @ to_dense(b), atol=1e-12)
    assert a.commutes_with(b) == np.allclose(to_dense(a) @ to_dense(b), to_dense(b) @ to_dense(a))


def _random_sum(n, rng, terms=4):
    labs = ["".join(rng.choice(list("IXYZ"), n)) for _ in range(terms)]
    return PauliSum(n, {PauliString.from_label(s): float(rng.normal()) for s in labs})


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_hermitian_commutator_matches_dense(seed, n):
    rng = np.random.default_rng(seed)
    a, b = _random_sum(n, rng), _random_sum(n, rng)
    c = herm_commutator(a, b)
    da, db = a.to_dense(), b.to_dense()
    np.testing.assert_allclose(c.to_dense(), -1j * (da @ db - db @ da), atol=1e-10)


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_hs_inner_is_normalized_trace(seed, n):
    rng = np.random.default_rng(seed)
    a, b = _random_sum(n, rng), _random_sum(n, rng)
    assert hs_inner(a, b) == pytest.approx(np.trace(a.to_dense() @ b.to_dense()).real / 2 ** n)


def test_qubit_zero_is_most_significant_factor():
    # X on qubit 0 of two flips the leading bit: |00> -> |10> = index 2
    perm, phase = basis_action(PauliString.from_label("XI"))
    assert perm[0] == 2 and phase[0] == 1


def test_diagonal_of_z_sum():
    h = pauli_sum(("ZI", 1.0), ("ZZ", 0.5))
    np.testing.assert_allclose(diagonal(h), np.diag(h.to_dense()).real)
    with pytest.raises(ValueError):
        diagonal(pauli_sum(("XI", 1.0)))


def test_parse_and_text_round_trip():
    h = PauliSum.parse("1.5*XZ + -0.25*YY + ZI")
    again = PauliSum.parse(h.to_text())
    assert again.allclose(h)
    assert h.coefficient("ZI") == 1.0


def test_arithmetic_cancels_and_prunes():
    h = pauli_sum(("XX", 1.0), ("ZZ", 2.0))
    assert (h - h).is_zero
    assert (2 * h).coefficient("ZZ") == 4.0


def test_bad_inputs():
    with pytest.raises(ValueError):
        PauliString.from_label("XQ")
    with pytest.raises(ValueError):
        PauliSum(2, {"XX": 1j})
    with pytest.raises(ValueError):
        pauli_sum(("XX", 1.0)) + pauli_sum(("XXX", 1.0))


def test_dense_cap():
    with pytest.raises(CapacityError):
        PauliSum.from_string("Z" * 13).to_dense()
