import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import unitary_group

from plateaulab.models import build_model, spin_irrep
from plateaulab.moments import (ModeError, NonContractingError, depth_for_epsilon,
                                expressibility_norm, haar_identity_check, haar_second_moment,
                                haar_su2_sample, identity_exact, layer_moment, subspace_bound)
from plateaulab.pauli import CapacityError, DimensionError, PauliSum
from plateaulab.variance import mc_variance


@pytest.mark.parametrize("d", [2, 3, 4])
def test_haar_moment_is_rank_two_projector(d):
    m = haar_second_moment(d).matrix
    assert np.trace(m).real == pytest.approx(2.0)
    assert np.linalg.norm(m @ m - m) < 1e-12


def test_haar_moment_reproduces_nested_identity():
    rng = np.random.default_rng(0)
    d = 4
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    a = a + a.conj().T
    a -= np.trace(a) / d * np.eye(d)
    b = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    b = b + b.conj().T
    twirl = haar_second_moment(d).apply(np.kron(a, a))
    # Tr[(U A U^dag)(x)(U A U^dag) (B (x) B) SWAP] = Tr[U A U^dag B U A U^dag B]
    swap = np.eye(d * d)[[i * d + j for j in range(d) for i in range(d)]]
    lhs = np.trace(twirl @ np.kron(b, b) @ swap)
    assert lhs == pytest.approx(identity_exact(a, b, a, b)["nested"], rel=1e-10)


def test_abelian_layer_never_mixes():
    z = layer_moment([PauliSum.parse("Z")])
    haar = haar_second_moment(2)
    norms = [expressibility_norm(z.power(L), haar) for L in (1, 2, 3)]
    assert norms[0] > 0
    assert np.allclose(norms, norms[0])


def test_exact_and_sampled_layers_agree():
    gens = build_model("hea", 2).generators
    exact = layer_moment(gens)
    mc = layer_moment(gens, "monte-carlo", samples=20_000, seed=3)
    assert np.linalg.norm(mc.matrix - exact.matrix) <= 3 * mc.se


def test_layer_power_matches_repeated_layers():
    gens = build_model("hea", 2).generators
    one = layer_moment(gens)
    np.testing.assert_allclose(layer_moment(gens, layers=3).matrix, one.power(3).matrix,
                               atol=1e-12)


def test_norm_bounded_by_one_and_zero_at_haar():
    haar = haar_second_moment(4)
    assert expressibility_norm(haar, haar) == 0.0
    assert expressibility_norm(layer_moment(build_model("hea", 2).generators), haar) <= 1 + 1e-9


@given(st.integers(0, 500))
def test_norm_is_basis_independent(seed):
    u = unitary_group.rvs(4, random_state=seed)
    gens = [g.to_dense() for g in build_model("hea", 2).generators]
    haar = haar_second_moment(4)
    base = expressibility_norm(layer_moment(gens), haar)
    rotated = expressibility_norm(layer_moment([u @ g @ u.conj().T for g in gens]), haar)
    assert rotated == pytest.approx(base, rel=1e-7)


def test_depth_for_epsilon():
    assert depth_for_epsilon(0.5, 0.25) == pytest.approx(2.0)
    assert depth_for_epsilon(0.5, 2.0 ** -7) == pytest.approx(7.0)
    assert depth_for_epsilon(0.9, 2.0 ** -10) == pytest.approx(65.788, abs=1e-3)
    with pytest.raises(NonContractingError):
        depth_for_epsilon(1.0, 0.1)
    with pytest.raises(ValueError):
        depth_for_epsilon(0.0, 0.1)


def test_mode_and_capacity_errors():
    with pytest.raises(ModeError):
        layer_moment([np.diag([0.0, np.sqrt(2)])])
    with pytest.raises(CapacityError):
        haar_second_moment(9)
    with pytest.raises(DimensionError):
        expressibility_norm(haar_second_moment(2), haar_second_moment(3))


def test_identity_oracles_trivial_cases():
    d = 3
    report = haar_identity_check(d, 200, seed=1, operators=[np.eye(d)] * 4)
    assert report["single"]["mc"] == pytest.approx(d)
    assert report["single"]["exact"] == pytest.approx(d)
    traceless = np.diag([1.0, -1.0, 0.0])
    report = haar_identity_check(d, 4000, seed=2, operators=[traceless] * 4)
    assert report["single"]["exact"] == 0.0
    assert report["single"]["residual"] <= 3 * report["single"]["se"]


def test_su2_sampler():
    rng = np.random.default_rng(7)
    irrep = spin_irrep(2)
    us = [haar_su2_sample(irrep, rng) for _ in range(4000)]
    for u in us[:10]:
        np.testing.assert_allclose(u.conj().T @ u, np.eye(2), atol=1e-10)
    a, b = np.diag([2.0, 1.0]), np.array([[1.0, 0.5], [0.5, 3.0]])
    vals = np.array([np.trace(u @ a @ u.conj().T @ b).real for u in us])
    assert abs(vals.mean() - 3 * 4 / 2) <= 3 * vals.std() / math.sqrt(len(vals))
    five = spin_irrep(5)
    proj = np.mean([np.outer(u[:, 0], u[:, 0].conj())
                    for u in (haar_su2_sample(five, rng) for _ in range(4000))], axis=0)
    assert np.abs(proj - np.eye(5) / 5).max() < 0.03


def test_subspace_bound_dominates_variance():
    model = build_model("xxz_u", 4, m=1)
    bound = subspace_bound(model, L=12, samples=600, seed=1)
    est = mc_variance(model, 12, n_samples=2000, seed=2)
    assert bound.minimum + 3 * max(bound.se_a, bound.se_b) >= est.variance - 3 * est.se


def test_subspace_bound_shrinks_with_depth():
    model = build_model("xxz_c", 4, m=2)
    vals = [subspace_bound(model, L=L, samples=800, seed=4) for L in (1, 4, 16)]
    for a, b in zip(vals, vals[1:]):
        assert b.minimum <= a.minimum + 3 * max(a.se_a, a.se_b, b.se_a, b.se_b)


def test_moment_report_json():
    m = haar_second_moment(2)
    data = json.loads(m.to_json(norm=0.0))
    assert data == {"d": 2, "provenance": "haar", "norm": 0.0, "samples": None, "se": None}
