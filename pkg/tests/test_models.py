import numpy as np
import pytest

from plateaulab.models import (MODEL_NAMES, ModelError, build_model, default_layers, er_graph,
                               spin_irrep, trotterize_controls, xxz_initial_state)
from plateaulab.symmetry import sector_isometry


def test_every_model_builds_with_sector_holding_state():
    for name in MODEL_NAMES:
        n = 5 if name == "su2_toy" else 4
        model = build_model(name, n)
        sector = model.sector()
        if sector is not None:
            assert abs(sector.projection_norm(model.initial_state) - 1) < 1e-10


def test_generators_are_traceless_and_hermitian():
    for name in ("hea", "spin_glass", "xxz_c", "tfim", "ltfim", "er_qaoa"):
        for g in build_model(name, 4).generators:
            d = g.to_dense()
            assert abs(np.trace(d)) < 1e-9
            np.testing.assert_allclose(d, d.conj().T)


def test_xxz_state_weight_and_parity():
    v = xxz_initial_state(6, 2)
    s = sector_isometry(6, {"m": 4, "parity": 1})
    assert abs(s.projection_norm(v) - 1) < 1e-12
    assert build_model("xxz_c", 6, m=2).sector().label_text == "m=4,parity=+1"


def test_spin_irrep_commutators():
    s = spin_irrep(4)
    np.testing.assert_allclose(s.Sx @ s.Sy - s.Sy @ s.Sx, 1j * s.Sz, atol=1e-12)
    casimir = s.Sx @ s.Sx + s.Sy @ s.Sy + s.Sz @ s.Sz
    np.testing.assert_allclose(casimir, s.S * (s.S + 1) * np.eye(4), atol=1e-12)


def test_er_graph_is_deterministic():
    assert er_graph(6, 11) == er_graph(6, 11)
    assert all(a < b for a, b in er_graph(6, 11))


def test_er_model_divides_by_edges():
    model = build_model("er_qaoa", 5, seed=2)
    assert model.divisor == len(er_graph(5, 2))


def test_trotterized_controls_layout():
    grid = trotterize_controls(1, [[0.5, 2.0], [1.0, -1.0]], [0.1, 0.2])
    np.testing.assert_allclose(grid, [[0.05, 0.1, 0.2], [0.2, 0.2, -0.2]])
    with pytest.raises(ValueError):
        trotterize_controls(0, [[1.0]], [-0.1])


def test_ltfim_cost_switch():
    plain = build_model("ltfim", 3)
    longitudinal = build_model("ltfim", 3, cost="ltfim")
    assert plain.observable.coefficient("ZII") == 0.0
    assert longitudinal.observable.coefficient("ZII") == 1.0


def test_default_depths():
    assert default_layers(build_model("hea", 3)) == 200
    assert default_layers(build_model("tfim", 4)) == 48
    assert default_layers(build_model("tfim", 4, "closed")) == 24
    assert default_layers(build_model("xxz_c", 4)) == 24


@pytest.mark.parametrize("args, kw", [
    (("nope", 4), {}),
    (("xxz_c", 2), {}),
    (("xxz_c", 4), {"m": 4}),
    (("hea", 4, "closed"), {}),
    (("tfim", 1), {}),
    (("ltfim", 3), {"cost": "other"}),
    (("su2_toy", 4), {"m": 3}),
])
def test_invalid_models(args, kw):
    with pytest.raises(ModelError):
        build_model(*args, **kw)


def test_json_description():
    text = build_model("tfim", 3).to_json()
    assert '"boundary": "open"' in text and '"initial_state": "plus"' in text


def test_odd_chain_drops_reflection_label():
    assert build_model("xxz_c", 5, m=2).sector().label_text == "m=3"
    assert build_model("xxz_c", 6, m=2).sector().label("parity") == 1
