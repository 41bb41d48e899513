"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary) and then
asserts.  Monte-Carlo series shared by the scaling criteria are computed once
per session.
"""

import math
import os
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from plateaulab.dla import lie_closure, subspace_dla_dimension
from plateaulab.models import build_model
from plateaulab.moments import (depth_for_epsilon, expressibility_norm, haar_identity_check,
                                haar_residual_scaling, haar_second_moment, layer_moment)
from plateaulab.sim import Circuit, analytic_gradient, finite_difference_gradient, sector_trajectory
from plateaulab.symmetry import cyclic_sector_dimension, label_family, sector_isometry
from plateaulab.variance import (classify_scaling, estimate, fit_observation, mc_variance,
                                 su2_variance_prediction, theoretical_variance)

WORKERS = min(8, os.cpu_count() or 1)
SAMPLES = 2000
SEED = 2024
CLOSED_TFIM_DIMS = {3: 8, 4: 11, 5: 14, 6: 17, 7: 20, 8: 23}


def record(cid, ok, detail):
    ACCEPTANCE_LINES.append((cid, bool(ok), detail))
    print(f"{'PASS' if ok else 'FAIL'}  criterion {cid}: {detail}")
    assert ok, detail


def _fmt(xs):
    return "[" + ", ".join(f"{x:.4g}" for x in xs) + "]"


class _Series:
    """Lazily computed variance estimates keyed by (family, n)."""

    FAMILIES = {
        "hea": ("hea", {}),
        "xxz_m1": ("xxz_c", {"m": 1}),
        "xxz_half": ("xxz_c", {"m": "n/2"}),
        "tfim": ("tfim", {}),
        "ltfim": ("ltfim", {}),
    }

    def __init__(self):
        self._cache = {}

    def get(self, family, n):
        key = (family, n)
        if key not in self._cache:
            name, params = self.FAMILIES[family]
            params = {k: (n // 2 if v == "n/2" else v) for k, v in params.items()}
            model = build_model(name, n, **params)
            self._cache[key] = estimate(model, None, None, SAMPLES, SEED + n,
                                        with_theory=False, workers=WORKERS)
        return self._cache[key]

    def points(self, family, ns, x="n"):
        ests = [self.get(family, n) for n in ns]
        if x == "n":
            return [(n, e.variance) for n, e in zip(ns, ests)]
        return [(e.dim_g_sub, e.variance) for e in ests]


@pytest.fixture(scope="session")
def series():
    return _Series()


def test_criterion_1_full_rank_closures():
    t0 = time.perf_counter()
    hea = [lie_closure(list(build_model("hea", n).generators)).dimension for n in (2, 3, 4)]
    sg = [lie_closure(list(build_model("spin_glass", n, seed=s).generators)).dimension
          for n in (2, 3) for s in (0, 1, 2)]
    elapsed = time.perf_counter() - t0
    ok = hea == [15, 63, 255] and sg == [15] * 3 + [63] * 3 and elapsed < 120
    record("1", ok, f"hea {hea}, spin glass {sg}, {elapsed:.1f}s")


def test_criterion_2_tfim_dimensions():
    open_dims = [lie_closure(list(build_model("tfim", n).generators)).dimension
                 for n in range(2, 9)]
    closed = {n: lie_closure(list(build_model("tfim", n, "closed").generators)).dimension
              for n in range(3, 9)}
    diffs = np.diff([closed[n] for n in range(4, 9)])
    ok = (open_dims == [n * n for n in range(2, 9)] and closed == CLOSED_TFIM_DIMS
          and np.ptp(diffs) <= 1)
    record("2", ok, f"open {open_dims}, closed {list(closed.values())}, "
                    f"differences {diffs.tolist()}")


def test_criterion_3_subspace_controllability():
    sectors = [s for s in label_family(4, ["m", "parity"]) if s.d_k >= 2]
    xxz_c = [subspace_dla_dimension(list(build_model("xxz_c", 4, m=2).generators), s)
             for s in sectors]
    xxz_u = [(s.d_k, subspace_dla_dimension(list(build_model("xxz_u", 4, m=2).generators), s))
             for s in sectors]
    ok_c = all(full for _, full in xxz_c)
    ok_u = any(dk >= 3 and not res[1] for dk, res in xxz_u)
    detail = (f"{len(sectors)} sectors; xxz_c dims {[d for d, _ in xxz_c]} all full rank={ok_c}; "
              f"xxz_u rank-deficient d_k>=3 sector found={ok_u}")
    record("3", ok_c and ok_u, detail)


def test_criterion_4_theory_agreement():
    t0 = time.perf_counter()
    parts, ok = [], True
    for n in (6, 8):
        model = build_model("xxz_c", n, m=1)
        est = mc_variance(model, 6 * n, n_samples=SAMPLES, seed=SEED, workers=WORKERS)
        th = theoretical_variance(model)
        good = abs(est.variance - th) <= 3 * est.se
        ok &= good
        parts.append(f"n={n} mc {est.variance:.4f}+-{est.se:.4f} theory {th:.4f}")
    elapsed = time.perf_counter() - t0
    record("4", ok and elapsed < 600, "; ".join(parts) + f"; {elapsed:.1f}s")


def test_criterion_5_scaling_classification(series):
    ns = [4, 6, 8, 10]
    wanted = {
        "xxz m=n/2": ("xxz_half", "exponential"),
        "xxz m=1": ("xxz_m1", "polynomial"),
        "tfim": ("tfim", "polynomial"),
        "ltfim": ("ltfim", "exponential"),
    }
    parts, ok = [], True
    for label, (family, expected) in wanted.items():
        grid = ns if family.startswith("xxz") else list(range(4, 11))
        fit = classify_scaling(series.points(family, grid))
        ok &= fit.decision == expected
        parts.append(f"{label} -> {fit.decision} (want {expected}, score {fit.score:.3g})")
    longer = classify_scaling(series.points("xxz_m1", list(range(6, 17, 2))))
    parts.append(f"supplementary xxz m=1 n=6..16 -> {longer.decision}")
    record("5", ok, "; ".join(parts))


@pytest.mark.parametrize("normalized", [False, True])
def test_criterion_6_su2_prediction(normalized):
    parts, ok = [], True
    for d in (8, 16, 32):
        for m in (0.5, (d - 1) / 2):
            model = build_model("su2_toy", d, m=m, normalized=normalized)
            est = mc_variance(model, 100, n_samples=1200, seed=SEED + d, workers=WORKERS)
            pred = su2_variance_prediction(d, m, normalized)
            good = abs(est.variance - pred) <= 3 * est.se
            ok &= good
            parts.append(f"d={d} m={m:g}: {est.variance:.4g} vs {pred:.4g}")
    cid = "6 (normalized)" if normalized else "6 (unnormalized)"
    record(cid, ok, "; ".join(parts))


def test_criterion_7_product_law():
    one = layer_moment(build_model("hea", 2).generators)
    haar = haar_second_moment(one.d)
    n1 = expressibility_norm(one, haar)
    norms = [expressibility_norm(one.power(L), haar) for L in (1, 2, 3, 4)]
    law = [n1 ** L for L in (1, 2, 3, 4)]
    product_ok = all(abs(a - b) <= 1e-8 for a, b in zip(norms, law))
    depths = [depth_for_epsilon(n1, n1 ** L) for L in (1, 2, 3, 4)]
    inverse_ok = all(abs(dp - L) <= 1e-8 for dp, L in zip(depths, (1, 2, 3, 4)))
    record("7", product_ok and inverse_ok,
           f"norms {_fmt(norms)} vs product law {_fmt(law)}; depth inversion exact={inverse_ok}")


def test_criterion_8_haar_oracles():
    report = haar_identity_check(4, 100_000, seed=SEED)
    within = {k: abs(v["residual"]) <= 3 * v["se"] for k, v in report.items()}
    scaling = haar_residual_scaling(4, seed=SEED)
    slope_ok = abs(scaling["slope"] + 0.5) <= 0.15 * 0.5
    detail = ", ".join(f"{k} |res|={abs(v['residual']):.3g} se={v['se']:.3g}"
                       for k, v in report.items())
    record("8", all(within.values()) and slope_ok,
           f"{detail}; residual slope {scaling['slope']:.3f}")


def test_criterion_9_gradient_integrity():
    # gradients that vanish by symmetry have no meaningful relative error; they
    # are checked in absolute terms and replaced by fresh draws
    rng = np.random.default_rng(SEED)
    worst, worst_zero, zeros, cases = 0.0, 0.0, 0, 0
    while cases < 100:
        name = ["tfim", "xxz_c", "hea"][rng.integers(3)]
        model = build_model(name, 4, **({"m": 2} if name == "xxz_c" else {}))
        L = int(rng.integers(1, 5))
        circuit = Circuit(model, L)
        theta = rng.uniform(0, 2 * math.pi, size=(L, model.K))
        mu = (int(rng.integers(1, L + 1)), int(rng.integers(1, model.K + 1)))
        a = analytic_gradient(circuit, theta, mu)
        f = finite_difference_gradient(circuit, theta, mu, h=1e-5)
        if abs(a) < 1e-9:
            zeros += 1
            worst_zero = max(worst_zero, abs(a - f))
            continue
        cases += 1
        worst = max(worst, abs(a - f) / abs(a))
    record("9", worst <= 1e-6 and worst_zero <= 1e-9,
           f"worst relative error {worst:.2e} over 100 cases; {zeros} vanishing gradients "
           f"agree to {worst_zero:.1e} absolute")


def test_criterion_10_observation_fits(series):
    families = {
        "hea": ("hea", range(2, 9)),
        "xxz m=1": ("xxz_m1", range(4, 17, 2)),
        "xxz m=n/2": ("xxz_half", range(4, 11, 2)),
        "tfim": ("tfim", range(4, 11)),
        "ltfim": ("ltfim", range(4, 11)),
    }
    parts, ok = [], True
    for label, (family, ns) in families.items():
        fit = fit_observation(series.points(family, list(ns), x="dim"))
        ok &= abs(fit.pearson_r) >= 0.9
        parts.append(f"{label} r={fit.pearson_r:.3f}")
    record("10", ok, "; ".join(parts))


def test_criterion_11_cyclic_formulas():
    dims = [cyclic_sector_dimension(n, 0) for n in (3, 5, 7)]
    built = [sector_isometry(n, {"k": 0}).d_k for n in (3, 5, 7)]
    formula = [2 + (2 ** n - 2) // n for n in (3, 5, 7)]
    norms = []
    for n in (2, 4, 6):
        plus = np.full(2 ** n, 2 ** (-n / 2))
        norms.append(float(sector_isometry(n, {"parity": 1, "z2": 1}).projection_norm(plus)))
    ok = dims == built == formula == [4, 8, 20] and all(abs(x - 1) <= 1e-10 for x in norms)
    record("11", ok, f"k=0 dims {built}, formula {formula}, |+> norms {_fmt(norms)}")


def test_criterion_12_sector_conservation():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for n in (4, 6, 8):
        model = build_model("xxz_c", n, m=1)
        L = 6 * n
        circuit = Circuit(model, L)
        theta = rng.uniform(0, 2 * math.pi, size=(L, model.K))
        checkpoints = np.linspace(L / 10, L, 10).round().astype(int)
        norms = sector_trajectory(circuit, theta, model.sector(), checkpoints)
        worst = max(worst, float(np.abs(norms - 1).max()))
    record("12", worst <= 1e-10, f"max |1 - projection norm| {worst:.2e} over 10 checkpoints")
