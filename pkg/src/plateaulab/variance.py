"""Gradient-variance estimates, closed-form predictions and scaling fits."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict, fields
from typing import Sequence

import numpy as np

from .dla import lie_closure, restrict_operator, restricted_algebra_dimension, subspace_dla_dimension
from .pauli import PauliSum, DENSE_MAX_QUBITS, CapacityError
from .sim import Circuit, sample_batch, STATE_MAX_QUBITS

CSV_COLUMNS = ("model", "n", "boundary", "sector", "L", "mu_layer", "mu_gen", "n_samples",
               "seed", "mean", "variance", "se", "theory", "bound", "dim_g", "dim_g_sub")
DECISION_MARGIN = 0.10
SECTOR_LEAK_TOL = 1e-10
CLOSURE_CAP = 4096
DENSE_CLOSURE_MAX_D = 24
RESTRICT_MAX_D = 1024


class PreconditionError(ValueError):
    """The initial state is not contained in the requested sector."""


class DegenerateSectorError(ValueError):
    """The sector is too small for the closed-form expressions (d_k < 2)."""


@dataclass
class VarianceEstimate:
    model: str
    n: int | None
    boundary: str
    sector: str
    L: int
    mu_layer: int
    mu_gen: int
    n_samples: int
    seed: int
    mean: float
    variance: float
    se: float
    theory: float | None = None
    bound: float | None = None
    dim_g: int | None = None
    dim_g_sub: int | None = None

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if self.variance < 0 or self.se < 0:
            raise ValueError("variance and standard error must be non-negative")

    def to_row(self) -> dict:
        return asdict(self)

    def within(self, k: float = 3.0) -> bool | None:
        """Whether ``theory`` lies within ``k`` standard errors of the estimate."""
        if self.theory is None:
            return None
        return abs(self.variance - self.theory) <= k * self.se


# -- statistics ---------------------------------------------------------------

def jackknife_variance(x: np.ndarray) -> tuple[float, float, float]:
    """Sample mean, unbiased variance and the jackknife SE of that variance."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        raise ValueError("need at least two samples")
    mean = float(np.mean(x))
    var = float(np.var(x, ddof=1))
    if n == 2:
        return mean, var, var * math.sqrt(2.0)
    # leave-one-out variances in closed form, about the full-sample mean for stability
    d = x - mean
    s1, s2 = d.sum(), np.dot(d, d)
    loo_mean = (s1 - d) / (n - 1)
    loo_var = (s2 - d * d - (n - 1) * loo_mean ** 2) / (n - 2)
    se = math.sqrt((n - 1) / n * float(np.sum((loo_var - loo_var.mean()) ** 2)))
    return mean, var, se


def choose_sector(model):
    """The model's own sector when simulating inside it is cheaper than the full space."""
    sector = model.sector()
    if sector is None or sector.d_k == 0:
        return None
    rotations = []
    for g in model.generators:
        rotations.append(sum(1 for p, _ in g.items() if p.x))
    per_gate_full = (1 + float(np.mean(rotations))) * model.dimension
    if sector.d_k ** 2 <= 20 * per_gate_full:
        return sector
    return None


def gradient_samples(model, L: int, mu=None, n_samples: int = 2000, seed: int = 0,
                     sector="auto", workers: int = 1) -> np.ndarray:
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    mu = model.default_mu(L) if mu is None else tuple(mu)
    if sector == "auto":
        sector = choose_sector(model)
    circuit = Circuit(model, L, sector=sector)
    circuit._check_slot(mu)
    thetas = sample_batch(seed, n_samples, L, model.K)
    if workers <= 1:
        return circuit.gradients(thetas, mu)
    parts = np.array_split(thetas, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        res = list(pool.map(lambda t: circuit.gradients(t, mu), parts))
    return np.concatenate(res)


def mc_variance(model, L: int, mu=None, n_samples: int = 2000, seed: int = 0,
                sector="auto", workers: int = 1) -> VarianceEstimate:
    """Monte-Carlo variance of one partial derivative over uniform angles."""
    mu = model.default_mu(L) if mu is None else tuple(mu)
    g = gradient_samples(model, L, mu, n_samples, seed, sector, workers)
    mean, var, se = jackknife_variance(g)
    home = model.sector()
    return VarianceEstimate(model.name, model.n, model.boundary,
                            home.label_text if home is not None else "full",
                            L, mu[0], mu[1], n_samples, seed, mean, var, se)


# -- closed forms -------------------------------------------------------------

def hs_distance_to_identity(a: np.ndarray) -> float:
    """``Tr[A^2] - (Tr A)^2 / d`` for a Hermitian matrix."""
    a = np.asarray(a)
    d = a.shape[0]
    tr = np.trace(a).real
    return float(np.real(np.vdot(a, a)) - tr * tr / d)


def _restricted(model, sector):
    """Restricted H list, O and rho plus d_k; the full space when sector is None."""
    psi = np.asarray(model.initial_state, dtype=complex)
    if sector is None:
        if model.dense:
            hs = [np.asarray(g) for g in model.generators]
            o = np.asarray(model.observable)
        else:
            if model.n > DENSE_MAX_QUBITS:
                raise CapacityError("dense restriction capped")
            hs = [g.to_dense() for g in model.generators]
            o = model.observable.to_dense()
        return hs, o, psi, psi.size
    from .symmetry import verify_sector_invariance

    verify_sector_invariance(model.generators, sector)
    coords = sector.project(psi)
    if abs(1.0 - np.linalg.norm(coords)) > SECTOR_LEAK_TOL:
        raise PreconditionError(f"initial state leaks outside sector {sector.label_text}")
    hs = [restrict_operator(g, sector) for g in model.generators]
    o = restrict_operator(model.observable, sector)
    return hs, o, coords, sector.d_k


def theoretical_variance(model, sector=None, mu=None) -> float:
    """Closed-form variance for a sector on which the algebra is full rank."""
    q = (mu[1] if mu is not None else model.default_mu_generator)
    if sector is None and not model.dense:
        sector = model.sector()
    hs, o, coords, d = _restricted(model, sector)
    if d < 2:
        raise DegenerateSectorError(f"sector dimension {d} < 2")
    rho = np.outer(coords, coords.conj())
    pref = 2.0 * d / (d * d - 1) ** 2
    val = (pref * hs_distance_to_identity(hs[q - 1]) * hs_distance_to_identity(o)
           * hs_distance_to_identity(rho))
    return val / model.divisor ** 2


def _trace_fourth(a) -> float:
    if isinstance(a, PauliSum):
        if a.n > DENSE_MAX_QUBITS:
            raise CapacityError("fourth-moment trace capped at the dense limit")
        a = a.to_dense()
    a2 = np.asarray(a) @ np.asarray(a)
    return float(np.real(np.vdot(a2, a2)))


def corollary_bound(model, sector=None, mu=None) -> float:
    """Upper bound from ambient fourth-moment traces; needs only ``d_k``."""
    q = (mu[1] if mu is not None else model.default_mu_generator)
    if sector is None and not model.dense:
        sector = model.sector()
    d = model.dimension if sector is None else sector.d_k
    if d < 2:
        raise DegenerateSectorError(f"sector dimension {d} < 2")
    h = model.generators[q - 1]
    val = (4.0 * d * d / (d * d - 1) ** 2 * math.sqrt(_trace_fourth(h))
           * math.sqrt(_trace_fourth(model.observable)))
    return val / model.divisor ** 2


# -- algebra dimensions -------------------------------------------------------

@dataclass(frozen=True)
class AlgebraDims:
    dim_g: int | None
    dim_g_sub: int | None
    full_rank: bool | None
    provenance: str


def _has_identity_restricted(model, sector) -> bool:
    d = sector.d_k
    return any(abs(np.trace(restrict_operator(g, sector)).real) > 1e-9 * d
               for g in model.generators)


def algebra_dimensions(model, sector=None, closure_cap: int = CLOSURE_CAP) -> AlgebraDims:
    """Dimension of the algebra and of its restriction to the model's sector.

    Small closures are computed exactly.  For sectors too large for a dense
    closure the restricted dimension is taken as ``d_k^2`` (or ``d_k^2 - 1``)
    when the model family is known to be full rank there; the provenance
    string says which route was used.
    """
    if model.dense:
        from .dla import lie_closure_dense

        alg = lie_closure_dense(list(model.generators))
        dim = alg.dimension + int(alg.has_identity)
        return AlgebraDims(dim, dim, None, "closure")
    if sector is None:
        sector = model.sector()
    n = model.n
    if model.name in ("hea", "spin_glass") and n > 4:
        full = 4 ** n - 1
        return AlgebraDims(full, full, True, "full-rank-formula")
    alg = None
    if n <= 5 or model.name == "tfim":
        alg = lie_closure(list(model.generators), max_dim=closure_cap, model=model.name)
        if alg.truncated:
            alg = None
    dim_g = alg.dimension if alg is not None else None
    if sector is None:
        return AlgebraDims(dim_g, dim_g, dim_g == 4 ** n - 1 if dim_g else None,
                           "closure" if alg is not None else "not-computed")
    d = sector.d_k
    if alg is not None and d <= RESTRICT_MAX_D:
        sub = restricted_algebra_dimension(alg, sector)
        return AlgebraDims(dim_g, sub, sub in (d * d, d * d - 1), "closure")
    if d <= DENSE_CLOSURE_MAX_D:
        sub, full = subspace_dla_dimension(list(model.generators), sector)
        return AlgebraDims(None, sub, full, "sector-closure")
    if model.name in ("xxz_c", "ltfim"):
        sub = d * d if _has_identity_restricted(model, sector) else d * d - 1
        return AlgebraDims(None, sub, True, "full-rank-formula")
    return AlgebraDims(None, None, None, "not-computed")


SUBSPACE_CONTROLLABLE = ("hea", "spin_glass", "xxz_c", "ltfim")


def estimate(model, L: int | None = None, mu=None, n_samples: int = 2000, seed: int = 0,
             with_theory: bool = True, with_dims: bool = True, workers: int = 1) -> VarianceEstimate:
    """Monte-Carlo estimate plus closed-form and algebra columns where defined."""
    from .models import default_layers

    L = default_layers(model) if L is None else L
    est = mc_variance(model, L, mu, n_samples, seed, workers=workers)
    mu = (est.mu_layer, est.mu_gen)
    sector = None if model.dense else model.sector()
    if with_theory and model.name in SUBSPACE_CONTROLLABLE:
        d = model.dimension if sector is None else sector.d_k
        if d >= 2 and (sector is not None or model.n <= DENSE_MAX_QUBITS - 2):
            est.theory = theoretical_variance(model, sector, mu)
            est.bound = corollary_bound(model, sector, mu)
    if with_dims:
        dims = algebra_dimensions(model, sector)
        est.dim_g, est.dim_g_sub = dims.dim_g, dims.dim_g_sub
    return est


# -- fits ---------------------------------------------------------------------

@dataclass(frozen=True)
class ObservationFit:
    slope: float
    intercept: float
    pearson_r: float


def fit_observation(points: Sequence[tuple[float, float]]) -> ObservationFit:
    """Least squares of log(variance) on log(1/dim)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("need at least three (dim, variance) points")
    if np.any(pts <= 0):
        raise ValueError("dimensions and variances must be positive")
    x = -np.log(pts[:, 0])
    y = np.log(pts[:, 1])
    slope, intercept = np.polyfit(x, y, 1)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        r = 0.0 if np.ptp(y) == 0 else float("nan")
    else:
        r = float(np.corrcoef(x, y)[0, 1])
    return ObservationFit(float(slope), float(intercept), r)


@dataclass(frozen=True)
class ScalingFit:
    decision: str
    base: float
    exp_intercept: float
    exp_rss: float
    power: float
    poly_intercept: float
    poly_rss: float
    score: float

    def to_dict(self) -> dict:
        return asdict(self)


def classify_scaling(series: Sequence[tuple[float, float]],
                     margin: float = DECISION_MARGIN) -> ScalingFit:
    """Exponential versus polynomial decay of variance with n.

    Fits ``log v = a - n log b`` and ``log v = a - c log n``; the fit with the
    smaller residual sum of squares wins when it is smaller by more than
    ``margin`` of the larger one, otherwise the call is ``inconclusive``.
    ``score`` is ``1 - min(rss) / max(rss)``.
    """
    pts = np.asarray(series, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 4:
        raise ValueError("need at least four (n, variance) points")
    n, v = pts[:, 0], pts[:, 1]
    if np.any(np.diff(n) <= 0):
        raise ValueError("n must be strictly increasing")
    if np.any(v <= 0) or np.any(n <= 0):
        raise ValueError("n and variances must be positive")
    y = np.log(v)

    def fit(x):
        coef, res, *_ = np.polyfit(x, y, 1, full=True)
        rss = float(res[0]) if res.size else 0.0
        return coef, max(rss, 0.0)

    (e_slope, e_int), e_rss = fit(n)
    (p_slope, p_int), p_rss = fit(np.log(n))
    hi, lo = max(e_rss, p_rss), min(e_rss, p_rss)
    score = 0.0 if hi == 0 else 1.0 - lo / hi
    if score <= margin:
        decision = "inconclusive"
    else:
        decision = "exponential" if e_rss < p_rss else "polynomial"
    return ScalingFit(decision, float(np.exp(-e_slope)), float(e_int), e_rss,
                      float(-p_slope), float(p_int), p_rss, float(score))


# -- serialization ------------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def estimates_to_csv(rows: Sequence[VarianceEstimate | dict], columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        d = r.to_row() if isinstance(r, VarianceEstimate) else r
        w.writerow([_cell(d.get(c)) for c in columns])
    return buf.getvalue()


_TYPES = {f.name: f.type for f in fields(VarianceEstimate)}


def estimates_from_csv(text: str) -> list[VarianceEstimate]:
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        kw = {}
        for k, v in rec.items():
            t = str(_TYPES.get(k, "str"))
            if v == "":
                kw[k] = None
            elif t.startswith("int"):
                kw[k] = int(v)
            elif t.startswith("float"):
                kw[k] = float(v)
            else:
                kw[k] = v
        out.append(VarianceEstimate(**kw))
    return out


def estimates_to_json(rows: Sequence[VarianceEstimate]) -> str:
    return json.dumps([r.to_row() for r in rows], sort_keys=False, indent=1)


def su2_variance_prediction(d: int, m: float, normalized: bool = False) -> float:
    """Deep-circuit variance for the spin irrep toy model started in ``|m>``."""
    s = (d - 1) / 2
    val = 2.0 * m * m / 3.0
    return val / (s * s) if normalized else val
