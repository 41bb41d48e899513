"""Second-moment operators, expressibility norms and Haar integration checks.

A moment operator is stored as the dense ``d^4 x d^4`` matrix
``E[U (x) U (x) U* (x) U*]``. Acting on the row-major vectorization of a
``d^2 x d^2`` operator ``X`` it returns ``E[(U (x) U) X (U (x) U)^dag]``.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import unitary_group

from .pauli import PauliSum, CapacityError, DimensionError

MOMENT_MAX_D = 8
HAAR_CHECK_MAX_D = 16
SPECTRUM_TOL = 1e-8
POWER_TOL = 1e-8
POWER_RESTARTS = 3
POWER_MAX_ITER = 20000
MC_BLOCK = 4096


class ModeError(ValueError):
    """Exact-mode moments need integer generator spectra."""


class NonContractingError(ValueError):
    """A single-layer expressibility norm of one or more never reaches a 2-design."""


@dataclass(eq=False)
class MomentOperator:
    d: int
    matrix: np.ndarray
    provenance: str
    samples: int | None = None
    seed: int | None = None
    se: float | None = None

    def __post_init__(self):
        if self.matrix.shape != (self.d ** 4, self.d ** 4):
            raise DimensionError(f"moment matrix must be {self.d ** 4} square")

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Twirl of a ``d^2 x d^2`` operator."""
        x = np.asarray(x)
        return (self.matrix @ x.reshape(-1)).reshape(x.shape)

    def power(self, layers: int) -> "MomentOperator":
        if layers < 1:
            raise ValueError("layers must be >= 1")
        m = np.linalg.matrix_power(self.matrix, layers)
        return MomentOperator(self.d, m, f"{self.provenance}^{layers}", self.samples, self.seed)

    def operator_norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def to_dict(self, norm: float | None = None) -> dict:
        return {"d": self.d, "provenance": self.provenance, "norm": norm,
                "samples": self.samples, "se": self.se}

    def to_json(self, norm: float | None = None) -> str:
        return json.dumps(self.to_dict(norm), sort_keys=True)


def _check_d(d: int) -> None:
    if d < 2:
        raise ValueError("dimension must be >= 2")
    if d > MOMENT_MAX_D:
        raise CapacityError(f"moment operators are capped at d={MOMENT_MAX_D} (d^4 storage)")


def haar_second_moment(d: int) -> MomentOperator:
    """Weingarten form: a rank-two projector onto span{identity, swap} vectors."""
    _check_d(d)
    idx = np.arange(d)
    e = np.zeros((d,) * 4)
    s = np.zeros((d,) * 4)
    i, j = np.meshgrid(idx, idx, indexing="ij")
    e[i, j, i, j] = 1.0
    s[i, j, j, i] = 1.0
    e, s = e.reshape(-1), s.reshape(-1)
    a, b = 1.0 / (d * d - 1), -1.0 / (d * (d * d - 1))
    m = a * (np.outer(e, e) + np.outer(s, s)) + b * (np.outer(e, s) + np.outer(s, e))
    return MomentOperator(d, m.astype(complex), "haar")


def _dense(g) -> np.ndarray:
    if isinstance(g, PauliSum):
        return g.to_dense()
    return np.asarray(g, dtype=complex)


def _generator_dim(generators) -> int:
    mats = [_dense(g) for g in generators]
    if not mats:
        raise ValueError("need at least one generator")
    d = mats[0].shape[0]
    if any(m.shape != (d, d) for m in mats):
        raise DimensionError("generators must share one square shape")
    return d


def _gate_moment(h: np.ndarray) -> np.ndarray:
    """Uniform-angle average of ``e^{-i t h}`` to the ``(2, 2)`` tensor power."""
    lam, v = np.linalg.eigh(h)
    shift = lam - lam.min()
    if np.max(np.abs(shift - np.round(shift))) > SPECTRUM_TOL:
        raise ModeError("generator spectrum is not integer-spaced; use mode='monte-carlo'")
    k = np.round(shift).astype(np.int64)
    freq = (k[:, None, None, None] + k[None, :, None, None]
            - k[None, None, :, None] - k[None, None, None, :])
    keep = (freq == 0).reshape(-1)
    w = np.kron(np.kron(v, v), np.kron(v.conj(), v.conj()))
    wk = w[:, keep]
    return wk @ wk.conj().T


def layer_moment(generators, mode: str = "exact", samples: int = 10_000, seed: int = 0,
                 layers: int = 1, workers: int = 1) -> MomentOperator:
    """Moment operator of ``layers`` repetitions of ``prod_k exp(-i t_k H_k)``.

    Gate 1 acts first, so the exact product is ``M_K ... M_1``. Monte-Carlo
    mode reports the standard error of the Frobenius norm of the estimate.
    """
    d = _generator_dim(generators)
    _check_d(d)
    mats = [_dense(g) for g in generators]
    if mode == "exact":
        m = np.eye(d ** 4, dtype=complex)
        for h in mats:
            m = _gate_moment(h) @ m
        if layers > 1:
            m = np.linalg.matrix_power(m, layers)
        return MomentOperator(d, m, "exact-layer" if layers == 1 else f"exact-layer^{layers}")
    if mode != "monte-carlo":
        raise ValueError("mode must be 'exact' or 'monte-carlo'")
    if samples < 2:
        raise ValueError("monte-carlo mode needs at least two samples")
    eig = [np.linalg.eigh(h) for h in mats]
    blocks = [(i, min(MC_BLOCK, samples - i)) for i in range(0, samples, MC_BLOCK)]
    streams = np.random.SeedSequence(seed).spawn(len(blocks))

    def block(args):
        (start, size), ss = args
        rng = np.random.Generator(np.random.PCG64(ss))
        theta = rng.uniform(0.0, 2 * np.pi, size=(size, layers, len(mats)))
        u = np.broadcast_to(np.eye(d, dtype=complex), (size, d, d)).copy()
        for l in range(layers):
            for k, (lam, v) in enumerate(eig):
                phase = np.exp(-1j * theta[:, l, k, None] * lam[None, :])
                gate = np.einsum("ij,bj,kj->bik", v, phase, v.conj())
                u = gate @ u
        x = np.einsum("bij,bkl->bikjl", u, u).reshape(size, -1)
        return _accumulate(x, d)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(block, zip(blocks, streams)))
    else:
        parts = [block(a) for a in zip(blocks, streams)]
    total, total_sq = _pairwise_sum(parts)
    mean = total / samples
    var_entries = total_sq / samples - np.abs(mean) ** 2
    se = math.sqrt(max(float(var_entries.sum()), 0.0) / samples)
    return MomentOperator(d, mean, f"monte-carlo({samples},{seed})", samples, seed, se)


def _accumulate(x: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Sums of ``X (x) X*`` and of its squared modulus over a batch of ``X = U (x) U``."""
    d2 = d * d
    s = (x.T @ x.conj()).reshape(d2, d2, d2, d2).transpose(0, 2, 1, 3).reshape(d2 * d2, -1)
    a = np.abs(x) ** 2
    s2 = (a.T @ a).reshape(d2, d2, d2, d2).transpose(0, 2, 1, 3).reshape(d2 * d2, -1)
    return s, s2


def _pairwise_sum(parts):
    parts = list(parts)
    while len(parts) > 1:
        nxt = [(a[0] + b[0], a[1] + b[1]) for a, b in zip(parts[::2], parts[1::2])]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def _matrix_of(m) -> np.ndarray:
    return m.matrix if isinstance(m, MomentOperator) else np.asarray(m)


def expressibility_norm(m_candidate, m_haar, tol: float = POWER_TOL, seed: int = 0) -> float:
    """Largest singular value of ``M_haar - M_candidate`` by power iteration on ``A^dag A``."""
    if _matrix_of(m_haar).shape != _matrix_of(m_candidate).shape:
        raise DimensionError("moment operators have different dimensions")
    a = _matrix_of(m_haar) - _matrix_of(m_candidate)
    rng = np.random.default_rng(seed)
    ah = a.conj().T
    best = 0.0
    for _ in range(POWER_RESTARTS):
        v = rng.normal(size=a.shape[1]) + 1j * rng.normal(size=a.shape[1])
        v /= np.linalg.norm(v)
        sigma = 0.0
        for _ in range(POWER_MAX_ITER):
            w = ah @ (a @ v)
            nw = np.linalg.norm(w)
            if nw == 0.0:
                sigma = 0.0
                break
            v = w / nw
            new = math.sqrt(nw)
            if abs(new - sigma) <= tol * new:
                sigma = new
                break
            sigma = new
        else:
            # slow convergence means nearly degenerate top values; settle it densely
            sigma = float(np.linalg.norm(a, 2))
        best = max(best, sigma)
    return best


def depth_for_epsilon(single_layer_norm: float, eps: float) -> float:
    """Layers after which the expressibility norm drops to ``eps``."""
    if single_layer_norm <= 0:
        raise ValueError("single-layer norm must be positive")
    if single_layer_norm >= 1:
        raise NonContractingError("layer norm >= 1: repetition does not approach a 2-design")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return math.log(1.0 / eps) / math.log(1.0 / single_layer_norm)


# -- Haar integration oracles --------------------------------------------------

def random_hermitian(d: int, rng) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (g + g.conj().T) / 2


def haar_unitaries(d: int, n: int, rng) -> np.ndarray:
    """``n`` Haar-random ``d x d`` unitaries as an ``(n, d, d)`` array."""
    u = unitary_group.rvs(d, size=n, random_state=rng)
    return u.reshape(n, d, d)


def identity_exact(a, b, c, d_op) -> dict:
    """Closed-form Haar averages of the three trace polynomials."""
    d = a.shape[0]
    tr = np.trace
    ta, tb, tc, td = tr(a), tr(b), tr(c), tr(d_op)
    tac, tbd = tr(a @ c), tr(b @ d_op)
    q = d * d - 1
    return {
        "single": ta * tb / d,
        "nested": (ta * tc * tbd + tac * tb * td) / q - (tac * tbd + ta * tb * tc * td) / (d * q),
        "product": (ta * tb * tc * td + tac * tbd) / q - (tac * tb * td + ta * tc * tbd) / (d * q),
    }


def identity_samples(u: np.ndarray, a, b, c, d_op) -> dict:
    ua = u @ a @ u.conj().transpose(0, 2, 1)
    uc = u @ c @ u.conj().transpose(0, 2, 1)
    t1 = np.einsum("bij,ji->b", ua, b)
    t2 = np.einsum("bij,ji->b", uc, d_op)
    nested = np.einsum("bij,bji->b", ua @ b, uc @ d_op)
    return {"single": t1, "nested": nested, "product": t1 * t2}


def _mean_se(x: np.ndarray) -> tuple[complex, float]:
    n = x.size
    var = np.var(x.real, ddof=1) + np.var(x.imag, ddof=1)
    return complex(np.mean(x)), math.sqrt(var / n)


def haar_identity_check(d: int, n_samples: int, seed: int = 0, operators=None) -> dict:
    """Monte-Carlo vs closed form for the three Haar trace identities.

    Returns ``{name: {"mc", "exact", "residual", "se"}}``; complex values are
    reported through their real parts when the imaginary part is negligible.
    """
    if d > HAAR_CHECK_MAX_D:
        raise CapacityError(f"Haar checks are capped at d={HAAR_CHECK_MAX_D}")
    if n_samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    if operators is None:
        operators = [random_hermitian(d, rng) for _ in range(4)]
    a, b, c, dd = (np.asarray(o, dtype=complex) for o in operators)
    exact = identity_exact(a, b, c, dd)
    sums = {k: [] for k in exact}
    for start in range(0, n_samples, 50_000):
        u = haar_unitaries(d, min(50_000, n_samples - start), rng)
        for k, v in identity_samples(u, a, b, c, dd).items():
            sums[k].append(v)
    report = {}
    for k, ex in exact.items():
        mc, se = _mean_se(np.concatenate(sums[k]))
        report[k] = {"mc": _real_if_close(mc), "exact": _real_if_close(complex(ex)),
                     "residual": abs(mc - ex), "se": se}
    return report


def _real_if_close(z: complex):
    return z.real if abs(z.imag) <= 1e-12 * max(1.0, abs(z)) else z


def haar_residual_scaling(d: int, sizes=(1_000, 10_000, 100_000), replicates: int = 32,
                          seed: int = 0) -> dict:
    """Log-log slope of the RMS identity residual against the sample count.

    Residuals are pooled over the three identities after dividing by each
    identity's per-sample spread, and averaged over independent replicates so
    that a single lucky draw cannot set the slope.
    """
    rng = np.random.default_rng(seed)
    ops = [random_hermitian(d, rng) for _ in range(4)]
    exact = identity_exact(*ops)
    probe = identity_samples(haar_unitaries(d, 20_000, rng), *ops)
    spread = {k: math.sqrt(np.var(v.real) + np.var(v.imag)) for k, v in probe.items()}
    rms = []
    for n in sizes:
        sq = []
        for _ in range(replicates):
            vals = identity_samples(haar_unitaries(d, n, rng), *ops)
            sq.extend(abs(np.mean(v) - exact[k]) ** 2 / spread[k] ** 2 for k, v in vals.items())
        rms.append(math.sqrt(float(np.mean(sq))))
    slope = float(np.polyfit(np.log(sizes), np.log(rms), 1)[0])
    return {"sizes": list(sizes), "rms": rms, "slope": slope}


# -- SU(2) irrep sampling ------------------------------------------------------

def haar_su2_sample(irrep, rng) -> np.ndarray:
    """Haar-random element of the irrep via Euler angles ``z-y-z``."""
    from scipy.linalg import expm

    alpha, gamma = rng.uniform(0.0, 2 * np.pi, size=2)
    beta = math.acos(1.0 - 2.0 * rng.uniform())
    u = expm(-1j * alpha * irrep.Sz) @ expm(-1j * beta * irrep.Sy) @ expm(-1j * gamma * irrep.Sz)
    return u


# -- subspace expressibility bound ---------------------------------------------

@dataclass
class SubspaceBound:
    g_a: float
    g_b: float
    se_a: float
    se_b: float
    samples: int
    seed: int
    details: dict = field(default_factory=dict)

    @property
    def minimum(self) -> float:
        return min(self.g_a, self.g_b)

    def as_tuple(self) -> tuple[float, float, float]:
        return self.g_a, self.g_b, self.minimum


def _sector_halves(model, sector, mu, L, samples, seed):
    """Sampled restricted unitaries of the circuit before and after slot ``mu``."""
    from .sim import Circuit, sample_batch

    circuit = Circuit(model, L, sector=sector)
    lq = circuit._check_slot(mu)
    split = circuit.flat_index(lq) + 1
    th = sample_batch(seed, samples, L, model.K)
    d = circuit.dimension
    eye = np.eye(d, dtype=complex)
    ub = np.empty((samples, d, d), dtype=complex)
    ua = np.empty((samples, d, d), dtype=complex)
    for s in range(samples):
        rows = np.broadcast_to(th[s], (d,) + th.shape[1:])
        ub[s] = circuit._evolve(eye, rows, 0, split).T
        ua[s] = circuit._evolve(eye, rows, split, L * model.K).T
    return ua, ub


def _twirl_gap(states: np.ndarray, x: np.ndarray, haar: MomentOperator) -> tuple[float, float]:
    """Frobenius norm of ``Haar twirl - ensemble twirl`` of ``x (x) x`` and its SE."""
    xx = np.kron(x, x)
    target = haar.apply(xx).reshape(-1)
    conj = states @ x @ states.conj().transpose(0, 2, 1)
    per = np.einsum("bij,bkl->bikjl", conj, conj).reshape(len(states), -1)
    diff = target - per.mean(axis=0)
    gap = float(np.linalg.norm(diff))
    if gap == 0.0:
        return 0.0, 0.0
    proj = (per @ diff.conj()).real / gap
    return gap, float(np.std(proj, ddof=1) / math.sqrt(len(states)))


def subspace_bound(model, sector=None, mu=None, L: int | None = None, samples: int = 500,
                   seed: int = 0) -> SubspaceBound:
    """Both branches of the subspace expressibility bound on the gradient variance.

    ``G_B = (||A_B(rho^2)|| + D(rho)/(d^2-1)) |Tr<X^2>_A|`` and symmetrically
    for ``G_A`` with ``O`` and ``Y``; ``D`` is the distance to the identity.
    All terms are sector-restricted and divided by the model's divisor squared.
    """
    from .dla import restrict_operator
    from .models import default_layers
    from .variance import hs_distance_to_identity

    if sector is None:
        sector = model.sector()
    if sector is None:
        raise ValueError("model has no default sector; pass one")
    d = sector.d_k
    if d > MOMENT_MAX_D:
        raise CapacityError(f"sector dimension {d} exceeds the moment cap {MOMENT_MAX_D}")
    if d < 2:
        raise ValueError("sector dimension must be >= 2")
    L = default_layers(model) if L is None else L
    mu = model.default_mu(L) if mu is None else tuple(mu)
    ua, ub = _sector_halves(model, sector, mu, L, samples, seed)
    h = restrict_operator(model.generators[mu[1] - 1], sector)
    o = restrict_operator(model.observable, sector)
    coords = sector.project(np.asarray(model.initial_state, dtype=complex))
    rho = np.outer(coords, coords.conj())
    haar = haar_second_moment(d)
    q = d * d - 1
    scale = 1.0 / model.divisor ** 2

    o_heis = ua.conj().transpose(0, 2, 1) @ o @ ua
    x = h @ o_heis - o_heis @ h
    tx = -np.einsum("bij,bji->b", x, x).real
    rho_b = ub @ rho @ ub.conj().transpose(0, 2, 1)
    y = h @ rho_b - rho_b @ h
    ty = -np.einsum("bij,bji->b", y, y).real

    gap_b, gap_b_se = _twirl_gap(ub, rho, haar)
    gap_a, gap_a_se = _twirl_gap(ua.conj().transpose(0, 2, 1), o, haar)
    mx, sx = tx.mean(), tx.std(ddof=1) / math.sqrt(samples)
    my, sy = ty.mean(), ty.std(ddof=1) / math.sqrt(samples)
    cb = gap_b + hs_distance_to_identity(rho) / q
    ca = gap_a + hs_distance_to_identity(o) / q
    g_b = cb * mx * scale
    g_a = ca * my * scale
    se_b = math.hypot(mx * gap_b_se, cb * sx) * scale
    se_a = math.hypot(my * gap_a_se, ca * sy) * scale
    return SubspaceBound(g_a, g_b, se_a, se_b, samples, seed,
                         {"gap_a": gap_a, "gap_b": gap_b, "tr_x2": mx, "tr_y2": my, "d_k": d})
