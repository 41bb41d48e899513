"""Dynamical Lie algebra closure in the Pauli and dense-matrix pictures.

Both closures follow the same round structure: every generator is bracketed
with every element added in the previous round, and a bracket is kept when
its Gram-Schmidt residual against the current span is larger than
``tol`` times its own norm.

Two copies of each kept element are held.  The raw bracket (rescaled by a
power of two) is what gets bracketed again: for integer-coefficient
generators its coefficients stay exact, so rounding noise cannot grow into
spurious directions over many rounds.  The normalized residual goes into the
returned basis, which is orthonormal under the normalized Hilbert-Schmidt
product.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .pauli import PauliString, PauliSum, DimensionError, herm_commutator

RANK_TOL = 1e-10
HERMITIAN_TOL = 1e-10


class GeneratorError(ValueError):
    """Generators are empty, zero, carry a trace or are not Hermitian."""


class InvarianceError(ValueError):
    """A generator does not commute with a sector's symmetry."""


@dataclass(frozen=True)
class AlgebraBasis:
    elements: tuple
    rounds: int
    truncated: bool
    mode: str = "pauli"
    has_identity: bool = False
    n: int | None = None
    model: str | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def dimension(self) -> int:
        return len(self.elements)

    def to_dict(self, with_elements: bool = False) -> dict:
        out = {
            "model": self.model,
            "n": self.n,
            "dimension": self.dimension,
            "rounds": self.rounds,
            "truncated": self.truncated,
        }
        if self.mode == "dense":
            out["has_identity"] = self.has_identity
        if with_elements and self.mode == "pauli":
            out["elements"] = [e.to_text() for e in self.elements]
        return out

    def to_json(self, with_elements: bool = False) -> str:
        return json.dumps(self.to_dict(with_elements), sort_keys=True)


class _Span:
    """Orthonormal real vectors over a growing coordinate index."""

    def __init__(self):
        self.index: dict = {}
        self.rows = np.zeros((0, 0))
        self.count = 0

    def _coords(self, items) -> np.ndarray:
        for key, _ in items:
            if key not in self.index:
                self.index[key] = len(self.index)
        if len(self.index) > self.rows.shape[1]:
            width = max(2 * self.rows.shape[1], len(self.index), 16)
            grown = np.zeros((max(self.rows.shape[0], 16), width))
            grown[: self.count, : self.rows.shape[1]] = self.rows[: self.count]
            self.rows = grown
        v = np.zeros(self.rows.shape[1])
        for key, c in items:
            v[self.index[key]] = c
        return v

    def residual(self, items) -> tuple[np.ndarray, float]:
        v = self._coords(items)
        norm = float(np.linalg.norm(v))
        basis = self.rows[: self.count]
        for _ in range(2):
            v = v - basis.T @ (basis @ v)
        return v, norm

    def append(self, v: np.ndarray) -> np.ndarray:
        if self.count == self.rows.shape[0]:
            grown = np.zeros((2 * self.rows.shape[0] + 16, self.rows.shape[1]))
            grown[: self.count] = self.rows[: self.count]
            self.rows = grown
        unit = v / np.linalg.norm(v)
        self.rows[self.count, : unit.size] = unit
        self.count += 1
        return unit


def _pow2_scale(norm: float) -> float:
    """Power of two near ``1/norm``; rescaling by it is exact in floating point."""
    return 2.0 ** -round(np.log2(norm))


class _CapReached(Exception):
    pass


def _run_rounds(generators, consider, bracket) -> tuple[int, bool]:
    """Generator-by-new-element bracketing until a round adds nothing."""
    previous = []
    try:
        for g in generators:
            e = consider(g)
            if e is not None:
                previous.append(e)
    except _CapReached:
        return 0, True
    rounds = 0
    while previous:
        rounds += 1
        fresh = []
        try:
            for h0 in generators:
                for h in previous:
                    e = consider(bracket(h0, h))
                    if e is not None:
                        fresh.append(e)
        except _CapReached:
            return rounds, True
        previous = fresh
    return rounds, False


def _validate_paulis(generators: Sequence[PauliSum]) -> int:
    if not generators:
        raise GeneratorError("need at least one generator")
    n = generators[0].n
    for i, g in enumerate(generators):
        if g.n != n:
            raise DimensionError(f"generator {i} acts on {g.n} qubits, expected {n}")
        if g.is_zero:
            raise GeneratorError(f"generator {i} is zero")
        if abs(g.coefficient(PauliString.identity(n))) > 1e-12:
            raise GeneratorError(f"generator {i} carries a trace")
    return n


def lie_closure(
    generators: Sequence[PauliSum],
    max_dim: int | None = None,
    tol: float = RANK_TOL,
    model: str | None = None,
) -> AlgebraBasis:
    """Orthonormal basis of the Lie algebra generated by ``i * generators``."""
    n = _validate_paulis(generators)
    if max_dim is None:
        max_dim = 4 ** n - 1
    span = _Span()
    keys = lambda h: [((x, z), c) for (x, z), c in h._terms.items()]  # noqa: E731
    inv = {}

    def to_sum(unit: np.ndarray) -> PauliSum:
        if len(inv) != len(span.index):
            inv.clear()
            inv.update({i: k for k, i in span.index.items()})
        nz = np.nonzero(np.abs(unit) >= 1e-12)[0]
        return PauliSum._from_keys(n, {inv[int(i)]: float(unit[i]) for i in nz})

    basis: list[PauliSum] = []

    def consider(h: PauliSum) -> PauliSum | None:
        if h.is_zero:
            return None
        r, norm = span.residual(keys(h))
        if np.linalg.norm(r) <= tol * norm:
            return None
        if len(basis) >= max_dim:
            raise _CapReached
        basis.append(to_sum(span.append(r)))
        return h * _pow2_scale(norm)

    rounds, truncated = _run_rounds(generators, consider, lambda a, b: herm_commutator(a, b))
    return AlgebraBasis(tuple(basis), rounds, truncated, "pauli", False, n, model)


def _check_dense(generators: Sequence[np.ndarray]) -> int:
    if len(generators) == 0:
        raise GeneratorError("need at least one generator")
    d = None
    for i, g in enumerate(generators):
        g = np.asarray(g)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise GeneratorError(f"generator {i} is not square")
        if d is None:
            d = g.shape[0]
        elif g.shape[0] != d:
            raise DimensionError(f"generator {i} has dimension {g.shape[0]}, expected {d}")
        if np.max(np.abs(g - g.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise GeneratorError(f"generator {i} is not Hermitian")
    return d


def lie_closure_dense(
    generators: Sequence[np.ndarray],
    max_dim: int | None = None,
    tol: float = RANK_TOL,
    model: str | None = None,
) -> AlgebraBasis:
    """Dense-matrix closure; reports the traceless dimension.

    The rank test runs on full Hermitian coordinates. Afterwards the identity
    is tested against the span: when it lies inside, ``has_identity`` is set
    and the reported ``dimension`` excludes it, so ``dimension`` is always
    the dimension of the traceless part. Elements are orthonormal under
    ``Tr[A^dag B] / d``.
    """
    d = _check_dense(generators)
    if max_dim is None:
        max_dim = d * d
    gens = [np.asarray(g, dtype=complex) for g in generators]
    iu = np.triu_indices(d, 1)
    k = len(iu[0])
    scale = np.sqrt(2.0 / d)

    # real coordinates of a Hermitian matrix, isometric to Tr[A B]/d
    def vec(h: np.ndarray) -> np.ndarray:
        return np.concatenate([
            np.real(np.diagonal(h)) / np.sqrt(d),
            scale * h[iu].real,
            scale * h[iu].imag,
        ])

    def mat(u: np.ndarray) -> np.ndarray:
        m = np.zeros((d, d), dtype=complex)
        m[np.diag_indices(d)] = u[:d] * np.sqrt(d)
        off = (u[d:d + k] + 1j * u[d + k:]) / scale
        m[iu] = off
        m[(iu[1], iu[0])] = off.conj()
        return m

    rows = np.zeros((max_dim, d * d))
    count = 0
    basis: list[np.ndarray] = []

    def residual(v: np.ndarray) -> np.ndarray:
        b = rows[:count]
        for _ in range(2):
            v = v - b.T @ (b @ v)
        return v

    def consider(h: np.ndarray) -> np.ndarray | None:
        nonlocal count
        v = vec(h)
        norm = np.linalg.norm(v)
        if norm <= 1e-14:
            return None
        r = residual(v)
        rn = np.linalg.norm(r)
        if rn <= tol * norm:
            return None
        if count >= max_dim:
            raise _CapReached
        rows[count] = r / rn
        count += 1
        basis.append(mat(rows[count - 1]))
        return h * _pow2_scale(norm)

    rounds, truncated = _run_rounds(gens, consider, lambda a, b: -1j * (a @ b - b @ a))
    ident = vec(np.eye(d))
    has_identity = bool(np.linalg.norm(residual(ident)) <= 1e-8 * np.linalg.norm(ident))
    traceless = tuple(basis)
    if has_identity:
        traceless = _drop_identity(basis, d)
    return AlgebraBasis(traceless, rounds, truncated, "dense", has_identity, None, model,
                        {"d": d})


def _drop_identity(basis: list[np.ndarray], d: int) -> tuple:
    """Orthonormal basis of the traceless part of a span that contains the identity."""
    eye = np.eye(d)
    out = []
    for b in basis:
        b = b - np.trace(b).real / d * eye
        for o in out:
            b = b - np.trace(o @ b).real / d * o
        nrm = np.sqrt(np.trace(b @ b).real / d)
        if nrm > 1e-8:
            out.append(b / nrm)
    return tuple(out)


Operator = Union[PauliSum, np.ndarray]


def _dense_of(a: Operator) -> np.ndarray:
    return a.to_dense() if isinstance(a, PauliSum) else np.asarray(a, dtype=complex)


def restrict_operator(a: Operator, sector) -> np.ndarray:
    """``Q A Q^dag`` for the sector isometry ``Q`` (rows orthonormal)."""
    q = sector.isometry
    if isinstance(a, PauliSum):
        if a.n != sector.ambient_n:
            raise DimensionError(f"operator on {a.n} qubits, sector on {sector.ambient_n}")
        from .sim import apply_pauli_sum

        # (Q A Q^dag)_{ij} = <q_i| A |q_j>, with A applied to each row of conj(Q)
        aq = apply_pauli_sum(a, q.conj())
        return q @ aq.T
    a = np.asarray(a, dtype=complex)
    if a.shape != (q.shape[1], q.shape[1]):
        raise DimensionError(f"operator shape {a.shape} does not match sector ambient {q.shape[1]}")
    return q @ a @ q.conj().T


def subspace_dla_dimension(
    generators: Sequence[Operator],
    sector,
    tol: float = RANK_TOL,
    check_symmetry: bool = True,
) -> tuple[int, bool]:
    """Dimension of the closure restricted to ``sector`` and a full-rank flag.

    The returned dimension counts the identity component when present, so a
    full-rank sector algebra reports ``d_k^2`` (u) or ``d_k^2 - 1`` (su).
    """
    if check_symmetry:
        from .symmetry import verify_sector_invariance

        verify_sector_invariance(generators, sector)
    dk = sector.d_k
    if dk <= 1:
        # scalar sector: only the identity component can survive
        traces = [abs(restrict_operator(g, sector)).max() if dk else 0.0 for g in generators]
        dim = 1 if dk == 1 and max(traces, default=0.0) > tol else 0
        return dim, True
    restricted = [restrict_operator(g, sector) for g in generators]
    restricted = [(r + r.conj().T) / 2 for r in restricted]
    alg = lie_closure_dense(restricted, tol=tol)
    dim = alg.dimension + (1 if alg.has_identity else 0)
    return dim, dim in (dk * dk - 1, dk * dk)


def restricted_algebra_dimension(algebra: AlgebraBasis, sector, tol: float = RANK_TOL) -> int:
    """Rank of a (Pauli) algebra basis after restriction to an invariant sector.

    Valid when the sector is invariant under every basis element; this is the
    cheap route to the sector algebra once the full closure is known.
    """
    dk = sector.d_k
    if dk == 0:
        return 0
    vecs = []
    for e in algebra.elements:
        r = restrict_operator(e, sector)
        vecs.append(np.concatenate([r.real.ravel(), r.imag.ravel()]))
    m = np.array(vecs)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0]) * 1e2))
