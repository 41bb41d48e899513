"""Invariant subspaces of the spin-chain symmetries.

Four symmetry families are supported, all of them permutations of the
computational basis except magnetization, which is diagonal:

* ``m``: Hamming weight of the basis state (number of 1 bits).
* ``parity``: site reversal, eigenvalue +1 or -1.
* ``z2``: global bit flip, eigenvalue +1 or -1.
* ``k``: cyclic-shift momentum, ``0 <= k < n``; the sector is the range of
  ``(1/n) sum_j exp(2 pi i k j / n) R^j`` where ``R`` moves site ``i`` to
  site ``i + 1``.

Sector bases are assembled orbit by orbit: the permutation group generated
by the requested symmetries is applied to one representative basis state,
the character-weighted sum is normalized and kept when it is nonzero.
Sites are 0-based here; site 0 is the most significant bit of a basis index.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from math import comb
from typing import Mapping, Sequence

import numpy as np

from .pauli import PauliString, PauliSum, CapacityError, DimensionError, DENSE_MAX_QUBITS

SYMMETRY_TOL = 1e-10
ORBIT_TOL = 1e-8
SECTOR_MAX_QUBITS = 20
SECTOR_MAX_ELEMENTS = 2 ** 26
FAMILIES = ("m", "parity", "z2", "k")


class IncompatibleLabelsError(ValueError):
    """Requested symmetry labels do not define a joint eigenspace."""


class InvarianceError(ValueError):
    """An operator does not leave a sector invariant."""


@dataclass(frozen=True, eq=False)
class SymmetrySector:
    ambient_n: int
    labels: tuple
    isometry: np.ndarray

    @property
    def d_k(self) -> int:
        return int(self.isometry.shape[0])

    @property
    def label_text(self) -> str:
        return ",".join(f"{k}={_fmt(k, v)}" for k, v in self.labels) or "full"

    def label(self, name: str, default=None):
        return dict(self.labels).get(name, default)

    def projection_norm(self, psi: np.ndarray) -> np.ndarray:
        """Norm of the component of ``psi`` (or each row of a batch) in the sector."""
        return np.linalg.norm(np.asarray(psi) @ self.isometry.T, axis=-1)

    def project(self, psi: np.ndarray) -> np.ndarray:
        """Sector coordinates ``Q psi`` of a state or a batch of row states."""
        return np.asarray(psi) @ self.isometry.T

    def embed(self, coords: np.ndarray) -> np.ndarray:
        return np.asarray(coords) @ self.isometry.conj()

    def to_dict(self) -> dict:
        return {"labels": {k: v for k, v in self.labels}, "d_k": self.d_k}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def isometry_bytes(self) -> bytes:
        """Column-major complex128 dump of the isometry, for debugging."""
        return np.asfortranarray(self.isometry.astype(np.complex128)).tobytes(order="F")


def _fmt(name: str, v: int) -> str:
    return f"{v:+d}" if name in ("parity", "z2") else str(v)


def magnetization_operator(n: int) -> PauliSum:
    return PauliSum(n, {PauliString.single(n, i, "Z"): 1.0 for i in range(n)})


def z2_operator(n: int) -> PauliSum:
    return PauliSum.from_string(PauliString(n, (1 << n) - 1, 0))


def _hamming(n: int) -> np.ndarray:
    return np.bitwise_count(np.arange(2 ** n, dtype=np.uint64)).astype(np.int64)


def reflection_permutation(n: int) -> np.ndarray:
    idx = np.arange(2 ** n, dtype=np.int64)
    out = np.zeros_like(idx)
    for i in range(n):
        out |= ((idx >> i) & 1) << (n - 1 - i)
    return out


def flip_permutation(n: int) -> np.ndarray:
    return np.arange(2 ** n, dtype=np.int64) ^ ((1 << n) - 1)


def shift_permutation(n: int) -> np.ndarray:
    """Index map of ``R|a_0 ... a_{n-1}> = |a_{n-1} a_0 ... a_{n-2}>``."""
    idx = np.arange(2 ** n, dtype=np.int64)
    return (idx >> 1) | ((idx & 1) << (n - 1))


def _perm_matrix(perm: np.ndarray) -> np.ndarray:
    d = perm.size
    if d > 2 ** DENSE_MAX_QUBITS:
        raise DimensionError("permutation exceeds dense cap")
    m = np.zeros((d, d))
    m[perm, np.arange(d)] = 1.0
    return m


def reflection_parity_operator(n: int) -> np.ndarray:
    """Dense site-reversal operator; a permutation matrix with square one."""
    if n < 2:
        raise ValueError("reflection parity needs n >= 2")
    return _perm_matrix(reflection_permutation(n))


def cyclic_shift_operator(n: int) -> np.ndarray:
    return _perm_matrix(shift_permutation(n))


def cyclic_projector(n: int, k: int) -> np.ndarray:
    r = cyclic_shift_operator(n)
    eps = np.exp(2j * np.pi / n)
    p = np.zeros_like(r, dtype=complex)
    rj = np.eye(2 ** n)
    for j in range(n):
        p += eps ** (k * j) * rj
        rj = r @ rj
    return p / n


def _normalize_labels(labels) -> tuple:
    items = list(labels.items()) if isinstance(labels, Mapping) else list(labels)
    out = {}
    for name, val in items:
        if name not in FAMILIES:
            raise ValueError(f"unknown symmetry family {name!r}; expected one of {FAMILIES}")
        if name in out:
            raise ValueError(f"duplicate label {name!r}")
        out[name] = int(val)
    return tuple((f, out[f]) for f in FAMILIES if f in out)


def _check_labels(n: int, labels: dict) -> None:
    for name in ("parity", "z2"):
        if name in labels and labels[name] not in (1, -1):
            raise ValueError(f"{name} eigenvalue must be +1 or -1")
    if "m" in labels and not 0 <= labels["m"] <= n:
        raise ValueError(f"m must lie in 0..{n}")
    if "k" in labels and not 0 <= labels["k"] < n:
        raise ValueError(f"k must lie in 0..{n - 1}")
    if "parity" in labels and n < 2:
        raise ValueError("reflection parity needs n >= 2")
    if "m" in labels and "z2" in labels:
        raise IncompatibleLabelsError("the global flip does not preserve magnetization")
    if "parity" in labels and "k" in labels and (2 * labels["k"]) % n != 0:
        raise IncompatibleLabelsError(
            "reflection maps momentum k to -k; combine them only for k = 0 or k = n/2")


def sector_isometry(n: int, labels) -> SymmetrySector:
    """Joint eigenspace for the given labels, as an isometry with orthonormal rows."""
    labs = _normalize_labels(labels)
    lab = dict(labs)
    _check_labels(n, lab)
    if n > SECTOR_MAX_QUBITS:
        raise DimensionError(f"n={n} exceeds the sector construction cap {SECTOR_MAX_QUBITS}")
    dim = 2 ** n
    # group elements as (permutation, character weight) pairs
    elems = [(np.arange(dim, dtype=np.int64), 1.0 + 0j)]

    def extend(perm: np.ndarray, powers: Sequence[complex]) -> None:
        nonlocal elems
        new = []
        cur = np.arange(dim, dtype=np.int64)
        for w in powers:
            for p, c in elems:
                new.append((cur[p], c * w))
            cur = perm[cur]
        elems = new

    if "parity" in lab:
        extend(reflection_permutation(n), [1.0, lab["parity"]])
    if "z2" in lab:
        extend(flip_permutation(n), [1.0, lab["z2"]])
    if "k" in lab:
        eps = np.exp(2j * np.pi / n)
        extend(shift_permutation(n), [eps ** (lab["k"] * j) for j in range(n)])

    candidates = np.arange(dim, dtype=np.int64)
    if "m" in lab:
        candidates = candidates[_hamming(n) == lab["m"]]
    perms = np.array([p for p, _ in elems])
    weights = np.array([c for _, c in elems])
    seen = np.zeros(dim, dtype=bool)
    rows = []
    for b in candidates:
        if seen[b]:
            continue
        images = perms[:, b]
        seen[images] = True
        v = np.zeros(dim, dtype=complex)
        np.add.at(v, images, weights)
        nrm = np.linalg.norm(v)
        if nrm > ORBIT_TOL * np.sqrt(len(elems)):
            rows.append(v / nrm)
            if len(rows) * dim > SECTOR_MAX_ELEMENTS:
                raise CapacityError(
                    f"sector isometry for n={n} exceeds {SECTOR_MAX_ELEMENTS} stored amplitudes")
    q = np.array(rows).conj() if rows else np.zeros((0, dim), dtype=complex)
    if np.all(np.abs(q.imag) < 1e-15):
        q = q.real.astype(complex)
    return SymmetrySector(n, labs, q)


def magnetization_sectors(n: int) -> list[SymmetrySector]:
    if n < 1:
        raise ValueError("n must be >= 1")
    return [sector_isometry(n, {"m": m}) for m in range(n + 1)]


def label_family(n: int, names: Sequence[str]) -> list[SymmetrySector]:
    """Every non-empty sector of a complete label family, e.g. ``("m", "parity")``."""
    ranges = {"m": range(n + 1), "parity": (1, -1), "z2": (1, -1), "k": range(n)}
    out = []
    for vals in itertools.product(*(ranges[x] for x in names)):
        s = sector_isometry(n, dict(zip(names, vals)))
        if s.d_k:
            out.append(s)
    return out


def binomial_dimension(n: int, m: int) -> int:
    return comb(n, m)


def cyclic_sector_dimension(n: int, k: int) -> int:
    """Numerical rank of the momentum-``k`` projector."""
    if n < 2:
        raise ValueError("n must be >= 2")
    p = cyclic_projector(n, k % n)
    return int(np.linalg.matrix_rank(p, tol=ORBIT_TOL))


def _as_dense(a, n: int | None = None) -> np.ndarray:
    if isinstance(a, (PauliSum, PauliString)):
        return a.to_dense() if isinstance(a, PauliSum) else PauliSum.from_string(a).to_dense()
    return np.asarray(a, dtype=complex)


@dataclass(frozen=True)
class SymmetryCheck:
    ok: bool
    max_residual: float
    offending: int | None

    def __bool__(self) -> bool:
        return self.ok


def verify_symmetry(generators, symmetry_operator, tol: float = SYMMETRY_TOL) -> SymmetryCheck:
    """Frobenius norm of ``[G, S]`` for each generator; flags the worst offender."""
    s = _as_dense(symmetry_operator)
    res = []
    for i, g in enumerate(generators):
        gd = _as_dense(g)
        if gd.shape != s.shape:
            raise DimensionError(f"generator {i} shape {gd.shape} vs symmetry {s.shape}")
        res.append(float(np.linalg.norm(gd @ s - s @ gd)))
    bad = [i for i, r in enumerate(res) if r > tol]
    return SymmetryCheck(not bad, max(res, default=0.0), bad[0] if bad else None)


def leakage(a, sector: SymmetrySector) -> float:
    """Norm of the part of ``A Q^dag`` outside the sector."""
    from .sim import apply_operator

    q = sector.isometry
    if sector.d_k == 0:
        return 0.0
    aq = apply_operator(a, q.conj())  # rows: A v_j
    inside = (aq @ q.T) @ q.conj()
    return float(np.linalg.norm(aq - inside))


def verify_sector_invariance(generators, sector: SymmetrySector, tol: float = SYMMETRY_TOL) -> None:
    for i, g in enumerate(generators):
        r = leakage(g, sector)
        if r > tol * max(1.0, np.sqrt(sector.d_k)):
            raise InvarianceError(
                f"generator {i} does not preserve sector {sector.label_text} (leakage {r:.3e})")
