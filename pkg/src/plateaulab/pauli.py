"""Pauli strings and real-weighted Pauli sums on n qubits.

A string is stored in symplectic form: two integer bitmasks ``x`` and ``z``
where bit ``i`` refers to qubit ``i`` (0-based, qubit 0 leftmost in labels).
Site ``i`` carries X if only the x bit is set, Z if only the z bit is set
and Y if both are set.  With this encoding

    P = prod_i  i^{x_i z_i} X_i^{x_i} Z_i^{z_i}

so products only need integer bookkeeping mod 4.

Dense matrices use qubit 0 as the most significant tensor factor, i.e.
``to_dense(Z on qubit 0, n=2) == kron(Z, I)``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Union

import numpy as np

PRUNE_TOL = 1e-12
DENSE_MAX_QUBITS = 12

_LABEL_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LABEL = {v: k for k, v in _LABEL_BITS.items()}


class DimensionError(ValueError):
    """Operands act on different numbers of qubits."""


class CapacityError(ValueError):
    """Requested dense object exceeds the configured size cap."""


def _popcount(v: int) -> int:
    return bin(v).count("1")


def _bitcount(a: np.ndarray) -> np.ndarray:
    # np.bitwise_count returns uint8; widen before doing signed arithmetic
    return np.bitwise_count(a).astype(np.int64)


def _reverse_bits(v: int, n: int) -> int:
    return int(format(v, f"0{n}b")[::-1], 2) if n else 0


@dataclass(frozen=True)
class PauliString:
    n: int
    x: int = 0
    z: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("PauliString needs n >= 1")
        limit = 1 << self.n
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise ValueError(f"masks exceed {self.n} qubits")

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        label = label.strip().upper()
        if not label or any(c not in _LABEL_BITS for c in label):
            raise ValueError(f"invalid Pauli label {label!r}")
        x = z = 0
        for i, c in enumerate(label):
            bx, bz = _LABEL_BITS[c]
            x |= bx << i
            z |= bz << i
        return cls(len(label), x, z)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0, 0)

    @classmethod
    def single(cls, n: int, site: int, op: str) -> "PauliString":
        bx, bz = _LABEL_BITS[op.upper()]
        return cls(n, bx << site, bz << site)

    @property
    def label(self) -> str:
        return "".join(
            _BITS_LABEL[((self.x >> i) & 1, (self.z >> i) & 1)] for i in range(self.n)
        )

    @property
    def key(self) -> int:
        return self.x | (self.z << self.n)

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    @property
    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    @property
    def is_diagonal(self) -> bool:
        return self.x == 0

    def commutes_with(self, other: "PauliString") -> bool:
        _check_n(self.n, other.n)
        return symplectic_form(self, other) == 0

    def __str__(self) -> str:
        return self.label

    def __repr__(self) -> str:
        return f"PauliString('{self.label}')"


def _check_n(a: int, b: int) -> None:
    if a != b:
        raise DimensionError(f"qubit-count mismatch: {a} vs {b}")


def symplectic_form(p: PauliString, q: PauliString) -> int:
    """0 if ``p`` and ``q`` commute, 1 if they anticommute."""
    return (_popcount(p.x & q.z) + _popcount(p.z & q.x)) & 1


def multiply(p: PauliString, q: PauliString) -> tuple[int, PauliString]:
    """Return ``(k, r)`` with ``p @ q == 1j**k * r`` exactly."""
    _check_n(p.n, q.n)
    x, z = p.x ^ q.x, p.z ^ q.z
    k = (
        _popcount(p.x & p.z)
        + _popcount(q.x & q.z)
        + 2 * _popcount(p.z & q.x)
        - _popcount(x & z)
    ) % 4
    return k, PauliString(p.n, x, z)


Coefficients = Mapping[Union[PauliString, str], float]


class PauliSum:
    """Hermitian operator ``sum_P c_P P`` with real coefficients.

    Instances are treated as immutable values; arithmetic returns new sums.
    """

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Coefficients | None = None):
        if n < 1:
            raise ValueError("PauliSum needs n >= 1")
        self.n = n
        acc: dict[tuple[int, int], float] = {}
        for p, c in (terms or {}).items():
            if isinstance(p, str):
                p = PauliString.from_label(p)
            _check_n(n, p.n)
            if isinstance(c, complex):
                if abs(c.imag) > PRUNE_TOL:
                    raise ValueError("PauliSum coefficients must be real")
                c = c.real
            key = (p.x, p.z)
            acc[key] = acc.get(key, 0.0) + float(c)
        self._terms = {k: v for k, v in acc.items() if abs(v) >= PRUNE_TOL}

    # --- construction helpers -------------------------------------------------
    @classmethod
    def _from_keys(cls, n: int, terms: dict[tuple[int, int], float]) -> "PauliSum":
        out = cls.__new__(cls)
        out.n = n
        out._terms = {k: v for k, v in terms.items() if abs(v) >= PRUNE_TOL}
        return out

    @classmethod
    def from_string(cls, p: PauliString | str, coeff: float = 1.0) -> "PauliSum":
        if isinstance(p, str):
            p = PauliString.from_label(p)
        return cls(p.n, {p: coeff})

    @classmethod
    def zero(cls, n: int) -> "PauliSum":
        return cls(n)

    @classmethod
    def identity(cls, n: int, coeff: float = 1.0) -> "PauliSum":
        return cls(n, {PauliString.identity(n): coeff})

    @classmethod
    def parse(cls, text: str, n: int | None = None) -> "PauliSum":
        """Parse ``"1.0*XIZ + -0.5*ZZI"``; a bare label has coefficient 1."""
        text = text.strip()
        if not text or text == "0":
            if n is None:
                raise ValueError("cannot infer n from an empty sum")
            return cls(n)
        terms: list[tuple[str, float]] = []
        for chunk in re.split(r"\s+\+\s+", text):
            chunk = chunk.strip()
            if "*" in chunk:
                coeff, label = chunk.split("*", 1)
                terms.append((label.strip(), float(coeff)))
            else:
                sign = -1.0 if chunk.startswith("-") else 1.0
                terms.append((chunk.lstrip("+-").strip(), sign))
        sizes = {len(lbl) for lbl, _ in terms}
        if n is None:
            if len(sizes) != 1:
                raise ValueError(f"inconsistent label lengths in {text!r}")
            n = sizes.pop()
        out: dict[PauliString, float] = {}
        for lbl, c in terms:
            p = PauliString.from_label(lbl)
            out[p] = out.get(p, 0.0) + c
        return cls(n, out)

    # --- views ---------------------------------------------------------------
    @property
    def terms(self) -> Mapping[PauliString, float]:
        return MappingProxyType(
            {PauliString(self.n, x, z): c for (x, z), c in self._terms.items()}
        )

    def items(self) -> Iterable[tuple[PauliString, float]]:
        for (x, z), c in self._terms.items():
            yield PauliString(self.n, x, z), c

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """x masks, z masks and coefficients as parallel numpy arrays."""
        if not self._terms:
            e = np.zeros(0, dtype=np.int64)
            return e, e.copy(), np.zeros(0)
        keys = np.array(list(self._terms.keys()), dtype=np.int64)
        return keys[:, 0], keys[:, 1], np.fromiter(self._terms.values(), float, len(self._terms))

    def __len__(self) -> int:
        return len(self._terms)

    def coefficient(self, p: PauliString | str) -> float:
        if isinstance(p, str):
            p = PauliString.from_label(p)
        return self._terms.get((p.x, p.z), 0.0)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def is_diagonal(self) -> bool:
        return all(x == 0 for x, _ in self._terms)

    def trace(self) -> float:
        """``Tr[H]`` over the full 2^n space."""
        return (1 << self.n) * self._terms.get((0, 0), 0.0)

    def norm(self) -> float:
        """Normalized Hilbert-Schmidt norm ``sqrt(Tr[H^2] / 2^n)``."""
        return float(np.sqrt(sum(c * c for c in self._terms.values())))

    def traceless(self) -> "PauliSum":
        terms = dict(self._terms)
        terms.pop((0, 0), None)
        return PauliSum._from_keys(self.n, terms)

    def commuting(self) -> bool:
        """True when every pair of member strings commutes."""
        strings = [PauliString(self.n, x, z) for x, z in self._terms]
        return all(
            symplectic_form(a, b) == 0
            for i, a in enumerate(strings)
            for b in strings[i + 1:]
        )

    # --- arithmetic ----------------------------------------------------------
    def __add__(self, other: "PauliSum") -> "PauliSum":
        if not isinstance(other, PauliSum):
            return NotImplemented
        _check_n(self.n, other.n)
        terms = dict(self._terms)
        for k, v in other._terms.items():
            terms[k] = terms.get(k, 0.0) + v
        return PauliSum._from_keys(self.n, terms)

    def __neg__(self) -> "PauliSum":
        return PauliSum._from_keys(self.n, {k: -v for k, v in self._terms.items()})

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-other)

    def __mul__(self, scalar: float) -> "PauliSum":
        if not isinstance(scalar, (int, float, np.floating, np.integer)):
            return NotImplemented
        s = float(scalar)
        return PauliSum._from_keys(self.n, {k: s * v for k, v in self._terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "PauliSum":
        return self * (1.0 / float(scalar))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def allclose(self, other: "PauliSum", atol: float = 1e-12) -> bool:
        _check_n(self.n, other.n)
        return (self - other).norm() <= atol

    def __hash__(self):
        return hash((self.n, frozenset(self._terms.items())))

    def to_text(self, precision: int = 12) -> str:
        if not self._terms:
            return "0"
        parts = []
        for (x, z), c in sorted(self._terms.items(), key=lambda kv: PauliString(self.n, *kv[0]).label):
            parts.append(f"{c:.{precision}g}*{PauliString(self.n, x, z).label}")
        return " + ".join(parts)

    def __str__(self) -> str:
        return self.to_text()

    def __repr__(self) -> str:
        return f"PauliSum({self.to_text(6)!r})"

    def to_dense(self) -> np.ndarray:
        return to_dense(self)


def pauli_sum(*terms: tuple[str, float]) -> PauliSum:
    """Shorthand: ``pauli_sum(("XX", 1.0), ("YY", 1.0))``."""
    n = len(terms[0][0])
    out: dict[PauliString, float] = {}
    for lbl, c in terms:
        p = PauliString.from_label(lbl)
        out[p] = out.get(p, 0.0) + c
    return PauliSum(n, out)


def herm_commutator(a: PauliSum, b: PauliSum) -> PauliSum:
    """``-i [a, b]``, the Hermitian representative of the bracket of ia, ib."""
    _check_n(a.n, b.n)
    if a.is_zero or b.is_zero:
        return PauliSum(a.n)
    xa, za, ca = a.arrays()
    xb, zb, cb = b.arrays()
    anti = (_bitcount(xa[:, None] & zb[None, :])
            + _bitcount(za[:, None] & xb[None, :])) & 1
    ia, ib = np.nonzero(anti)
    if ia.size == 0:
        return PauliSum(a.n)
    x1, z1, x2, z2 = xa[ia], za[ia], xb[ib], zb[ib]
    x, z = x1 ^ x2, z1 ^ z2
    k = (_bitcount(x1 & z1) + _bitcount(x2 & z2)
         + 2 * _bitcount(z1 & x2) - _bitcount(x & z)) % 4
    # anticommuting pairs have odd k: -i(PQ - QP) = -2 i^{k+1} R
    coeff = np.where(k == 1, 2.0, -2.0) * ca[ia] * cb[ib]
    keys = x.astype(np.int64) | (z.astype(np.int64) << a.n)
    uniq, inv = np.unique(keys, return_inverse=True)
    summed = np.zeros(uniq.size)
    np.add.at(summed, inv, coeff)
    mask = (1 << a.n) - 1
    terms = {
        (int(u) & mask, int(u) >> a.n): float(v)
        for u, v in zip(uniq, summed)
    }
    return PauliSum._from_keys(a.n, terms)


def hs_inner(a: PauliSum, b: PauliSum) -> float:
    """Normalized Hilbert-Schmidt inner product ``Tr[ab] / 2^n``."""
    _check_n(a.n, b.n)
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    return float(sum(c * large._terms.get(k, 0.0) for k, c in small._terms.items()))


def basis_action(p: PauliString) -> tuple[np.ndarray, np.ndarray]:
    """``(perm, phase)`` with ``P|b> = phase[b] |perm[b]>``.

    ``perm`` is an involution, so ``P @ psi == phase[perm] * psi[perm]``.
    """
    n = p.n
    xr = _reverse_bits(p.x, n)
    zr = _reverse_bits(p.z, n)
    b = np.arange(1 << n, dtype=np.int64)
    sign = 1 - 2 * (_bitcount(b & zr) & 1)
    phase = (1j ** (_popcount(p.x & p.z) % 4)) * sign
    return b ^ xr, phase.astype(complex)


def diagonal(h: PauliSum) -> np.ndarray:
    """Diagonal of a Z-type sum as a real vector of length 2^n."""
    if not h.is_diagonal:
        raise ValueError("sum has off-diagonal terms")
    n = h.n
    b = np.arange(1 << n, dtype=np.int64)
    out = np.zeros(1 << n)
    for (_, z), c in h._terms.items():
        zr = _reverse_bits(z, n)
        out += c * (1 - 2 * (_bitcount(b & zr) & 1))
    return out


def to_dense(h: PauliSum | PauliString) -> np.ndarray:
    if isinstance(h, PauliString):
        h = PauliSum.from_string(h)
    if h.n > DENSE_MAX_QUBITS:
        raise CapacityError(f"to_dense capped at {DENSE_MAX_QUBITS} qubits, got {h.n}")
    dim = 1 << h.n
    m = np.zeros((dim, dim), dtype=complex)
    cols = np.arange(dim)
    for p, c in h.items():
        perm, phase = basis_action(p)
        m[perm, cols] += c * phase
    return m
