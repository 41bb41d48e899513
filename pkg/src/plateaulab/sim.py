"""Batched statevector simulation of layered ansatzes.

States are row vectors: a batch is an array of shape ``(B, d)`` and an
operator ``A`` acts as ``psi @ A.T``.  Layer ``l`` applies
``exp(-i theta[l, k] H_k)`` for ``k = 0, 1, ...`` in that order, so the
first generator of a layer is the first to touch the state.

Parameter slots are addressed 1-based as ``(layer, generator)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .pauli import PauliString, PauliSum, _bitcount, _reverse_bits, DimensionError

STATE_MAX_QUBITS = 14
OPERATOR_MAX_QUBITS = 20
CHUNK_ELEMENTS = 1 << 21
NORM_TOL = 1e-10


class IntegrityError(RuntimeError):
    """A numerical invariant was violated during simulation."""


class SlotError(ValueError):
    """A parameter slot is outside the circuit or frozen."""


# -- Pauli-sum application -------------------------------------------------

class PauliOperator:
    """``H psi`` for a Pauli sum, grouped by X-mask.

    ``(H psi)[a] = sum_x w_x[a] * psi[a ^ xr]`` with one weight vector per
    distinct X-mask.
    """

    def __init__(self, h: PauliSum):
        n = h.n
        if n > OPERATOR_MAX_QUBITS:
            raise DimensionError(f"{n} qubits exceeds the operator cap {OPERATOR_MAX_QUBITS}")
        self.n = n
        b = np.arange(1 << n, dtype=np.int64)
        groups: dict[int, np.ndarray] = {}
        for (x, z), c in h._terms.items():
            xr, zr = _reverse_bits(x, n), _reverse_bits(z, n)
            src = b ^ xr
            sign = 1 - 2 * (_bitcount(src & zr) & 1)
            w = c * (1j ** (bin(x & z).count("1") % 4)) * sign
            groups[xr] = groups.get(xr, 0) + w
        self.flips = [(xr, b ^ xr, w) for xr, w in sorted(groups.items())]

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = np.zeros(psi.shape, dtype=complex)
        for xr, perm, w in self.flips:
            if xr == 0:
                out += w * psi
            else:
                out += w * psi[..., perm]
        return out

    def expectation(self, psi: np.ndarray) -> np.ndarray:
        return np.einsum("...i,...i->...", psi.conj(), self.apply(psi)).real


_PAULI_CACHE: dict[PauliSum, PauliOperator] = {}


def pauli_operator(h: PauliSum) -> PauliOperator:
    op = _PAULI_CACHE.get(h)
    if op is None:
        if len(_PAULI_CACHE) > 256:
            _PAULI_CACHE.clear()
        op = _PAULI_CACHE[h] = PauliOperator(h)
    return op


def apply_pauli_sum(h: PauliSum, psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape[-1] != 1 << h.n:
        raise DimensionError(f"state length {psi.shape[-1]} vs {h.n} qubits")
    return pauli_operator(h).apply(psi)


def apply_operator(a, psi: np.ndarray) -> np.ndarray:
    """Apply a Pauli sum, Pauli string or dense matrix to row states."""
    if isinstance(a, PauliString):
        a = PauliSum.from_string(a)
    if isinstance(a, PauliSum):
        return apply_pauli_sum(a, psi)
    a = np.asarray(a)
    if a.shape[1] != psi.shape[-1]:
        raise DimensionError(f"operator shape {a.shape} vs state length {psi.shape[-1]}")
    return psi @ a.T


# -- generator exponentials --------------------------------------------------

class _Kernel:
    kind = "abstract"

    def apply(self, psi: np.ndarray, theta) -> np.ndarray:
        raise NotImplementedError


class _DiagonalRotations(_Kernel):
    """Commuting Pauli sum: one diagonal phase plus single-string rotations."""

    kind = "commuting"

    def __init__(self, h: PauliSum):
        n = h.n
        b = np.arange(1 << n, dtype=np.int64)
        diag = np.zeros(1 << n)
        self.rotations = []
        for (x, z), c in h._terms.items():
            zr = _reverse_bits(z, n)
            if x == 0:
                diag += c * (1 - 2 * (_bitcount(b & zr) & 1))
            else:
                xr = _reverse_bits(x, n)
                src = b ^ xr
                sign = 1 - 2 * (_bitcount(src & zr) & 1)
                w = (1j ** (bin(x & z).count("1") % 4)) * sign
                self.rotations.append((c, src, w))
        self.diag = diag if np.any(diag) else None
        if self.diag is None and not self.rotations:
            self.kind = "zero"

    def apply(self, psi, theta):
        th = np.asarray(theta, dtype=float)
        col = th[..., None] if th.ndim else th
        if self.diag is not None:
            psi = psi * np.exp(-1j * col * self.diag)
        # exp(-i a P) = cos(a) - i sin(a) P, with P applied via (perm, weight)
        for c, src, w in self.rotations:
            a = col * c
            psi = np.cos(a) * psi - 1j * np.sin(a) * (w * psi[..., src])
        return psi


class _Eigen(_Kernel):
    kind = "dense"

    def __init__(self, h: np.ndarray):
        h = np.asarray(h, dtype=complex)
        if np.max(np.abs(h - h.conj().T), initial=0.0) > 1e-10:
            raise IntegrityError("dense generator is not Hermitian")
        self.evals, self.evecs = np.linalg.eigh((h + h.conj().T) / 2)
        self.left = self.evecs.conj()
        self.right = self.evecs.T

    def apply(self, psi, theta):
        th = np.asarray(theta, dtype=float)
        col = th[..., None] if th.ndim else th
        # psi @ (V diag V^dag).T = ((psi @ conj(V)) * phases) @ V.T
        return ((psi @ self.left) * np.exp(-1j * col * self.evals)) @ self.right


def _commuting(h: PauliSum) -> bool:
    return h.commuting()


_KERNEL_CACHE: dict = {}


def generator_kernel(g) -> _Kernel:
    if isinstance(g, PauliSum):
        k = _KERNEL_CACHE.get(g)
        if k is None:
            if len(_KERNEL_CACHE) > 256:
                _KERNEL_CACHE.clear()
            if g.n > STATE_MAX_QUBITS:
                raise DimensionError(f"{g.n} qubits exceeds the statevector cap")
            k = _DiagonalRotations(g) if _commuting(g) else _Eigen(g.to_dense())
            _KERNEL_CACHE[g] = k
        return k
    return _Eigen(np.asarray(g))


def apply_generator_exponential(state, generator, theta):
    """``exp(-i theta H) psi`` for one state or a batch with per-row angles."""
    psi = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
    out = generator_kernel(generator).apply(psi, theta)
    if isinstance(state, StateVector):
        return StateVector(out)
    return out


@dataclass
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)

    @property
    def dimension(self) -> int:
        return self.amplitudes.shape[-1]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def check_norm(self, tol: float = NORM_TOL) -> None:
        if abs(self.norm() - 1.0) > tol:
            raise IntegrityError(f"state norm drifted to {self.norm():.15f}")


# -- circuits ---------------------------------------------------------------

@dataclass
class Circuit:
    """A model's generators repeated over ``L`` layers.

    ``sector`` runs the whole simulation in the coordinates of an invariant
    subspace; generators, observable and initial state are restricted once.
    ``frozen`` maps 1-based slots to fixed angles.
    """

    model: object
    L: int
    sector: object = None
    frozen: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be >= 1")
        m = self.model
        self.K = len(m.generators)
        for slot in self.frozen:
            self._check_slot(slot, allow_frozen=True)
        if self.sector is None:
            self.kernels = [generator_kernel(g) for g in m.generators]
            self._obs = m.observable
            self.psi0 = np.asarray(m.initial_state, dtype=complex)
            self._hq = list(m.generators)
        else:
            from .dla import restrict_operator
            from .symmetry import verify_sector_invariance

            verify_sector_invariance(m.generators, self.sector)
            leak = 1.0 - float(self.sector.projection_norm(m.initial_state))
            if abs(leak) > 1e-10:
                raise IntegrityError(f"initial state leaks outside {self.sector.label_text}")
            hs = [restrict_operator(g, self.sector) for g in m.generators]
            self.kernels = [_Eigen(h) for h in hs]
            self._obs = restrict_operator(m.observable, self.sector)
            self.psi0 = self.sector.project(m.initial_state)
            self._hq = hs
        self.dimension = self.psi0.shape[-1]

    @property
    def n_parameters(self) -> int:
        return self.L * self.K - len(self.frozen)

    def flat_index(self, slot: tuple[int, int]) -> int:
        p, q = self._check_slot(slot)
        return (p - 1) * self.K + (q - 1)

    def _check_slot(self, slot, allow_frozen: bool = False) -> tuple[int, int]:
        try:
            p, q = (int(s) for s in slot)
        except (TypeError, ValueError):
            raise SlotError(f"slot must be a (layer, generator) pair, got {slot!r}") from None
        if not (1 <= p <= self.L and 1 <= q <= self.K):
            raise SlotError(f"slot {(p, q)} outside layers 1..{self.L}, generators 1..{self.K}")
        if not allow_frozen and (p, q) in self.frozen:
            raise SlotError(f"slot {(p, q)} is frozen")
        return p, q

    def _grid(self, theta) -> np.ndarray:
        th = np.asarray(theta, dtype=float)
        grid = (self.L, self.K)
        if th.ndim in (2, 3) and th.shape[-2:] == grid:
            pass
        elif th.ndim in (1, 2) and th.shape[-1] == self.L * self.K:
            th = th.reshape(th.shape[:-1] + grid)
        else:
            raise ValueError(f"theta shape {th.shape} does not match L={self.L}, K={self.K}")
        if self.frozen:
            th = th.copy()
            for (p, q), v in self.frozen.items():
                th[..., p - 1, q - 1] = v
        return th

    def _evolve(self, psi, th, start: int, stop: int) -> np.ndarray:
        """Apply gates with flat index in ``[start, stop)``; ``th`` has shape (B, L, K)."""
        for f in range(start, stop):
            l, k = divmod(f, self.K)
            psi = self.kernels[k].apply(psi, th[:, l, k])
        return psi

    def _batch(self, theta):
        th = self._grid(theta)
        single = th.ndim == 2
        return (th[None] if single else th), single

    def states(self, theta, psi0=None) -> np.ndarray:
        th, single = self._batch(theta)
        start = self.psi0 if psi0 is None else psi0
        psi = np.broadcast_to(start, (th.shape[0], self.dimension)).astype(complex)
        out = self._evolve(psi, th, 0, self.L * self.K)
        return out[0] if single else out

    def unitary(self, theta) -> np.ndarray:
        """Dense ``U(theta)`` for small circuits (columns are evolved basis states)."""
        th = self._grid(theta)
        if th.ndim != 2:
            raise ValueError("unitary takes a single parameter grid")
        d = self.dimension
        rows = np.eye(d, dtype=complex)
        out = self._evolve(rows, np.broadcast_to(th, (d,) + th.shape), 0, self.L * self.K)
        return out.T

    def _observable(self, psi):
        o = self._obs
        return apply_operator(o, psi)

    def _chunks(self, th: np.ndarray):
        size = max(1, CHUNK_ELEMENTS // max(self.dimension, 1))
        for i in range(0, th.shape[0], size):
            yield th[i:i + size]

    def costs(self, theta) -> np.ndarray:
        th, single = self._batch(theta)
        out = []
        for part in self._chunks(th):
            psi = self.states(part)
            psi = psi[None] if psi.ndim == 1 else psi
            val = np.einsum("bi,bi->b", psi.conj(), self._observable(psi))
            if np.max(np.abs(val.imag), initial=0.0) > 1e-8:
                raise IntegrityError("cost has an imaginary part")
            out.append(val.real / self.model.divisor)
        res = np.concatenate(out)
        return res[0] if single else res

    def gradients(self, theta, slot) -> np.ndarray:
        p, q = self._check_slot(slot)
        th, single = self._batch(theta)
        f = (p - 1) * self.K + (q - 1)
        total = self.L * self.K
        hq = self._hq[q - 1]
        out = []
        for part in self._chunks(th):
            b = part.shape[0]
            psi = np.broadcast_to(self.psi0, (b, self.dimension)).astype(complex)
            phi = self._evolve(psi, part, 0, f + 1)
            y = apply_operator(hq, phi)
            # push phi and H_q phi through the remaining gates together
            pair = self._evolve(np.concatenate([phi, y]), np.concatenate([part, part]),
                                f + 1, total)
            u, w = pair[:b], pair[b:]
            z = np.einsum("bi,bi->b", w.conj(), self._observable(u))
            out.append(-2.0 * z.imag / self.model.divisor)
        res = np.concatenate(out)
        return res[0] if single else res


def evaluate_cost(circuit: Circuit, theta, initial_state=None, observable=None) -> float:
    """``<psi(theta)|O|psi(theta)> / divisor``; overrides apply to a full-space circuit."""
    if initial_state is None and observable is None:
        return circuit.costs(theta)
    th = circuit._grid(theta)
    psi0 = circuit.psi0 if initial_state is None else np.asarray(initial_state, dtype=complex)
    psi = circuit.states(th, psi0)
    o = circuit._obs if observable is None else observable
    val = np.einsum("...i,...i->...", psi.conj(), apply_operator(o, psi))
    return val.real / circuit.model.divisor


def analytic_gradient(circuit: Circuit, theta, mu) -> float:
    """Exact ``dC/dtheta_mu`` from the before/after split at slot ``mu``."""
    return circuit.gradients(theta, mu)


def finite_difference_gradient(circuit: Circuit, theta, mu, h: float = 1e-5) -> float:
    if h <= 0:
        raise ValueError("h must be positive")
    th = np.array(circuit._grid(theta), dtype=float)
    p, q = circuit._check_slot(mu)
    plus, minus = th.copy(), th.copy()
    plus[..., p - 1, q - 1] += h
    minus[..., p - 1, q - 1] -= h
    return (circuit.costs(plus) - circuit.costs(minus)) / (2 * h)


def sample_parameters(rng, L: int, K: int, frozen: dict | None = None) -> np.ndarray:
    """Uniform angles on [0, 2 pi) for every slot; frozen slots keep their values."""
    rng = np.random.default_rng(rng)
    th = rng.uniform(0.0, 2 * np.pi, size=(L, K))
    for (p, q), v in (frozen or {}).items():
        th[p - 1, q - 1] = v
    return th


def sample_batch(seed: int, n_samples: int, L: int, K: int, frozen: dict | None = None) -> np.ndarray:
    """One independent stream per sample, so results do not depend on chunking."""
    children = np.random.SeedSequence(seed).spawn(n_samples)
    return np.stack([sample_parameters(np.random.Generator(np.random.PCG64(c)), L, K, frozen)
                     for c in children])


def sector_trajectory(circuit: Circuit, theta, sector, checkpoints: Sequence[int]) -> np.ndarray:
    """Sector projection norm after the given numbers of completed layers."""
    th = circuit._grid(theta)
    if th.ndim != 2:
        raise ValueError("single parameter grid expected")
    psi = circuit.psi0[None].astype(complex)
    out = []
    done = 0
    for c in sorted(checkpoints):
        psi = circuit._evolve(psi, th[None], done * circuit.K, c * circuit.K)
        done = c
        out.append(float(sector.projection_norm(psi[0])))
    return np.array(out)
