"""Generator sets, observables and initial states for the ansatz families.

Sites are 0-based in code and in Pauli labels; site 0 is the leftmost
character of a label and the most significant bit of a basis index.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any

import numpy as np

from .pauli import PauliString, PauliSum

MODEL_NAMES = ("hea", "spin_glass", "xxz_u", "xxz_c", "xxz_c_left",
               "tfim", "ltfim", "er_qaoa", "su2_toy")
BOUNDARIES = ("open", "closed")


class ModelError(ValueError):
    """Unknown model, missing parameter or unsupported boundary."""


@dataclass(frozen=True)
class SpinIrrep:
    d: int
    Sx: np.ndarray
    Sy: np.ndarray
    Sz: np.ndarray

    @property
    def S(self) -> float:
        return (self.d - 1) / 2

    @property
    def m_values(self) -> np.ndarray:
        """``S_z`` eigenvalue of each basis index (descending from S)."""
        return self.S - np.arange(self.d)

    def basis_state(self, m: float) -> np.ndarray:
        idx = np.nonzero(np.isclose(self.m_values, m))[0]
        if idx.size != 1:
            raise ModelError(f"m={m} is not an S_z eigenvalue for d={self.d}")
        v = np.zeros(self.d, dtype=complex)
        v[idx[0]] = 1.0
        return v


def spin_irrep(d: int) -> SpinIrrep:
    """Spin-(d-1)/2 matrices in the ``S_z`` eigenbasis ordered ``m = S, S-1, ..., -S``."""
    if d < 2:
        raise ModelError("irrep dimension must be >= 2")
    s = (d - 1) / 2
    m = s - np.arange(d)
    raise_ = np.zeros((d, d))
    # S_+ |m> = sqrt(S(S+1) - m(m+1)) |m+1>, and |m+1> sits one index lower
    for i in range(1, d):
        raise_[i - 1, i] = np.sqrt(s * (s + 1) - m[i] * (m[i] + 1))
    lower = raise_.T
    sx = (raise_ + lower) / 2
    sy = (raise_ - lower) / 2j
    return SpinIrrep(d, sx.astype(complex), sy, np.diag(m).astype(complex))


@dataclass(frozen=True, eq=False)
class ModelSpec:
    name: str
    n: int | None
    boundary: str
    params: dict
    generators: tuple
    observable: Any
    divisor: float
    initial_state: np.ndarray
    state_tag: str
    sector_labels: tuple = ()
    term_groups: tuple = ()
    default_mu_generator: int = 2
    metadata: dict = field(default_factory=dict)

    @property
    def dense(self) -> bool:
        return not isinstance(self.generators[0], PauliSum)

    @property
    def dimension(self) -> int:
        return int(self.initial_state.shape[0])

    @property
    def K(self) -> int:
        return len(self.generators)

    def sector(self):
        """The invariant sector holding the initial state, or None."""
        if not self.sector_labels or self.dense:
            return None
        from .symmetry import sector_isometry

        return sector_isometry(self.n, dict(self.sector_labels))

    def default_mu(self, L: int) -> tuple[int, int]:
        return (-(-L // 2), self.default_mu_generator)

    def to_dict(self) -> dict:
        def text(op):
            return op.to_text() if isinstance(op, PauliSum) else "dense"
        return {
            "name": self.name,
            "n": self.n,
            "boundary": self.boundary,
            "params": {k: v for k, v in self.params.items()},
            "generators": [text(g) for g in self.generators],
            "observable": text(self.observable),
            "divisor": self.divisor,
            "initial_state": self.state_tag,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _single(n: int, site: int, op: str, c: float = 1.0) -> PauliSum:
    return PauliSum.from_string(PauliString.single(n, site, op), c)


def _two(n: int, i: int, j: int, op: str, c: float = 1.0) -> PauliSum:
    lbl = ["I"] * n
    lbl[i] = op
    lbl[j] = op
    return PauliSum.from_string("".join(lbl), c)


def _total(terms, n: int) -> PauliSum:
    out = PauliSum.zero(n)
    for t in terms:
        out = out + t
    return out


def _bonds(n: int, boundary: str) -> list[tuple[int, int]]:
    bonds = [(i, i + 1) for i in range(n - 1)]
    if boundary == "closed" and n > 2:
        bonds.append((n - 1, 0))
    elif boundary == "closed":
        bonds.append((1, 0))
    return bonds


def zz_sum(n: int, bonds) -> PauliSum:
    return _total((_two(n, i, j, "Z") for i, j in bonds), n)


def field_sum(n: int, op: str, sites=None) -> PauliSum:
    return _total((_single(n, i, op) for i in (range(n) if sites is None else sites)), n)


def _product_state(n: int, kind: str) -> np.ndarray:
    d = 2 ** n
    if kind == "zero":
        v = np.zeros(d, dtype=complex)
        v[0] = 1.0
        return v
    return np.full(d, 1 / np.sqrt(d), dtype=complex)


def xxz_initial_state(n: int, m: int) -> np.ndarray:
    """Reflection-even state with ``m`` leading zeros: ``(|0^m 1^(n-m)> + |1^(n-m) 0^m>)/sqrt 2``."""
    if not 0 <= m <= n:
        raise ModelError(f"m must lie in 0..{n}")
    a = "0" * m + "1" * (n - m)
    b = "1" * (n - m) + "0" * m
    v = np.zeros(2 ** n, dtype=complex)
    v[int(a, 2)] += 1.0
    v[int(b, 2)] += 1.0
    return v / np.linalg.norm(v)


def er_graph(n: int, seed: int) -> list[tuple[int, int]]:
    """Each of the C(n,2) pairs kept independently with probability 1/2."""
    if n < 2:
        raise ModelError("graph needs n >= 2")
    rng = np.random.default_rng(seed)
    keep = rng.random(n * (n - 1) // 2) < 0.5
    return [e for e, k in zip(combinations(range(n), 2), keep) if k]


def trotterize_controls(drift_index: int, fields, dt) -> np.ndarray:
    """Parameter grid for a Trotterized drift-plus-controls propagator.

    Row ``l`` gets ``dt[l]`` in the drift column and ``dt[l] * fields[l, k]``
    in the control columns, in control order around the drift column.
    """
    f = np.atleast_2d(np.asarray(fields, dtype=float))
    L, K = f.shape
    dts = np.broadcast_to(np.asarray(dt, dtype=float), (L,)).copy()
    if np.any(dts <= 0):
        raise ValueError("time steps must be positive")
    if not 0 <= drift_index <= K:
        raise ValueError(f"drift index must lie in 0..{K}")
    ctrl = dts[:, None] * f
    return np.concatenate([ctrl[:, :drift_index], dts[:, None], ctrl[:, drift_index:]], axis=1)


def commuting_groups(h: PauliSum) -> tuple:
    """Greedy partition of a sum's strings into pairwise-commuting groups."""
    groups: list[list[PauliString]] = []
    for p, _ in sorted(h.items(), key=lambda t: t[0].key):
        for g in groups:
            if all(p.commutes_with(q) for q in g):
                g.append(p)
                break
        else:
            groups.append([p])
    return tuple(tuple(g) for g in groups)


def _verify_groups(groups) -> None:
    for gi, g in enumerate(groups):
        for p, q in combinations(g, 2):
            if not p.commutes_with(q):
                raise ModelError(f"term group {gi} holds anticommuting strings {p} and {q}")


def _require(params: dict, key: str, default=None):
    if key in params and params[key] is not None:
        return params[key]
    if default is None:
        raise ModelError(f"missing parameter {key!r}")
    return default


def build_model(name: str, n: int, boundary: str = "open", **params) -> ModelSpec:
    """Assemble a model; ``n`` is the irrep dimension for ``su2_toy``."""
    if name not in MODEL_NAMES:
        raise ModelError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
    if boundary not in BOUNDARIES:
        raise ModelError(f"boundary must be open or closed, got {boundary!r}")
    if n is None or int(n) < 2:
        raise ModelError("n must be >= 2")
    n = int(n)
    if name == "su2_toy":
        return _su2_model(n, params)
    if boundary == "closed" and name not in ("tfim", "ltfim"):
        raise ModelError(f"model {name} supports open boundary only")
    builder = {
        "hea": _hea, "spin_glass": _spin_glass, "xxz_u": _xxz, "xxz_c": _xxz,
        "xxz_c_left": _xxz, "tfim": _ising, "ltfim": _ising, "er_qaoa": _er,
    }[name]
    spec = builder(name, n, boundary, dict(params))
    groups = tuple(commuting_groups(g) for g in spec.generators)
    for g in groups:
        _verify_groups(g)
    for i, g in enumerate(spec.generators):
        if g.is_zero:
            raise ModelError(f"generator {i + 1} of {name} is zero at n={n}")
        if abs(g.trace()) > 1e-9:
            raise ModelError(f"generator {i + 1} of {name} carries a trace")
    if spec.divisor <= 0:
        raise ModelError("normalization divisor must be positive")
    object.__setattr__(spec, "term_groups", groups)
    return spec


def _hea(name, n, boundary, p):
    gens = ([_single(n, i, "X") for i in range(n)] + [_single(n, i, "Y") for i in range(n)]
            + [zz_sum(n, _bonds(n, "open"))])
    obs = _two(n, 0, 1, "Z")
    return ModelSpec(name, n, boundary, {}, tuple(gens), obs, 1.0,
                     _product_state(n, "zero"), "zero")


def _spin_glass(name, n, boundary, p):
    seed = int(_require(p, "seed", 0))
    rng = np.random.default_rng(seed)
    h = rng.standard_normal(n)
    pairs = list(combinations(range(n), 2))
    J = rng.standard_normal(len(pairs))
    ham = _total([_single(n, i, "Z", h[i]) for i in range(n)]
                 + [_two(n, i, j, "Z", J[k]) for k, (i, j) in enumerate(pairs)], n)
    gens = (field_sum(n, "X"), ham)
    return ModelSpec(name, n, boundary, {"seed": seed}, gens, ham, float(n),
                     _product_state(n, "plus"), "plus",
                     metadata={"h": h.tolist(), "J": J.tolist()})


def _xxz(name, n, boundary, p):
    if n < 3:
        raise ModelError("xxz models need n >= 3 so that both bond groups are non-empty")
    J = float(_require(p, "J", 1.0))
    m = int(_require(p, "m", 1))
    if not 1 <= m <= n - 1:
        raise ModelError(f"m must lie in 1..{n - 1}")
    even = [(i, i + 1) for i in range(0, n - 1, 2)]
    odd = [(i, i + 1) for i in range(1, n - 1, 2)]

    def hop(bonds):
        return _total([_two(n, i, j, "X") + _two(n, i, j, "Y") for i, j in bonds], n)

    gens = [hop(even), hop(odd), zz_sum(n, even), zz_sum(n, odd)]
    if name == "xxz_c":
        gens.append(_single(n, 0, "Z") + _single(n, n - 1, "Z"))
    elif name == "xxz_c_left":
        gens.append(_single(n, 0, "Z"))
    bonds = _bonds(n, "open")
    obs = hop(bonds) + zz_sum(n, bonds) * J
    # reflection swaps the even and odd bond groups when n is odd
    labels = (("m", n - m), ("parity", 1))
    if name == "xxz_c_left" or n % 2:
        labels = (("m", n - m),)
    return ModelSpec(name, n, boundary, {"J": J, "m": m}, tuple(gens), obs, float(n),
                     xxz_initial_state(n, m), f"psi_{m}+", labels)


def _ising(name, n, boundary, p):
    hx = float(_require(p, "h_x", 1.0))
    hz = float(_require(p, "h_z", 1.0))
    cost = _require(p, "cost", "tfim")
    if cost not in ("tfim", "ltfim"):
        raise ModelError("cost must be 'tfim' or 'ltfim'")
    bonds = _bonds(n, boundary)
    zz, xs, zs = zz_sum(n, bonds), field_sum(n, "X"), field_sum(n, "Z")
    gens = [zz, xs] + ([zs] if name == "ltfim" else [])
    obs = zz + xs * hx
    if cost == "ltfim":
        obs = obs + zs * hz
    if name == "tfim":
        labels = (("parity", 1), ("z2", 1)) if boundary == "open" else (("z2", 1), ("k", 0))
    else:
        labels = (("parity", 1),) if boundary == "open" else (("k", 0),)
    params = {"h_x": hx, "h_z": hz, "cost": cost}
    return ModelSpec(name, n, boundary, params, tuple(gens), obs, float(n),
                     _product_state(n, "plus"), "plus", labels)


def _er(name, n, boundary, p):
    if "edges" in p and p["edges"] is not None:
        edges = [tuple(sorted((int(a), int(b)))) for a, b in p["edges"]]
        seed = p.get("seed")
    else:
        seed = int(_require(p, "seed", 0))
        edges = er_graph(n, seed)
    for a, b in edges:
        if not (0 <= a < n and 0 <= b < n) or a == b:
            raise ModelError(f"invalid edge {(a, b)} for n={n}")
    if not edges:
        raise ModelError("graph has no edges; the cost normalization is undefined")
    cut = zz_sum(n, edges) * 0.5
    ham = cut - PauliSum.identity(n, 0.5 * len(edges))
    gens = (cut, field_sum(n, "X"))
    return ModelSpec(name, n, boundary, {"seed": seed, "edges": [list(e) for e in edges]},
                     gens, ham, float(len(edges)), _product_state(n, "plus"), "plus",
                     (("z2", 1),))


def _su2_model(d, p):
    irrep = spin_irrep(d)
    m = float(_require(p, "m", irrep.S))
    normalized = bool(p.get("normalized", False))
    state = irrep.basis_state(m)
    obs = irrep.Sx + irrep.Sy + irrep.Sz
    divisor = irrep.S if normalized else 1.0
    return ModelSpec("su2_toy", None, "open", {"d": d, "m": m, "normalized": normalized},
                     (irrep.Sx, irrep.Sy), obs, float(divisor), state, f"m={m:g}",
                     default_mu_generator=1, metadata={"irrep": irrep})


def default_layers(model: ModelSpec) -> int:
    """Depth conventions of the reference experiments."""
    n = model.n
    if model.name == "hea":
        return 200
    if model.name == "su2_toy":
        return 100
    if model.name == "er_qaoa" or (model.name == "tfim" and model.boundary == "open"):
        return 12 * n
    return 6 * n
