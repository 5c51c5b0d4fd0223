"""
Encoding dynamics: Pauli strings, separable single-qubit generators and
general node-local Pauli-sum Hamiltonians.

Node ``mu`` imprints ``exp(-i theta_mu G_mu)`` where ``G_mu`` acts only on the
qubits owned by the node.  All node generators commute, so the full encoding
is a product over nodes and is computed node by node from small local
eigendecompositions.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .hilbert import DensityMatrix, StateVector, apply_local
from .resources import ResourcePartition, TargetFunction, as_partition

__all__ = [
    "PAULI",
    "PauliString",
    "SeparableDynamics",
    "NodeHamiltonian",
    "GeneralLocalHamiltonian",
    "Orthotope",
    "Witness",
    "collective_generator",
    "encode",
    "local_eigensystem",
    "build_orthotope",
    "target_in_O2minus",
    "has_anticommuting_pauli",
    "conjugating_rotation",
    "bloch_rotation",
]

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_SIGMA = np.stack([PAULI["X"], PAULI["Y"], PAULI["Z"]])

# (a, b) -> (phase, letter) with sigma_a sigma_b = phase * sigma_letter
_MUL = {}
for _a in "IXYZ":
    _MUL[("I", _a)] = (1, _a)
    _MUL[(_a, "I")] = (1, _a)
    _MUL[(_a, _a)] = (1, "I")
for _a, _b, _c in (("X", "Y", "Z"), ("Y", "Z", "X"), ("Z", "X", "Y")):
    _MUL[(_a, _b)] = (1j, _c)
    _MUL[(_b, _a)] = (-1j, _c)

_PHASES = {1: "+", -1: "-", 1j: "+i", -1j: "-i"}

DEGENERACY_TOL = 1e-9


def _canon_phase(z: complex) -> complex:
    for p in (1, -1, 1j, -1j):
        if abs(z - p) < 1e-12:
            return p
    raise ValueError(f"Pauli phase must be one of ±1, ±i, got {z}")


@dataclass(frozen=True)
class PauliString:
    """Signed Pauli string; ``letters[q]`` acts on qubit ``q``."""

    letters: str
    phase: complex = 1

    def __post_init__(self):
        letters = self.letters.upper()
        if any(c not in "IXYZ" for c in letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "phase", _canon_phase(complex(self.phase)))

    @classmethod
    def from_str(cls, text: str) -> "PauliString":
        """Parse ``"XYZ"``, ``"+XX"``, ``"-ZZI"``, ``"+iXY"`` or ``"-iZ"``."""
        t = text.strip()
        phase: complex = 1
        if t[:1] in "+-":
            phase = -1 if t[0] == "-" else 1
            t = t[1:]
        if t[:1] in ("i", "j"):
            phase *= 1j
            t = t[1:]
        return cls(t, phase)

    @classmethod
    def single(cls, letter: str, qubit: int, n: int, phase: complex = 1) -> "PauliString":
        return cls("I" * qubit + letter + "I" * (n - qubit - 1), phase)

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def weight(self) -> int:
        return sum(c != "I" for c in self.letters)

    @property
    def is_hermitian(self) -> bool:
        return self.phase in (1, -1)

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n != other.n:
            raise ValueError("Pauli strings of different length")
        phase = self.phase * other.phase
        out = []
        for a, b in zip(self.letters, other.letters):
            ph, c = _MUL[(a, b)]
            phase *= ph
            out.append(c)
        return PauliString("".join(out), phase)

    def __neg__(self) -> "PauliString":
        return PauliString(self.letters, -self.phase)

    def commutes_with(self, other: "PauliString") -> bool:
        clashes = sum(a != "I" and b != "I" and a != b for a, b in zip(self.letters, other.letters))
        return clashes % 2 == 0

    def matrix(self) -> np.ndarray:
        out = np.ones((1, 1), dtype=complex)
        for c in reversed(self.letters):
            out = np.kron(out, PAULI[c])
        return self.phase * out

    def embedded(self, offset: int, n: int) -> "PauliString":
        """Place this string on qubits ``offset..offset+len-1`` of ``n``."""
        return PauliString("I" * offset + self.letters + "I" * (n - offset - self.n), self.phase)

    def __str__(self) -> str:
        return _PHASES[self.phase] + self.letters


def _unit_rows(directions, n: int) -> np.ndarray:
    d = np.asarray(directions, dtype=float)
    if d.shape == (3,):
        d = np.tile(d, (n, 1))
    if d.shape != (n, 3):
        raise ValueError(f"directions must have shape ({n}, 3), got {d.shape}")
    norms = np.linalg.norm(d, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-12):
        raise ValueError(f"generator directions must be unit vectors, norms {norms}")
    return d


@dataclass(frozen=True, eq=False)
class SeparableDynamics:
    """Per-qubit generators ``G_j = x_j . sigma`` with per-node times ``t_mu``.

    The node generator is ``G_mu = t_mu * sum_{j in mu} G_j``.
    """

    partition: ResourcePartition
    directions: np.ndarray
    times: np.ndarray = None

    def __post_init__(self):
        p = as_partition(self.partition)
        object.__setattr__(self, "partition", p)
        d = _unit_rows(self.directions, p.total)
        d.setflags(write=False)
        object.__setattr__(self, "directions", d)
        t = np.ones(p.k) if self.times is None else np.asarray(self.times, dtype=float).reshape(-1)
        if t.shape != (p.k,) or np.any(t <= 0):
            raise ValueError(f"times must be {p.k} positive numbers, got {t}")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @classmethod
    def z(cls, partition, times=None) -> "SeparableDynamics":
        p = as_partition(partition)
        return cls(p, np.tile([0.0, 0.0, 1.0], (p.total, 1)), times)

    @classmethod
    def uniform(cls, partition, axis: str | Sequence[float] = "z", times=None) -> "SeparableDynamics":
        p = as_partition(partition)
        if isinstance(axis, str):
            vec = {"x": [1.0, 0, 0], "y": [0, 1.0, 0], "z": [0, 0, 1.0]}[axis.lower()]
        else:
            vec = np.asarray(axis, dtype=float)
            vec = vec / np.linalg.norm(vec)
        return cls(p, np.tile(vec, (p.total, 1)), times)

    @classmethod
    def from_letters(cls, partition, letters: str, times=None) -> "SeparableDynamics":
        """One signed Pauli axis per qubit, e.g. ``"ZXZ"``."""
        p = as_partition(partition)
        axes = {"X": [1.0, 0, 0], "Y": [0, 1.0, 0], "Z": [0, 0, 1.0]}
        return cls(p, np.array([axes[c] for c in letters.upper()]), times)

    @classmethod
    def random(cls, partition, rng: np.random.Generator, times=None) -> "SeparableDynamics":
        p = as_partition(partition)
        d = rng.normal(size=(p.total, 3))
        return cls(p, d / np.linalg.norm(d, axis=1, keepdims=True), times)

    @property
    def k(self) -> int:
        return self.partition.k

    @property
    def n(self) -> int:
        return self.partition.total

    @property
    def is_z(self) -> bool:
        return bool(np.allclose(self.directions, [0.0, 0.0, 1.0], atol=1e-12))

    def pauli_axes(self) -> Optional[list[tuple[int, str]]]:
        """``(sign, letter)`` per qubit when every direction is a signed axis."""
        out = []
        for d in self.directions:
            hits = np.flatnonzero(np.abs(np.abs(d) - 1.0) < 1e-12)
            if len(hits) != 1:
                return None
            ax = int(hits[0])
            out.append((int(np.sign(d[ax])), "XYZ"[ax]))
        return out

    def qubit_operator(self, j: int) -> np.ndarray:
        return np.tensordot(self.directions[j], _SIGMA, axes=1)

    def generator(self, mu: int) -> np.ndarray:
        return collective_generator(self, mu)

    def generators(self) -> list[np.ndarray]:
        return [collective_generator(self, mu) for mu in range(self.k)]

    def diagonal(self) -> Optional[np.ndarray]:
        """Node generators as diagonals, shape ``(k, 2**n)``, when all are ``±Z``."""
        axes = self.pauli_axes()
        if axes is None or any(letter != "Z" for _, letter in axes):
            return None
        n = self.n
        idx = np.arange(1 << n)
        z = 1 - 2 * ((idx[None, :] >> np.arange(n)[:, None]) & 1)
        signs = np.array([s for s, _ in axes], dtype=float)
        nodes = self.partition.qubit_nodes()
        out = np.zeros((self.k, 1 << n))
        for j in range(n):
            out[nodes[j]] += signs[j] * z[j]
        return out * self.times[:, None]

    def node_unitary_local(self, mu: int, theta: float) -> list[tuple[int, np.ndarray]]:
        """Per-qubit factors of ``exp(-i theta G_mu)``."""
        c = theta * self.times[mu]
        out = []
        for j in self.partition.node_ranges[mu]:
            g = self.qubit_operator(j)
            out.append((j, np.cos(c) * np.eye(2) - 1j * np.sin(c) * g))
        return out


def _parse_pauli_sum(text: str, m: Optional[int]) -> list[tuple[float, PauliString]]:
    terms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'coeff LETTERS', got {raw!r}")
        try:
            coef = float(parts[0])
        except ValueError:
            try:
                complex(parts[0].replace("i", "j"))
            except ValueError:
                raise ValueError(f"line {lineno}: bad coefficient {parts[0]!r}") from None
            raise ValueError(f"line {lineno}: coefficient {parts[0]!r} is not real (Hamiltonian must be Hermitian)")
        letters = parts[1].upper()
        if any(c not in "IXYZ" for c in letters):
            raise ValueError(f"line {lineno}: bad Pauli letters {parts[1]!r}")
        if m is not None and len(letters) != m:
            raise ValueError(f"line {lineno}: {len(letters)} letters for a {m}-qubit node")
        terms.append((coef, PauliString(letters)))
    return terms


@dataclass(frozen=True, eq=False)
class NodeHamiltonian:
    """``H = sum_j b_j P_j`` over the ``m`` local qubits of one node."""

    m: int
    terms: tuple[tuple[float, PauliString], ...] = ()

    def __post_init__(self):
        terms = []
        for coef, ps in self.terms:
            if isinstance(ps, str):
                ps = PauliString.from_str(ps)
            c = complex(coef) * ps.phase
            if abs(c.imag) > 1e-12:
                raise ValueError(f"term {coef} {ps} is not Hermitian")
            if ps.n != self.m:
                raise ValueError(f"term {ps} has {ps.n} letters, node has {self.m} qubits")
            terms.append((float(c.real), PauliString(ps.letters)))
        object.__setattr__(self, "terms", tuple(terms))

    @classmethod
    def from_text(cls, text: str, m: Optional[int] = None) -> "NodeHamiltonian":
        terms = _parse_pauli_sum(text, m)
        if m is None:
            if not terms:
                raise ValueError("cannot infer node size from an empty Hamiltonian")
            m = terms[0][1].n
        return cls(m, tuple(terms))

    def to_text(self) -> str:
        return "\n".join(f"{c!r} {p.letters}" for c, p in self.terms)

    @cached_property
    def matrix(self) -> np.ndarray:
        h = np.zeros((1 << self.m, 1 << self.m), dtype=complex)
        for c, p in self.terms:
            h += c * p.matrix()
        return h

    @cached_property
    def eigensystem(self) -> tuple[np.ndarray, np.ndarray]:
        vals, vecs = np.linalg.eigh(self.matrix)
        return _snap_degenerate(vals), vecs

    def nontrivial_terms(self) -> list[tuple[float, PauliString]]:
        return [(c, p) for c, p in self.terms if abs(c) > 1e-15]


def _snap_degenerate(vals: np.ndarray, tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Replace eigenvalue clusters (consecutive gaps ≤ tol) by their mean."""
    vals = np.array(vals, dtype=float)
    order = np.argsort(vals)
    sv = vals[order]
    start = 0
    for i in range(1, len(sv) + 1):
        if i == len(sv) or sv[i] - sv[i - 1] > tol:
            sv[start:i] = sv[start:i].mean()
            start = i
    out = np.empty_like(vals)
    out[order] = sv
    return out


@dataclass(frozen=True, eq=False)
class GeneralLocalHamiltonian:
    """One :class:`NodeHamiltonian` per node; generator ``G_mu = H_mu``."""

    partition: ResourcePartition
    nodes: tuple[NodeHamiltonian, ...]

    def __post_init__(self):
        p = as_partition(self.partition)
        object.__setattr__(self, "partition", p)
        nodes = tuple(self.nodes)
        if len(nodes) != p.k:
            raise ValueError(f"{len(nodes)} node Hamiltonians for {p.k} nodes")
        for mu, (h, m) in enumerate(zip(nodes, p.n_vec)):
            if h.m != m:
                raise ValueError(f"node {mu}: Hamiltonian on {h.m} qubits, node owns {m}")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def from_texts(cls, partition, texts: Sequence[str]) -> "GeneralLocalHamiltonian":
        p = as_partition(partition)
        return cls(p, tuple(NodeHamiltonian.from_text(t, m) for t, m in zip(texts, p.n_vec)))

    @classmethod
    def from_separable(cls, dyn: SeparableDynamics) -> "GeneralLocalHamiltonian":
        """Equivalent Pauli-sum form of separable dynamics."""
        nodes = []
        for mu, r in enumerate(dyn.partition.node_ranges):
            terms = []
            for local, j in enumerate(r):
                for ax, letter in enumerate("XYZ"):
                    c = dyn.times[mu] * dyn.directions[j, ax]
                    if c != 0.0:
                        terms.append((c, PauliString.single(letter, local, len(r))))
            nodes.append(NodeHamiltonian(len(r), tuple(terms)))
        return cls(dyn.partition, tuple(nodes))

    @property
    def k(self) -> int:
        return self.partition.k

    @property
    def n(self) -> int:
        return self.partition.total

    def generator(self, mu: int) -> np.ndarray:
        return collective_generator(self, mu)

    def generators(self) -> list[np.ndarray]:
        return [collective_generator(self, mu) for mu in range(self.k)]

    def diagonal(self) -> Optional[np.ndarray]:
        for h in self.nodes:
            if any(set(p.letters) - {"I", "Z"} for _, p in h.terms):
                return None
        return np.stack([np.real(np.diag(g)) for g in self.generators()])

    def joint_eigenbasis(self) -> tuple[np.ndarray, np.ndarray]:
        """Columns are product eigenvectors; rows of the second array are eigenvalue tuples."""
        vecs = np.ones((1, 1), dtype=complex)
        for h in reversed(self.nodes):
            vecs = np.kron(vecs, h.eigensystem[1])
        labels = np.zeros((1 << self.n, self.k))
        grids = np.meshgrid(*[h.eigensystem[0] for h in self.nodes], indexing="ij")
        # joint index = sum_mu j_mu * 2**offset_mu, node 0 least significant
        for mu in range(self.k):
            labels[:, mu] = np.transpose(grids[mu], tuple(reversed(range(self.k)))).reshape(-1)
        return vecs, labels


Dynamics = SeparableDynamics | GeneralLocalHamiltonian


def collective_generator(dyn: Dynamics, mu: int) -> np.ndarray:
    """Full ``2**n x 2**n`` matrix of node ``mu``'s generator."""
    p = dyn.partition
    if not 0 <= mu < p.k:
        raise ValueError(f"node {mu} outside 0..{p.k - 1}")
    n = p.total
    r = p.node_ranges[mu]
    if isinstance(dyn, SeparableDynamics):
        local = np.zeros((1 << len(r), 1 << len(r)), dtype=complex)
        for i, j in enumerate(r):
            local += np.kron(np.kron(np.eye(1 << (len(r) - 1 - i)), dyn.qubit_operator(j)), np.eye(1 << i))
        local *= dyn.times[mu]
    else:
        local = dyn.nodes[mu].matrix
    return np.kron(np.kron(np.eye(1 << (n - r.stop)), local), np.eye(1 << r.start))


def _apply_encoding(vec: np.ndarray, dyn: Dynamics, theta: np.ndarray) -> np.ndarray:
    p = dyn.partition
    n = p.total
    out = vec
    for mu, r in enumerate(p.node_ranges):
        if len(r) == 0 or theta[mu] == 0.0:
            continue
        if isinstance(dyn, SeparableDynamics):
            for j, u in dyn.node_unitary_local(mu, theta[mu]):
                out = apply_local(out, u, [j], n)
        else:
            vals, vecs = dyn.nodes[mu].eigensystem
            u = (vecs * np.exp(-1j * theta[mu] * vals)) @ vecs.conj().T
            out = apply_local(out, u, list(r), n)
    return out


def encode(state, dyn: Dynamics, theta: Sequence[float]):
    """Apply ``U_theta = prod_mu exp(-i theta_mu G_mu)`` to a state or density matrix."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape != (dyn.k,):
        raise ValueError(f"theta has {theta.size} entries, dynamics has {dyn.k} nodes")
    if isinstance(state, StateVector):
        if state.n != dyn.n:
            raise ValueError(f"state has {state.n} qubits, dynamics acts on {dyn.n}")
        return StateVector(_apply_encoding(np.array(state.amps), dyn, theta))
    rho = state.mat if isinstance(state, DensityMatrix) else np.asarray(state, dtype=complex)
    if rho.shape[0] != 1 << dyn.n:
        raise ValueError(f"density matrix dimension {rho.shape[0]} does not match {dyn.n} qubits")
    # rows of rho.T are columns of rho, so this gives (U rho)^T
    m = _apply_encoding(rho.T.copy(), dyn, theta).T
    out = np.conj(_apply_encoding(np.conj(m), dyn, theta))
    if isinstance(state, DensityMatrix):
        return DensityMatrix(out)
    return out


def local_eigensystem(h: GeneralLocalHamiltonian, mu: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending, degenerate clusters snapped) and eigenvectors of ``H_mu``."""
    return h.nodes[mu].eigensystem


def _unique_rows(rows: np.ndarray, tol: float = DEGENERACY_TOL) -> np.ndarray:
    if len(rows) == 0:
        return rows
    keys = np.round(rows / tol).astype(np.int64)
    _, idx = np.unique(keys, axis=0, return_index=True)
    return rows[np.sort(idx)]


@dataclass(frozen=True, eq=False)
class Orthotope:
    points: np.ndarray
    differences: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def k(self) -> int:
        return self.points.shape[1]

    def contains_difference(self, z: Sequence[float], tol: float = 1e-9) -> bool:
        return bool(np.any(np.all(np.abs(self.differences - np.asarray(z)) <= tol, axis=1)))


def build_orthotope(h: GeneralLocalHamiltonian | SeparableDynamics) -> Orthotope:
    """Joint eigenvalue tuples ``O`` and their pairwise differences."""
    if isinstance(h, SeparableDynamics):
        h = GeneralLocalHamiltonian.from_separable(h)
    distinct = [np.unique(np.round(node.eigensystem[0], 9)) for node in h.nodes]
    points = np.array(list(itertools.product(*distinct)), dtype=float).reshape(-1, h.k)
    points = _unique_rows(points)
    diffs = (points[:, None, :] - points[None, :, :]).reshape(-1, h.k)
    diffs = _unique_rows(diffs)
    order = np.lexsort(diffs.T[::-1])
    return Orthotope(points, diffs[order], points.min(axis=0), points.max(axis=0))


@dataclass(frozen=True)
class Witness:
    c_i: tuple[float, ...]
    c_j: tuple[float, ...]
    alpha: float


def target_in_O2minus(a: TargetFunction | Sequence[float], o: Orthotope,
                      tol: float = 1e-9) -> Optional[Witness]:
    """Find ``c_i, c_j`` in ``O`` with ``c_i - c_j = alpha a`` and ``alpha > 0``.

    Among all matches the largest ``alpha`` wins; ties go to the
    lexicographically largest ``c_i``.
    """
    av = a.array if isinstance(a, TargetFunction) else np.asarray(a, dtype=float)
    if av.shape != (o.k,):
        raise ValueError(f"target has {av.size} entries, orthotope has dimension {o.k}")
    a2 = float(av @ av)
    if a2 == 0.0:
        raise ValueError("target vector must not be zero")
    best = None
    for ci in o.points:
        d = ci[None, :] - o.points
        alpha = d @ av / a2
        resid = np.linalg.norm(d - alpha[:, None] * av[None, :], axis=1)
        ok = (resid <= tol * np.maximum(1.0, np.linalg.norm(d, axis=1))) & (alpha > tol)
        for j in np.flatnonzero(ok):
            key = (round(float(alpha[j]), 9), tuple(np.round(ci, 9)))
            if best is None or key > best[0]:
                best = (key, Witness(tuple(map(float, ci)), tuple(map(float, o.points[j])), float(alpha[j])))
    return None if best is None else best[1]


def has_anticommuting_pauli(h: GeneralLocalHamiltonian | NodeHamiltonian, mu: int = 0) -> Optional[PauliString]:
    """A node-local Pauli string anticommuting with every term of ``H_mu``.

    Exhaustive over the ``4**m - 1`` non-identity strings; ``None`` if absent
    (always the case when ``H_mu`` contains an identity term).
    """
    node = h.nodes[mu] if isinstance(h, GeneralLocalHamiltonian) else h
    terms = [p for _, p in node.nontrivial_terms()]
    for letters in itertools.product("IXYZ", repeat=node.m):
        cand = PauliString("".join(letters))
        if cand.weight == 0:
            continue
        if all(not cand.commutes_with(t) for t in terms):
            return cand
    return None


def bloch_rotation(axis: Sequence[float], angle: float) -> np.ndarray:
    """``exp(-i angle/2 n . sigma)``: rotates Bloch vectors by ``angle`` about ``n``."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * np.tensordot(n, _SIGMA, axes=1)


def conjugating_rotation(g: Sequence[float], g_prime: Sequence[float]) -> np.ndarray:
    """Single-qubit ``W`` with ``W^dagger (g . sigma) W = g' . sigma``."""
    g = np.asarray(g, dtype=float)
    gp = np.asarray(g_prime, dtype=float)
    for v in (g, gp):
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError(f"expected a unit vector, got {v}")
    # W sigma.v W^dagger = sigma.(R v), so R must carry g' onto g
    cross = np.cross(gp, g)
    s, c = np.linalg.norm(cross), float(gp @ g)
    if s < 1e-12:
        if c > 0:
            w = np.eye(2, dtype=complex)
        else:
            axis = np.array([1.0, 0, 0]) if abs(abs(g[0]) - 1.0) > 1e-9 else np.array([0, 1.0, 0])
            # project out any component along g so the axis is equatorial
            axis = axis - (axis @ g) * g
            w = bloch_rotation(axis, np.pi)
    else:
        w = bloch_rotation(cross, np.arctan2(s, c))
    lhs = w.conj().T @ np.tensordot(g, _SIGMA, axes=1) @ w
    resid = np.linalg.norm(lhs - np.tensordot(gp, _SIGMA, axes=1))
    if resid > 1e-10:
        raise ArithmeticError(f"conjugating rotation residual {resid:.3e}")
    return w
