"""
Stabilizer tableaux in binary symplectic form.

A tableau row ``(x | z | r)`` is the Hermitian Pauli ``(-1)**r P`` with
``P_q = I, X, Z, Y`` for ``(x_q, z_q) = (0,0), (1,0), (0,1), (1,1)``.
Phases of row products follow the Aaronson-Gottesman exponent rule.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .hamiltonians import PauliString, SeparableDynamics
from .hilbert import StateVector
from .resources import ResourcePartition

__all__ = [
    "Tableau",
    "tableau_ghz",
    "tableau_graph",
    "tableau_product_zero",
    "apply_local_clifford",
    "signed_membership",
    "qfi_stabilizer",
    "canonical_form",
    "stabilizer_state_vector",
    "local_clifford_orbit",
    "enumerate_stabilizer_states",
    "CLIFFORD_GATES",
]

CLIFFORD_GATES = ("H", "S", "X", "Y", "Z")

_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}


def _g(x1, z1, x2, z2) -> np.ndarray:
    """Exponent of ``i`` picked up when multiplying single-qubit Paulis."""
    x1, z1, x2, z2 = (np.asarray(v, dtype=np.int64) for v in (x1, z1, x2, z2))
    out = np.zeros_like(x1)
    yy = (x1 == 1) & (z1 == 1)
    xx = (x1 == 1) & (z1 == 0)
    zz = (x1 == 0) & (z1 == 1)
    out = np.where(yy, z2 - x2, out)
    out = np.where(xx, z2 * (2 * x2 - 1), out)
    out = np.where(zz, x2 * (1 - 2 * z2), out)
    return out


def _row_product(x1, z1, r1, x2, z2, r2):
    """``(-1)**r1 P1 * (-1)**r2 P2`` for commuting rows; returns ``(x, z, r)``."""
    e = (2 * r1 + 2 * r2 + int(_g(x1, z1, x2, z2).sum())) % 4
    if e % 2:
        raise ValueError("row product is not Hermitian (rows anticommute)")
    return x1 ^ x2, z1 ^ z2, e // 2


@dataclass(frozen=True, eq=False)
class Tableau:
    x: np.ndarray
    z: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.uint8) % 2
        z = np.asarray(self.z, dtype=np.uint8) % 2
        r = np.asarray(self.r, dtype=np.uint8).reshape(-1) % 2
        if x.ndim != 2 or x.shape != z.shape or x.shape[0] != r.size:
            raise ValueError("inconsistent tableau shapes")
        for a in (x, z, r):
            a.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "r", r)

    @classmethod
    def from_paulis(cls, rows: Sequence[PauliString | str]) -> "Tableau":
        rows = [PauliString.from_str(p) if isinstance(p, str) else p for p in rows]
        if not rows:
            raise ValueError("tableau needs at least one generator")
        n = rows[0].n
        x = np.zeros((len(rows), n), dtype=np.uint8)
        z = np.zeros_like(x)
        r = np.zeros(len(rows), dtype=np.uint8)
        for i, p in enumerate(rows):
            if p.n != n:
                raise ValueError("generators of different length")
            if p.phase not in (1, -1):
                raise ValueError(f"generator {p} is not Hermitian")
            r[i] = 0 if p.phase == 1 else 1
            for q, c in enumerate(p.letters):
                x[i, q], z[i, q] = _LETTER_BITS[c]
        return cls(x, z, r)

    @classmethod
    def from_text(cls, text: str) -> "Tableau":
        """One generator per line, e.g. ``+XXX``; blank lines and ``#`` comments ignored."""
        lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
        return cls.from_paulis([ln for ln in lines if ln])

    def to_text(self) -> str:
        return "\n".join(str(p) for p in self.paulis())

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def m(self) -> int:
        return self.x.shape[0]

    def paulis(self) -> list[PauliString]:
        out = []
        for i in range(self.m):
            letters = "".join(_BITS_LETTER[(int(a), int(b))] for a, b in zip(self.x[i], self.z[i]))
            out.append(PauliString(letters, -1 if self.r[i] else 1))
        return out

    def symplectic(self) -> np.ndarray:
        return np.concatenate([self.x, self.z], axis=1)

    def is_valid(self) -> bool:
        """Rows pairwise commute and are independent over GF(2)."""
        x, z = self.x.astype(np.int64), self.z.astype(np.int64)
        inner = (x @ z.T + z @ x.T) % 2
        if np.any(inner):
            return False
        return _gf2_rank(self.symplectic()) == self.m

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tableau):
            return NotImplemented
        return canonical_form(self) == canonical_form(other)

    def __hash__(self) -> int:
        return hash(canonical_form(self))


def _gf2_rank(m: np.ndarray) -> int:
    a = np.array(m, dtype=np.uint8) % 2
    rank = 0
    rows, cols = a.shape
    for c in range(cols):
        piv = np.flatnonzero(a[rank:, c])
        if piv.size == 0:
            continue
        p = rank + piv[0]
        a[[rank, p]] = a[[p, rank]]
        elim = np.flatnonzero(a[:, c])
        elim = elim[elim != rank]
        a[elim] ^= a[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def tableau_ghz(n: int) -> Tableau:
    """Generators ``X...X, Z1Z2, Z1Z3, ...``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rows = ["X" * n] + ["Z" + "I" * (j - 1) + "Z" + "I" * (n - j - 1) for j in range(1, n)]
    return Tableau.from_paulis(rows)


def tableau_product_zero(n: int) -> Tableau:
    return Tableau.from_paulis(["I" * q + "Z" + "I" * (n - q - 1) for q in range(n)])


def tableau_graph(adj) -> Tableau:
    """Graph state: row ``j`` is ``X_j prod_{k ~ j} Z_k``."""
    g = np.asarray(adj, dtype=np.int64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("adjacency matrix must be square")
    if np.any((g != 0) & (g != 1)) or np.any(g != g.T) or np.any(np.diag(g)):
        raise ValueError("adjacency matrix must be symmetric 0/1 with zero diagonal")
    n = g.shape[0]
    return Tableau(np.eye(n, dtype=np.uint8), g.astype(np.uint8), np.zeros(n, dtype=np.uint8))


def apply_local_clifford(t: Tableau, gate: str, qubit: int) -> Tableau:
    """Tableau of ``U|psi>`` for ``U`` in ``{H, S, X, Y, Z}`` on ``qubit``."""
    if not 0 <= qubit < t.n:
        raise ValueError(f"qubit {qubit} outside 0..{t.n - 1}")
    x, z, r = t.x.copy(), t.z.copy(), t.r.copy()
    xq, zq = x[:, qubit].copy(), z[:, qubit].copy()
    g = gate.upper()
    if g == "H":
        r ^= xq & zq
        x[:, qubit], z[:, qubit] = zq, xq
    elif g == "S":
        r ^= xq & zq
        z[:, qubit] = zq ^ xq
    elif g == "X":
        r ^= zq
    elif g == "Z":
        r ^= xq
    elif g == "Y":
        r ^= xq ^ zq
    else:
        raise ValueError(f"unsupported gate {gate!r}; use one of {CLIFFORD_GATES}")
    return Tableau(x, z, r)


def _solve_gf2(a: np.ndarray, b: np.ndarray):
    """Solve ``c @ a = b`` over GF(2) for a full-row-rank ``a``; ``None`` if inconsistent."""
    m, cols = a.shape
    aug = np.concatenate([a.T % 2, b.reshape(-1, 1) % 2], axis=1).astype(np.uint8)
    pivots = []
    row = 0
    for c in range(m):
        piv = np.flatnonzero(aug[row:, c])
        if piv.size == 0:
            continue
        p = row + piv[0]
        aug[[row, p]] = aug[[p, row]]
        elim = np.flatnonzero(aug[:, c])
        elim = elim[elim != row]
        aug[elim] ^= aug[row]
        pivots.append(c)
        row += 1
    if np.any(aug[row:, -1]):
        return None
    sol = np.zeros(m, dtype=np.uint8)
    for i, c in enumerate(pivots):
        sol[c] = aug[i, -1]
    return sol


def signed_membership(t: Tableau, p: PauliString | str) -> int:
    """``+1`` if ``p`` is in the stabilizer group, ``-1`` if ``-p`` is, else 0."""
    if isinstance(p, str):
        p = PauliString.from_str(p)
    if p.n != t.n:
        raise ValueError(f"Pauli on {p.n} qubits, tableau on {t.n}")
    if p.phase not in (1, -1):
        raise ValueError(f"{p} is not Hermitian")
    bx = np.array([_LETTER_BITS[c][0] for c in p.letters], dtype=np.uint8)
    bz = np.array([_LETTER_BITS[c][1] for c in p.letters], dtype=np.uint8)
    sol = _solve_gf2(t.symplectic(), np.concatenate([bx, bz]))
    if sol is None:
        return 0
    x = np.zeros(t.n, dtype=np.uint8)
    z = np.zeros(t.n, dtype=np.uint8)
    r = 0
    for i in np.flatnonzero(sol):
        x, z, r = _row_product(x, z, r, t.x[i], t.z[i], int(t.r[i]))
    sign = -1 if r else 1
    return sign * (1 if p.phase == 1 else -1)


def qfi_stabilizer(t: Tableau, p: ResourcePartition, dyn: SeparableDynamics | None = None):
    """QFI of a stabilizer state under signed single-letter Pauli generators."""
    from .qfi import QfiMatrix

    if dyn is None:
        dyn = SeparableDynamics.z(p)
    if dyn.partition != p:
        raise ValueError("dynamics partition does not match")
    if p.total != t.n:
        raise ValueError(f"partition has {p.total} qubits, tableau {t.n}")
    axes = dyn.pauli_axes()
    if axes is None:
        raise ValueError("qfi_stabilizer needs Pauli-axis generators; use the dense path")
    n = t.n
    single = np.array([signed_membership(t, PauliString.single(letter, j, n)) for j, (_, letter) in enumerate(axes)])
    pair = np.eye(n)
    for j, k in itertools.combinations(range(n), 2):
        letters = ["I"] * n
        letters[j], letters[k] = axes[j][1], axes[k][1]
        pair[j, k] = pair[k, j] = signed_membership(t, PauliString("".join(letters)))
    signs = np.array([s for s, _ in axes], dtype=float)
    cov = signs[:, None] * signs[None, :] * (pair - np.outer(single, single))
    nodes = p.qubit_nodes()
    member = np.zeros((p.k, n))
    member[nodes, np.arange(n)] = 1.0
    q = 4.0 * member @ cov @ member.T
    q = q * np.outer(dyn.times, dyn.times)
    return QfiMatrix(0.5 * (q + q.T), "stabilizer")


def canonical_form(t: Tableau) -> bytes:
    """Row-reduced echelon generators of the stabilizer group (with signs), as bytes."""
    x = [row.copy() for row in t.x]
    z = [row.copy() for row in t.z]
    r = [int(v) for v in t.r]
    n, m = t.n, t.m
    row = 0
    for c in range(2 * n):
        col = (lambda i: x[i][c]) if c < n else (lambda i: z[i][c - n])
        piv = next((i for i in range(row, m) if col(i)), None)
        if piv is None:
            continue
        x[row], x[piv] = x[piv], x[row]
        z[row], z[piv] = z[piv], z[row]
        r[row], r[piv] = r[piv], r[row]
        for i in range(m):
            if i != row and col(i):
                x[i], z[i], r[i] = _row_product(x[i], z[i], r[i], x[row], z[row], r[row])
        row += 1
    return np.concatenate([np.array(x).ravel(), np.array(z).ravel(), np.array(r, dtype=np.uint8)]).astype(np.uint8).tobytes()


def stabilizer_state_vector(t: Tableau) -> StateVector:
    """Dense state fixed by every generator, global phase fixed by the largest amplitude."""
    if t.m != t.n or not t.is_valid():
        raise ValueError("tableau does not define a unique stabilizer state")
    dim = 1 << t.n
    proj = np.eye(dim, dtype=complex)
    for p in t.paulis():
        proj = proj @ (np.eye(dim) + p.matrix()) / 2
    col = int(np.argmax(np.linalg.norm(proj, axis=0)))
    v = proj[:, col]
    k = int(np.argmax(np.abs(v)))
    v = v * np.exp(-1j * np.angle(v[k]))
    return StateVector.normalized(v)


def local_clifford_orbit(seeds: Iterable[Tableau], gates: Sequence[str] = ("H", "S")) -> list[Tableau]:
    """Breadth-first closure of ``seeds`` under local gates on every qubit."""
    out, seen = [], set()
    queue = deque()
    for s in seeds:
        key = canonical_form(s)
        if key not in seen:
            seen.add(key)
            out.append(s)
            queue.append(s)
    while queue:
        t = queue.popleft()
        for q in range(t.n):
            for g in gates:
                u = apply_local_clifford(t, g, q)
                key = canonical_form(u)
                if key not in seen:
                    seen.add(key)
                    out.append(u)
                    queue.append(u)
    return out


def enumerate_stabilizer_states(n: int) -> list[Tableau]:
    """All ``n``-qubit stabilizer states: local-Clifford orbit of every labelled graph state."""
    if n > 5:
        raise ValueError("enumeration is limited to n <= 5")
    edges = list(itertools.combinations(range(n), 2))
    seeds = []
    for mask in range(1 << len(edges)):
        adj = np.zeros((n, n), dtype=np.int64)
        for b, (i, j) in enumerate(edges):
            if (mask >> b) & 1:
                adj[i, j] = adj[j, i] = 1
        seeds.append(tableau_graph(adj))
    return local_clifford_orbit(seeds)
