"""
Dense state vectors, density matrices and small-matrix linear algebra.

Index convention: basis index ``i = sum_q b_q 2**q``, so qubit ``q`` is the
``q``-th least-significant bit.  Reshaping a vector to ``(2,)*n`` in C order
puts qubit ``q`` on axis ``n - 1 - q``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .resources import BitString, ResourcePartition

__all__ = [
    "MAX_DENSITY_QUBITS",
    "MAX_VECTOR_QUBITS",
    "StateVector",
    "DensityMatrix",
    "Spectrum",
    "basis_state",
    "ghz",
    "partial_trace",
    "eig_hermitian",
    "embed_single",
    "apply_local",
    "permute_qubits",
    "random_state",
    "random_density",
    "as_density",
]

MAX_DENSITY_QUBITS = 12
MAX_VECTOR_QUBITS = 20

_NORM_TOL = 1e-12


def _qubits_from_dim(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True, eq=False)
class StateVector:
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        n = _qubits_from_dim(amps.size)
        if n > MAX_VECTOR_QUBITS:
            raise ValueError(f"{n} qubits exceeds the dense vector cap {MAX_VECTOR_QUBITS}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"state is not normalized (norm {norm:.3e}); use StateVector.normalized")
        amps = amps / norm
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def normalized(cls, amps) -> "StateVector":
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(amps / norm)

    @property
    def n(self) -> int:
        return _qubits_from_dim(self.amps.size)

    @property
    def dim(self) -> int:
        return self.amps.size

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amps, self.amps.conj()))

    def fidelity(self, other: "StateVector") -> float:
        return float(abs(np.vdot(self.amps, other.amps)) ** 2)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amps, dtype=dtype)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    mat: np.ndarray

    def __post_init__(self):
        mat = np.array(self.mat, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {mat.shape}")
        n = _qubits_from_dim(mat.shape[0])
        if n > MAX_DENSITY_QUBITS:
            raise ValueError(f"{n} qubits exceeds the density-matrix cap {MAX_DENSITY_QUBITS}")
        herm = np.max(np.abs(mat - mat.conj().T)) if mat.size else 0.0
        if herm > 1e-12 * max(1.0, np.max(np.abs(mat))):
            raise ValueError(f"matrix is not Hermitian (deviation {herm:.3e})")
        mat = 0.5 * (mat + mat.conj().T)
        tr = np.trace(mat).real
        if abs(tr - 1.0) > 1e-10:
            raise ValueError(f"trace is {tr:.12f}, expected 1")
        lam_min = np.linalg.eigvalsh(mat)[0]
        if lam_min < -1e-10:
            raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {lam_min:.3e})")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    @classmethod
    def from_mixture(cls, weights: Sequence[float], states: Sequence) -> "DensityMatrix":
        rho = sum(w * np.outer(np.asarray(s), np.asarray(s).conj()) for w, s in zip(weights, states))
        return cls(rho)

    @property
    def n(self) -> int:
        return _qubits_from_dim(self.mat.shape[0])

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def purity(self) -> float:
        return float(np.real(np.trace(self.mat @ self.mat)))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.mat, dtype=dtype)


def as_density(state) -> DensityMatrix:
    if isinstance(state, DensityMatrix):
        return state
    if isinstance(state, StateVector):
        return state.density()
    arr = np.asarray(state, dtype=complex)
    if arr.ndim == 1:
        return StateVector(arr).density()
    return DensityMatrix(arr)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigen-decomposition ``rho = V diag(eigenvalues) V^dagger``, descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    support: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.support.sum())

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def eig_hermitian(rho, eps_supp: float = 1e-10) -> Spectrum:
    """Hermitian eigensolver with a relative support threshold.

    An eigenvalue belongs to the support when it exceeds ``eps_supp`` times
    the largest eigenvalue.
    """
    mat = np.asarray(rho.mat if isinstance(rho, DensityMatrix) else rho, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    dev = np.max(np.abs(mat - mat.conj().T)) if mat.size else 0.0
    if dev > 1e-10 * max(1.0, np.max(np.abs(mat))):
        raise ValueError(f"matrix is not Hermitian (deviation {dev:.3e})")
    vals, vecs = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    top = vals[0] if vals.size else 0.0
    support = vals > eps_supp * max(top, 0.0)
    return Spectrum(vals, vecs, support)


def basis_state(s: BitString | str | Iterable[int]) -> StateVector:
    if not isinstance(s, BitString):
        s = BitString.from_str(s) if isinstance(s, str) else BitString.from_bits(s)
    amps = np.zeros(1 << s.n, dtype=complex)
    amps[s.value] = 1.0
    return StateVector(amps)


def ghz(p: ResourcePartition | int, alpha: complex = 2 ** -0.5, beta: complex = 2 ** -0.5) -> StateVector:
    """``alpha |0...0> + beta |1...1>`` over all qubits of ``p``."""
    n = p.total if isinstance(p, ResourcePartition) else int(p)
    if n < 1:
        raise ValueError("GHZ state needs at least one qubit")
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > 1e-12:
        raise ValueError("|alpha|^2 + |beta|^2 must be 1")
    amps = np.zeros(1 << n, dtype=complex)
    amps[0] += alpha
    amps[-1] += beta
    return StateVector(amps)


def partial_trace(rho, qubits: Iterable[int]) -> DensityMatrix | np.ndarray:
    """Trace out ``qubits``; surviving qubits keep their relative order.

    Tracing every qubit returns the 1x1 array ``[[tr rho]]``.
    """
    mat = np.asarray(rho.mat if isinstance(rho, DensityMatrix) else as_density(rho).mat)
    n = _qubits_from_dim(mat.shape[0])
    qubits = [int(q) for q in qubits]
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"traced qubits must be distinct, got {qubits}")
    if any(q < 0 or q >= n for q in qubits):
        raise ValueError(f"qubits {qubits} outside 0..{n - 1}")
    keep = [q for q in range(n) if q not in qubits]
    # qubit q sits on row axis n-1-q and column axis 2n-1-q
    labels = list(range(2 * n))
    for q in qubits:
        labels[2 * n - 1 - q] = n - 1 - q
    out_labels = [n - 1 - q for q in reversed(keep)] + [2 * n - 1 - q for q in reversed(keep)]
    out = np.einsum(mat.reshape((2,) * (2 * n)), labels, out_labels)
    m = len(keep)
    reduced = out.reshape(1 << m, 1 << m)
    if m == 0:
        return reduced
    return DensityMatrix(reduced)


def embed_single(op: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """Full ``2**n`` matrix of a single-qubit operator acting on ``qubit``."""
    if not 0 <= qubit < n:
        raise ValueError(f"qubit {qubit} outside 0..{n - 1}")
    left = np.eye(1 << (n - 1 - qubit))
    right = np.eye(1 << qubit)
    return np.kron(np.kron(left, np.asarray(op, dtype=complex)), right)


def apply_local(vec: np.ndarray, op: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Apply an operator on ``qubits`` (listed least-significant first) to a vector.

    ``vec`` may carry leading batch axes; the last axis is the Hilbert index.
    """
    qubits = list(qubits)
    m = len(qubits)
    op = np.asarray(op, dtype=complex).reshape((2,) * (2 * m))
    batch = vec.shape[:-1]
    t = vec.reshape(batch + (2,) * n)
    nb = len(batch)
    axes = [nb + n - 1 - q for q in qubits]
    # op indices: output axes (qubit m-1 .. 0) then input axes (qubit m-1 .. 0)
    in_axes = [axes[m - 1 - i] for i in range(m)]
    out = np.tensordot(op, t, axes=(list(range(m, 2 * m)), in_axes))
    # tensordot puts the op output axes first; move them back
    out = np.moveaxis(out, list(range(m)), in_axes)
    return out.reshape(vec.shape)


def permute_qubits(vec: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    """Relabel qubits so that new qubit ``i`` is old qubit ``perm[i]``."""
    vec = np.asarray(vec)
    n = _qubits_from_dim(vec.shape[-1])
    perm = list(perm)
    if sorted(perm) != list(range(n)):
        raise ValueError(f"{perm} is not a permutation of 0..{n - 1}")
    t = vec.reshape((2,) * n)
    # new axis for qubit i is n-1-i and must hold old axis n-1-perm[i]
    src = [n - 1 - perm[n - 1 - ax] for ax in range(n)]
    return np.transpose(t, src).reshape(-1)


def random_state(n: int, rng: np.random.Generator) -> StateVector:
    """Haar-random pure state."""
    z = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return StateVector.normalized(z)


def random_density(n: int, rank: int, rng: np.random.Generator) -> DensityMatrix:
    """Random mixed state with the requested rank and Dirichlet weights."""
    dim = 1 << n
    if not 1 <= rank <= dim:
        raise ValueError(f"rank {rank} outside 1..{dim}")
    z = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    q, _ = np.linalg.qr(z)
    w = rng.dirichlet(np.ones(rank))
    return DensityMatrix((q * w) @ q.conj().T)
