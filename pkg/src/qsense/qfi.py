"""
Quantum Fisher information matrices.

Every path returns a :class:`QfiMatrix` carrying its provenance so results
from independent formulas can be compared.  The overall normalization is the
standard one, ``Q = 4 Cov(G)`` for pure states under unitary encodings.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .hamiltonians import (
    Dynamics,
    GeneralLocalHamiltonian,
    SeparableDynamics,
    conjugating_rotation,
    encode,
)
from .hilbert import DensityMatrix, StateVector, apply_local, as_density, eig_hermitian
from .resources import ResourcePartition, as_partition, hamming_table

__all__ = [
    "PROVENANCES",
    "QfiMatrix",
    "StructuredQfi",
    "qfi_pure_dense",
    "qfi_structured_separable",
    "qfi_structured_general",
    "qfi_mixed_eig",
    "qfi_mixed_grouped",
    "qfi_sld_oracle",
    "z_frame_state",
    "structured_basis",
    "encoding_channel",
    "qfi_of",
]

PROVENANCES = (
    "pure-dense",
    "structured-separable",
    "structured-general",
    "mixed-eig",
    "mixed-grouped",
    "mixed-sld-oracle",
    "stabilizer",
    "closed-form",
)

_Z = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True, eq=False)
class QfiMatrix:
    """Real symmetric ``k x k`` QFI with the formula that produced it."""

    matrix: np.ndarray
    provenance: str
    theta: Optional[np.ndarray] = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        q = np.array(self.matrix, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError(f"QFI must be square, got {q.shape}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        q = 0.5 * (q + q.T)
        q.setflags(write=False)
        object.__setattr__(self, "matrix", q)

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True, eq=False)
class StructuredQfi:
    """``Q = 4 C (Lambda - v v^T) C^T`` (``v = w`` and ``Lambda = diag(w)`` in the general case)."""

    C: np.ndarray
    lam: np.ndarray
    v: np.ndarray
    kind: str

    @property
    def kernel(self) -> np.ndarray:
        return np.diag(self.lam) - np.outer(self.v, self.v)

    @property
    def Q(self) -> np.ndarray:
        c = self.C
        # C diag(lam) C^T - (C v)(C v)^T without forming the dense kernel
        cv = c.T @ self.v
        q = 4.0 * ((c.T * self.lam) @ c - np.outer(cv, cv))
        return 0.5 * (q + q.T)

    def qfi(self) -> QfiMatrix:
        return QfiMatrix(self.Q, "structured-separable" if self.kind == "separable" else "structured-general")

    def kernel_rank(self, tol: float = 1e-9) -> int:
        return _rank_psd(self.kernel, tol)

    def lambda_rank(self, tol: float = 1e-12) -> int:
        return int(np.sum(self.lam > tol))


def _rank_psd(m: np.ndarray, tol: float) -> int:
    w = np.linalg.eigvalsh(0.5 * (m + m.T))
    return int(np.sum(w > tol))


def _state_amps(psi) -> np.ndarray:
    if isinstance(psi, StateVector):
        return np.array(psi.amps)
    v = np.asarray(psi, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValueError(f"state is not normalized (norm {np.linalg.norm(v):.3e})")
    return v


def _generator_action(vec: np.ndarray, dyn: Dynamics) -> np.ndarray:
    """``G_mu |v>`` for every node, shape ``(k,) + vec.shape``."""
    diag = dyn.diagonal()
    if diag is not None:
        return diag[(slice(None),) + (None,) * (vec.ndim - 1)] * vec[None]
    return np.stack([vec @ g.T for g in dyn.generators()])


def qfi_pure_dense(psi, dyn: Dynamics, p: ResourcePartition | None = None) -> QfiMatrix:
    """``Q = 4 Re(<G_mu G_nu> - <G_mu><G_nu>)``."""
    v = _state_amps(psi)
    if p is not None and as_partition(p) != dyn.partition:
        raise ValueError("partition does not match the dynamics")
    if v.size != 1 << dyn.n:
        raise ValueError(f"state dimension {v.size} does not match {dyn.n} qubits")
    gv = _generator_action(v, dyn)
    second = np.real(gv.conj() @ gv.T)
    first = np.real(gv @ v.conj())
    q = 4.0 * (second - np.outer(first, first))
    return QfiMatrix(q, "pure-dense")


def z_frame_state(psi, dyn: SeparableDynamics) -> StateVector:
    """State whose Z-dynamics statistics equal those of ``psi`` under ``dyn``.

    With ``W_j^dagger (x_j . sigma) W_j = Z`` the returned state is
    ``(prod_j W_j^dagger) |psi>``.
    """
    v = _state_amps(psi)
    n = dyn.n
    for j in range(n):
        w = conjugating_rotation(dyn.directions[j], _Z)
        v = apply_local(v, w.conj().T, [j], n)
    return StateVector.normalized(v)


def structured_basis(n: int) -> np.ndarray:
    """Columns ``|G_m^+>`` for ``m < 2**(n-1)`` followed by ``|G_m^->``."""
    dim = 1 << n
    half = dim // 2
    basis = np.zeros((dim, dim))
    m = np.arange(half)
    comp = (dim - 1) ^ m
    s = 2 ** -0.5
    basis[m, m] = s
    basis[comp, m] = s
    basis[m, half + m] = s
    basis[comp, half + m] = -s
    return basis


def qfi_structured_separable(psi, p: ResourcePartition, dyn: SeparableDynamics | None = None) -> StructuredQfi:
    """Decomposition over the ``|m> ± |m̄>`` basis for Z-dynamics.

    When ``dyn`` is given the state is first moved to the Z frame and the
    node times are folded into ``C``.
    """
    p = as_partition(p)
    if dyn is not None:
        if dyn.partition != p:
            raise ValueError("partition does not match the dynamics")
        v = np.array(z_frame_state(psi, dyn).amps)
        times = dyn.times
    else:
        v = _state_amps(psi)
        times = np.ones(p.k)
    n = p.total
    if v.size != 1 << n:
        raise ValueError(f"state dimension {v.size} does not match {n} qubits")
    half = (1 << n) >> 1
    m = np.arange(half)
    comp = ((1 << n) - 1) ^ m
    s = 2 ** -0.5
    a_plus = s * (v[m] + v[comp])
    a_minus = s * (v[m] - v[comp])
    lam = np.abs(a_plus) ** 2 + np.abs(a_minus) ** 2
    vv = 2.0 * np.real(np.conj(a_plus) * a_minus)
    c = hamming_table(p, symmetric=True)[:half].astype(float) * times[None, :]
    return StructuredQfi(c, lam, vv, "separable")


def qfi_structured_general(psi, h: GeneralLocalHamiltonian) -> StructuredQfi:
    """Decomposition over the joint eigenbasis of the node Hamiltonians."""
    v = _state_amps(psi)
    vecs, labels = h.joint_eigenbasis()
    alpha = vecs.conj().T @ v
    w = np.abs(alpha) ** 2
    return StructuredQfi(labels, w, w, "general")


def _pair_terms(spec, gks: np.ndarray, eps: float) -> np.ndarray:
    """Mixed QFI from a spectrum and generator matrix elements.

    ``gks[mu]`` is ``V^dagger G_mu V`` in the eigenbasis.
    """
    lam = np.clip(spec.eigenvalues, 0.0, None)
    supp = spec.support
    li, lj = lam[:, None], lam[None, :]
    s = li + lj
    coef = np.zeros_like(s)
    both = supp[:, None] & supp[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        coef[both] = 2.0 * (li - lj)[both] ** 2 / s[both]
    # pairs with exactly one support index: 2 lambda_k each order
    one = supp[:, None] ^ supp[None, :]
    coef[one] = 2.0 * np.where(supp[:, None], li, lj)[one]
    # Re(a^mu_nk a^nu_kn): with Hermitian G, a^nu_kn = conj(a^nu_nk)
    q = np.einsum("nk,ank,bnk->ab", coef, gks, gks.conj()).real
    return q


def qfi_mixed_eig(rho, dyn: Dynamics, p: ResourcePartition | None = None, eps_supp: float = 1e-10) -> QfiMatrix:
    """Eigen-decomposition formula with an explicit support/null split."""
    dm = as_density(rho)
    if p is not None and as_partition(p) != dyn.partition:
        raise ValueError("partition does not match the dynamics")
    if dm.n != dyn.n:
        raise ValueError(f"state has {dm.n} qubits, dynamics acts on {dyn.n}")
    spec = eig_hermitian(dm, eps_supp)
    vecs = spec.eigenvectors
    diag = dyn.diagonal()
    if diag is not None:
        gks = np.einsum("in,ai,ik->ank", vecs.conj(), diag, vecs)
    else:
        gks = np.stack([vecs.conj().T @ g @ vecs for g in dyn.generators()])
    return QfiMatrix(_pair_terms(spec, gks, eps_supp), "mixed-eig")


def qfi_mixed_grouped(weights: Sequence[float], states: Sequence, dyn: Dynamics,
                      p: ResourcePartition | None = None, ortho_tol: float = 1e-10) -> QfiMatrix:
    """Grouped form from a weighted decomposition ``rho = sum_n w_n |G_n><G_n|``.

    The decomposition must be orthonormal; otherwise it is re-diagonalized first.
    Cross terms are ``4 [(l_n - l_k)^2/(l_n + l_k) - (l_n + l_k)] Re(a^nu_nk a^mu_kn)``
    over ordered pairs ``n > k``, plus ``sum_n l_n Q(|G_n>)``.
    """
    if p is not None and as_partition(p) != dyn.partition:
        raise ValueError("partition does not match the dynamics")
    w = np.asarray(weights, dtype=float)
    vs = np.stack([_as_vec(s) for s in states], axis=1)
    if vs.shape[1] != w.size:
        raise ValueError("weights and states differ in length")
    if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-10:
        raise ValueError("weights must be a probability vector")
    gram = vs.conj().T @ vs
    if np.max(np.abs(gram - np.eye(w.size))) > ortho_tol:
        spec = eig_hermitian((vs * w) @ vs.conj().T)
        keep = spec.support
        w, vs = spec.eigenvalues[keep], spec.eigenvectors[:, keep]
    keep = w > 0
    w, vs = w[keep], vs[:, keep]
    gv = _generator_action(vs.T, dyn)  # (k, r, dim)
    a = np.einsum("ni,ari->anr", vs.conj().T, gv)  # a[mu, n, r] = <G_n|G_mu|G_r>
    q = np.zeros((dyn.k, dyn.k))
    r = w.size
    for nn in range(r):
        g = gv[:, nn, :]
        second = np.real(g.conj() @ g.T)
        first = np.real(a[:, nn, nn])
        q += w[nn] * 4.0 * (second - np.outer(first, first))
        for kk in range(nn):
            s = w[nn] + w[kk]
            coef = 4.0 * ((w[nn] - w[kk]) ** 2 / s - s)
            q += coef * np.real(np.outer(a[:, kk, nn], a[:, nn, kk]))
    return QfiMatrix(q, "mixed-grouped")


def _as_vec(s) -> np.ndarray:
    if isinstance(s, StateVector):
        return np.array(s.amps)
    v = np.asarray(s, dtype=complex).reshape(-1)
    return v


def encoding_channel(state, dyn: Dynamics, noise: Optional[Callable] = None) -> Callable[[np.ndarray], np.ndarray]:
    """``theta -> rho_theta``; optional ``noise`` acts on the probe before encoding."""
    rho = as_density(state)
    if noise is not None:
        rho = as_density(noise(rho))
    mat = np.array(rho.mat)

    def channel(theta):
        return encode(mat, dyn, theta)

    return channel


def qfi_sld_oracle(channel: Callable[[np.ndarray], np.ndarray], theta0: Sequence[float],
                   h_fd: float = 1e-5, eps_supp: float = 1e-10) -> QfiMatrix:
    """Finite-difference SLD oracle.

    ``d rho`` by central differences; each SLD is solved in the eigenbasis of
    ``rho`` as ``L_jk = 2 (d rho)_jk / (l_j + l_k)`` on pairs whose sum
    exceeds the support threshold; ``Q = Re Tr(rho L_mu L_nu)``.
    """
    theta0 = np.asarray(theta0, dtype=float).reshape(-1)
    rho0 = np.asarray(channel(theta0), dtype=complex)
    spec = eig_hermitian(rho0, eps_supp)
    lam = np.clip(spec.eigenvalues, 0.0, None)
    thresh = eps_supp * max(lam[0], 0.0)
    v = spec.eigenvectors
    k = theta0.size
    warn = []
    rank0 = spec.rank
    sld = []
    for mu in range(k):
        e = np.zeros(k)
        e[mu] = h_fd
        rp = np.asarray(channel(theta0 + e), dtype=complex)
        rm = np.asarray(channel(theta0 - e), dtype=complex)
        for side in (rp, rm):
            if eig_hermitian(side, eps_supp).rank != rank0:
                warn.append(f"rank changes within the stencil along parameter {mu}")
                break
        d = v.conj().T @ ((rp - rm) / (2 * h_fd)) @ v
        s = lam[:, None] + lam[None, :]
        lmat = np.zeros_like(d)
        mask = s > thresh
        lmat[mask] = 2.0 * d[mask] / s[mask]
        sld.append(lmat)
    q = np.zeros((k, k))
    for a in range(k):
        for b in range(a, k):
            val = np.real(np.sum(lam[:, None] * sld[a] * sld[b].T))
            q[a, b] = q[b, a] = val
    return QfiMatrix(q, "mixed-sld-oracle", theta=theta0, warnings=tuple(dict.fromkeys(warn)))


def qfi_of(state, dyn: Dynamics) -> QfiMatrix:
    """Route pure inputs to the dense pure formula and mixed inputs to the eigen formula."""
    if isinstance(state, StateVector):
        return qfi_pure_dense(state, dyn)
    arr = state.mat if isinstance(state, DensityMatrix) else np.asarray(state)
    if arr.ndim == 1:
        return qfi_pure_dense(arr, dyn)
    return qfi_mixed_eig(arr, dyn)
