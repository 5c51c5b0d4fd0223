"""
Privacy of multiparameter estimation.

``P(Q, a) = a^T Q a / (|a|^2 Tr Q)`` is the fraction of the total quantum
Fisher information that lies along the target direction.  A probe is
private when ``P = 1``, i.e. ``Q`` is a positive multiple of ``a a^T``.
This module builds the private families, evaluates the measure and runs a
randomized search for the largest attainable privacy.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .hamiltonians import Dynamics, GeneralLocalHamiltonian, SeparableDynamics, Witness
from .hilbert import DensityMatrix, StateVector, permute_qubits
from .qfi import QfiMatrix, qfi_mixed_eig, qfi_pure_dense
from .resources import (
    ResourcePartition,
    TargetFunction,
    Zone,
    as_partition,
    as_target,
    class_indices,
    classify_zone,
    preceq,
    weight_vectors,
)

__all__ = [
    "ZERO_INFORMATION_TOL",
    "PRIVATE_TOL",
    "RESIDUAL_TOL",
    "ZeroInformationError",
    "PrivacyReport",
    "FamilySpec",
    "LogicalBlock",
    "LogicalSpec",
    "SearchResult",
    "MeasurePropertyReport",
    "privacy_measure",
    "class_state",
    "build_family_state",
    "enumerate_family_specs",
    "logical_partition",
    "build_logical_state",
    "verify_private",
    "search_max_privacy",
    "family_orbit_fidelity",
    "eigenstate_superposition",
    "check_measure_properties",
    "thread_cap",
]

ZERO_INFORMATION_TOL = 1e-14
PRIVATE_TOL = 1e-9
RESIDUAL_TOL = 1e-8


class ZeroInformationError(ValueError):
    """The QFI vanishes, so privacy is undefined."""


def thread_cap() -> int:
    """Worker count from ``QSENSE_THREADS`` (default 1)."""
    raw = os.environ.get("QSENSE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True, eq=False)
class PrivacyReport:
    privacy: float
    target: Optional[TargetFunction]
    direction: np.ndarray
    zone: Optional[Zone]
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float
    trace: float
    qfi: Optional[QfiMatrix] = None

    @property
    def is_private(self) -> bool:
        return self.privacy >= 1.0 - PRIVATE_TOL and self.residual <= RESIDUAL_TOL * self.trace

    @property
    def q_along_a(self) -> float:
        """``a_hat^T Q a_hat``."""
        return self.privacy * self.trace


def _direction(a) -> tuple[Optional[TargetFunction], np.ndarray]:
    if isinstance(a, TargetFunction):
        return a, a.array.astype(float)
    arr = np.asarray(a)
    if arr.dtype.kind in "iuOU":
        t = as_target(list(a))
        return t, t.array.astype(float)
    av = np.asarray(arr, dtype=float).reshape(-1)
    rounded = np.round(av)
    if np.all(np.abs(av - rounded) <= 1e-12) and np.any(rounded):
        t = TargetFunction(tuple(int(x) for x in rounded))
        return t, t.array.astype(float)
    # a generic real direction has no canonical integer form
    return None, av


def privacy_measure(Q, a, zone: Optional[Zone] = None) -> PrivacyReport:
    q = np.asarray(Q.matrix if isinstance(Q, QfiMatrix) else Q, dtype=float)
    target, av = _direction(a)
    if q.shape != (av.size, av.size):
        raise ValueError(f"QFI is {q.shape}, target has {av.size} entries")
    if not np.any(av):
        raise ValueError("target vector must not be zero")
    q = 0.5 * (q + q.T)
    tr = float(np.trace(q))
    if tr <= ZERO_INFORMATION_TOL:
        raise ZeroInformationError(f"Tr Q = {tr:.3e}: the probe carries no information, privacy undefined")
    ahat = av / np.linalg.norm(av)
    along = float(ahat @ q @ ahat)
    vals, vecs = np.linalg.eigh(q)
    residual = float(np.linalg.norm(q - along * np.outer(ahat, ahat)))
    return PrivacyReport(along / tr, target, ahat, zone, vals[::-1], vecs[:, ::-1], residual, tr,
                         Q if isinstance(Q, QfiMatrix) else None)


def class_state(p: ResourcePartition, w: Sequence[int], amps=None) -> np.ndarray:
    """Superposition over the strings of weight ``w`` (uniform when ``amps`` is None)."""
    p = as_partition(p)
    idx = class_indices(p, w)
    if amps is None:
        amps = np.ones(idx.size) / np.sqrt(idx.size)
    amps = np.asarray(amps, dtype=complex).reshape(-1)
    if amps.size != idx.size:
        raise ValueError(f"class {tuple(w)} has {idx.size} strings, got {amps.size} amplitudes")
    norm = np.linalg.norm(amps)
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"class amplitudes must be normalized (norm {norm:.6f})")
    v = np.zeros(1 << p.total, dtype=complex)
    v[idx] = amps
    return v


@dataclass(frozen=True, eq=False)
class FamilySpec:
    """``alpha D(d) + beta D(a + d)`` with class amplitudes ``low`` and ``high``."""

    partition: ResourcePartition
    a: TargetFunction
    d: tuple[int, ...]
    alpha: complex = 2 ** -0.5
    beta: complex = 2 ** -0.5
    low: Optional[np.ndarray] = None
    high: Optional[np.ndarray] = None

    def __post_init__(self):
        p = as_partition(self.partition)
        a = as_target(self.a)
        d = tuple(int(x) for x in self.d)
        object.__setattr__(self, "partition", p)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "d", d)
        if len(d) != p.k or a.k != p.k:
            raise ValueError(f"partition has {p.k} nodes, a has {a.k}, d has {len(d)}")
        if not a.is_positive:
            raise ValueError(f"family targets must be positive, got {a.a_vec}")
        top = tuple(x + y for x, y in zip(a.a_vec, d))
        if not (preceq((0,) * p.k, d) and preceq(top, p.n_vec)):
            raise ValueError(f"need 0 ⪯ d and a + d ⪯ n; got d={d}, a+d={top}, n={p.n_vec}")
        if abs(self.alpha) < 1e-15 or abs(self.beta) < 1e-15:
            raise ValueError("alpha and beta must both be non-zero")
        if abs(abs(self.alpha) ** 2 + abs(self.beta) ** 2 - 1.0) > 1e-10:
            raise ValueError("|alpha|^2 + |beta|^2 must be 1")

    @property
    def upper(self) -> tuple[int, ...]:
        return tuple(x + y for x, y in zip(self.a.a_vec, self.d))


def build_family_state(f: FamilySpec) -> StateVector:
    v = f.alpha * class_state(f.partition, f.d, f.low) + f.beta * class_state(f.partition, f.upper, f.high)
    return StateVector.normalized(v)


def enumerate_family_specs(p, a) -> list[tuple[int, ...]]:
    """Every ``d`` with ``0 ⪯ d ⪯ n - a``; there are ``prod (b_mu + 1)`` of them."""
    p = as_partition(p)
    a = as_target(a)
    if a.k != p.k:
        raise ValueError(f"partition has {p.k} nodes, a has {a.k}")
    b = tuple(m - x for m, x in zip(p.n_vec, a.a_vec))
    if any(x < 0 for x in b):
        raise ValueError(f"no private family exists in this zone: n={p.n_vec} does not dominate a={a.a_vec}")
    return weight_vectors(b)


@dataclass(frozen=True, eq=False)
class LogicalBlock:
    """Logical qubit on its own block of qubits: ``|0_L> in D(d)``, ``|1_L> in D(a + d)``."""

    n_vec: tuple[int, ...]
    d: tuple[int, ...]
    low: Optional[np.ndarray] = None
    high: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class LogicalSpec:
    a: TargetFunction
    blocks: tuple[LogicalBlock, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        a = as_target(self.a)
        object.__setattr__(self, "a", a)
        blocks = tuple(self.blocks)
        if not blocks:
            raise ValueError("need at least one logical block")
        for b in blocks:
            if len(b.n_vec) != a.k or not preceq(a.a_vec, b.n_vec):
                raise ValueError(f"block resources {b.n_vec} must dominate a = {a.a_vec}")
        object.__setattr__(self, "blocks", blocks)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 1 << len(blocks):
            raise ValueError(f"{len(blocks)} blocks need {1 << len(blocks)} amplitudes, got {amps.size}")
        if abs(np.linalg.norm(amps) - 1.0) > 1e-10:
            raise ValueError("logical amplitudes must be normalized")
        object.__setattr__(self, "amplitudes", amps)


def logical_partition(spec: LogicalSpec) -> ResourcePartition:
    return ResourcePartition(tuple(sum(b.n_vec[mu] for b in spec.blocks) for mu in range(spec.a.k)))


def build_logical_state(spec: LogicalSpec) -> StateVector:
    """``sum_j alpha_j |j_1 ... j_L>`` laid out node by node.

    Logical bit ``l`` of the amplitude index belongs to block ``l``.  Inside a
    node, qubits of block 0 come first, then block 1, and so on.
    """
    k = spec.a.k
    basis = []
    for b in spec.blocks:
        part = ResourcePartition(b.n_vec)
        f = FamilySpec(part, spec.a, b.d, low=b.low, high=b.high)
        basis.append((class_state(part, f.d, f.low), class_state(part, f.upper, f.high)))
    nb = len(spec.blocks)
    vec = 0
    for j, amp in enumerate(spec.amplitudes):
        if amp == 0:
            continue
        term = np.ones(1, dtype=complex)
        for l in reversed(range(nb)):
            term = np.kron(term, basis[l][(j >> l) & 1])
        vec = vec + amp * term
    # block-major index of (block l, node mu, i) -> global node-major index
    glob = logical_partition(spec)
    perm = [0] * glob.total
    bm = 0
    fill = [0] * k
    for b in spec.blocks:
        for mu in range(k):
            for _ in range(b.n_vec[mu]):
                perm[glob.offsets[mu] + fill[mu]] = bm
                fill[mu] += 1
                bm += 1
    return StateVector.normalized(permute_qubits(vec, perm))


def _zone_for(dyn: Dynamics, a: TargetFunction) -> Optional[Zone]:
    if isinstance(dyn, SeparableDynamics) and a.is_positive and a.k == dyn.k:
        return classify_zone(a, dyn.partition.n_vec)
    return None


def verify_private(state, dyn: Dynamics, a, p: ResourcePartition | None = None) -> PrivacyReport:
    """QFI by the path matching the input kind, then the privacy measure."""
    from .stabilizer import Tableau, qfi_stabilizer

    a = as_target(a)
    if p is not None and as_partition(p) != dyn.partition:
        raise ValueError("partition does not match the dynamics")
    if isinstance(state, Tableau):
        q = qfi_stabilizer(state, dyn.partition, dyn)
    elif isinstance(state, StateVector) or (isinstance(state, np.ndarray) and state.ndim == 1):
        q = qfi_pure_dense(state, dyn)
    else:
        q = qfi_mixed_eig(state, dyn)
    return privacy_measure(q, a, _zone_for(dyn, a))


# ---------------------------------------------------------------------------
# randomized search

@dataclass(frozen=True, eq=False)
class SearchResult:
    best_privacy: float
    state: StateVector
    converged: bool
    restart_best: np.ndarray
    evaluations: int


_CHUNK = 50


def _coordinate_search(fun: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, budget: int,
                       step0: float, min_step: float, normalize: bool = False):
    """Batched adaptive coordinate search, one trial move per restart per evaluation.

    Each coordinate keeps its own step.  A move is kept only if it improves
    the objective; the step then grows by 1.5 and the same move is retried.
    When both signs fail the step halves and the next coordinate is tried.
    A restart is converged once every step is below ``min_step``.  With
    ``normalize`` the objective is scale invariant, so rows are kept at unit
    norm and steps are capped at 1.
    """
    x = np.array(x0, dtype=float)
    if normalize:
        x /= np.linalg.norm(x, axis=1, keepdims=True)
    r, m = x.shape
    f = fun(x)
    steps = np.full((r, m), float(step0))
    coord = np.zeros(r, dtype=np.int64)
    sign = np.ones(r)
    rows = np.arange(r)
    evals = 1
    while evals < budget:
        active = steps.max(axis=1) >= min_step
        if not active.any():
            break
        st = steps[rows, coord]
        cand = x.copy()
        cand[rows, coord] += np.where(active, sign * st, 0.0)
        fc = fun(cand)
        evals += 1
        better = active & (fc > f)
        x[better] = cand[better]
        if normalize:
            x[better] /= np.linalg.norm(x[better], axis=1, keepdims=True)
        f[better] = fc[better]
        failed = active & ~better
        flip = failed & (sign > 0)
        exhausted = failed & (sign < 0)
        grow = np.where(better, 1.5, np.where(exhausted, 0.5, 1.0))
        steps[rows, coord] = np.minimum(st * grow, 1.0) if normalize else st * grow
        sign = np.where(flip, -1.0, np.where(exhausted, 1.0, sign))
        coord = np.where(exhausted, (coord + 1) % m, coord)
    return x, f, steps.max(axis=1) < min_step, evals


def _privacy_objective(dyn: Dynamics, a: TargetFunction) -> Callable[[np.ndarray], np.ndarray]:
    dim = 1 << dyn.n
    ahat = a.normalized_a
    diag = dyn.diagonal()
    if diag is not None:
        h = diag.T  # (dim, k)
        ha = h @ ahat

        def stats(probs):
            # centered sums keep along <= tr exactly
            dev = h[None, :, :] - (probs @ h)[:, None, :]
            tr = np.einsum("rd,rdk->r", probs, dev ** 2)
            along = np.einsum("rd,rd->r", probs, (dev @ ahat) ** 2)
            return along, tr
    else:
        gens = dyn.generators()
        ga = sum(c * g for c, g in zip(ahat, gens))

        def stats_full(psi):
            def var(g):
                gv = psi @ g.T
                mean = np.real(np.sum(psi.conj() * gv, axis=1))
                return np.sum(np.abs(gv - mean[:, None] * psi) ** 2, axis=1)
            return var(ga), sum(var(g) for g in gens)

    def objective(x):
        psi = x[:, :dim] + 1j * x[:, dim:]
        norm2 = np.sum(np.abs(psi) ** 2, axis=1)
        norm2 = np.where(norm2 > 0, norm2, 1.0)
        if diag is not None:
            along, tr = stats(np.abs(psi) ** 2 / norm2[:, None])
        else:
            along, tr = stats_full(psi / np.sqrt(norm2)[:, None])
        ok = 4.0 * tr > ZERO_INFORMATION_TOL
        return np.where(ok, along / np.where(ok, tr, 1.0), -1.0)

    return objective


def search_max_privacy(dyn: Dynamics, a, restarts: int = 200, budget: int = 5000, seed: int = 0,
                       step0: float = 0.5, min_step: float = 1e-9) -> SearchResult:
    """Multi-restart derivative-free maximization of ``P`` over pure states.

    Restarts run in independent chunks seeded from ``seed``; ``QSENSE_THREADS``
    only sets how many chunks run at once, so results do not depend on it.
    """
    a = as_target(a)
    if a.k != dyn.k:
        raise ValueError(f"target has {a.k} entries, dynamics has {dyn.k} nodes")
    if dyn.n > 6:
        raise ValueError("search is limited to n <= 6 qubits")
    if restarts < 1 or budget < 1:
        raise ValueError("restarts and budget must be positive")
    dim = 1 << dyn.n
    fun = _privacy_objective(dyn, a)
    sizes = [min(_CHUNK, restarts - s) for s in range(0, restarts, _CHUNK)]
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(args):
        size, ss = args
        rng = np.random.default_rng(ss)
        x0 = rng.normal(size=(size, 2 * dim))
        return _coordinate_search(fun, x0, budget, step0, min_step, normalize=True)

    jobs = list(zip(sizes, seeds))
    workers = min(thread_cap(), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    xs = np.concatenate([r[0] for r in results])
    fs = np.concatenate([r[1] for r in results])
    conv = np.concatenate([r[2] for r in results])
    evals = sum(r[3] * s for r, s in zip(results, sizes))
    best = int(np.argmax(fs))
    psi = StateVector.normalized(xs[best, :dim] + 1j * xs[best, dim:])
    return SearchResult(float(fs[best]), psi, bool(conv[best]), fs, int(evals))


def _batched_rotations(angles: np.ndarray) -> np.ndarray:
    """``exp(-i v . sigma)`` for a batch of 3-vectors, shape ``(r, 2, 2)``."""
    r = np.linalg.norm(angles, axis=1)
    safe = np.where(r > 0, r, 1.0)
    nx, ny, nz = (angles / safe[:, None]).T
    c, s = np.cos(r), np.sin(r)
    u = np.empty((angles.shape[0], 2, 2), dtype=complex)
    u[:, 0, 0] = c - 1j * s * nz
    u[:, 0, 1] = -1j * s * (nx - 1j * ny)
    u[:, 1, 0] = -1j * s * (nx + 1j * ny)
    u[:, 1, 1] = c + 1j * s * nz
    return u


def _apply_single_batched(vecs: np.ndarray, ops: np.ndarray, q: int, n: int) -> np.ndarray:
    r = vecs.shape[0]
    t = vecs.reshape(r, 1 << (n - 1 - q), 2, 1 << q)
    return np.einsum("rab,rxbz->rxaz", ops, t).reshape(r, -1)


def family_orbit_fidelity(psi, p, a, d: Optional[Sequence[int]] = None, restarts: int = 8,
                          budget: int = 3000, seed: int = 0) -> float:
    """Largest overlap of ``psi`` with the local-unitary orbit of a private family.

    The family span is every superposition of the weight-``d`` and
    weight-``a + d`` classes; the rotation on each qubit is optimized by the
    same compass search used for privacy.  With ``d=None`` every ``d`` is tried.
    """
    p = as_partition(p)
    a = as_target(a)
    v = np.asarray(psi.amps if isinstance(psi, StateVector) else psi, dtype=complex)
    n = p.total
    ds = enumerate_family_specs(p, a) if d is None else [tuple(d)]
    best = 0.0
    for dd in ds:
        upper = tuple(x + y for x, y in zip(a.a_vec, dd))
        idx = np.concatenate([class_indices(p, dd), class_indices(p, upper)])

        def objective(x):
            out = np.repeat(v[None, :], x.shape[0], axis=0)
            for q in range(n):
                out = _apply_single_batched(out, _batched_rotations(x[:, 3 * q:3 * q + 3]), q, n)
            return np.sum(np.abs(out[:, idx]) ** 2, axis=1)

        rng = np.random.default_rng(seed)
        x0 = rng.normal(scale=0.5, size=(restarts, 3 * n))
        x0[0] = 0.0
        _, f, _, _ = _coordinate_search(objective, x0, budget, 0.5, 1e-10)
        best = max(best, float(f.max()))
    return best


def eigenstate_superposition(h: GeneralLocalHamiltonian | SeparableDynamics, w: Witness) -> StateVector:
    """``(|c_i> + |c_j>)/sqrt(2)`` from joint eigenvectors labelled by the witness points."""
    if isinstance(h, SeparableDynamics):
        h = GeneralLocalHamiltonian.from_separable(h)
    vecs, labels = h.joint_eigenbasis()

    def column(c):
        hit = np.flatnonzero(np.all(np.abs(labels - np.asarray(c)) <= 1e-9, axis=1))
        if hit.size == 0:
            raise ValueError(f"no joint eigenvector with eigenvalues {c}")
        return vecs[:, hit[0]]

    return StateVector.normalized(column(w.c_i) + column(w.c_j))


# ---------------------------------------------------------------------------
# measure properties

@dataclass(frozen=True)
class MeasurePropertyReport:
    samples: int
    range_ok: bool
    scale_invariant: bool
    aligned_implies_one: bool
    one_implies_aligned: bool
    max_orthogonal_deviation: float
    continuity_ok: bool
    worst_continuity_slack: float

    @property
    def passed(self) -> bool:
        return (self.range_ok and self.scale_invariant and self.aligned_implies_one
                and self.one_implies_aligned and self.max_orthogonal_deviation <= 1e-10
                and self.continuity_ok)


def _random_psd(k: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    m = rng.normal(size=(k, rank))
    return m @ m.T


def _random_orthogonal(k: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(k, k)))
    return q * np.sign(np.diag(r))


def check_measure_properties(samples: int = 200, seed: int = 0,
                             eps_grid: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)) -> MeasurePropertyReport:
    """Randomized checks of the measure's defining properties.

    Continuity: with ``T = Tr Q``, ``t = Tr A`` and ``A`` PSD,
    ``P(Q + eps A) - P(Q) = eps (T a^TAa - t a^TQa) / (T (T + eps t))`` whose
    magnitude is at most ``2 eps t / T``.
    """
    rng = np.random.default_rng(seed)
    range_ok = scale_ok = aligned_ok = converse_ok = cont_ok = True
    max_orth = 0.0
    worst_slack = np.inf
    for _ in range(samples):
        k = int(rng.integers(2, 6))
        q = _random_psd(k, int(rng.integers(1, k + 1)), rng)
        a = rng.normal(size=k)
        ahat = a / np.linalg.norm(a)
        p0 = privacy_measure(q, a).privacy
        range_ok &= -1e-12 <= p0 <= 1 + 1e-12
        c = float(rng.uniform(0.1, 10.0))
        scale_ok &= abs(privacy_measure(c * q, a).privacy - p0) <= 1e-12
        scale_ok &= abs(privacy_measure(q, -c * a).privacy - p0) <= 1e-12
        # aligned -> P = 1
        rep = privacy_measure(float(rng.uniform(0.1, 10.0)) * np.outer(a, a), a)
        aligned_ok &= abs(rep.privacy - 1.0) <= 1e-8 and rep.is_private
        # a definite off-target component -> P < 1 and not private
        b = rng.normal(size=k)
        b -= (b @ ahat) * ahat
        b /= np.linalg.norm(b)
        delta = float(10 ** rng.uniform(-6, 0))
        rep = privacy_measure(np.outer(ahat, ahat) + delta * np.outer(b, b), a)
        converse_ok &= rep.privacy < 1.0 - 1e-8 and not rep.is_private
        converse_ok &= abs((1.0 - rep.privacy) - delta / (1.0 + delta)) <= 1e-10
        # orthogonal change of basis
        bm = _random_orthogonal(k, rng)
        max_orth = max(max_orth, abs(privacy_measure(bm @ q @ bm.T, bm @ a).privacy - p0))
        # continuity
        pert = _random_psd(k, int(rng.integers(1, k + 1)), rng)
        tq, ta = np.trace(q), np.trace(pert)
        for eps in eps_grid:
            dp = abs(privacy_measure(q + eps * pert, a).privacy - p0)
            bound = 2 * eps * ta / tq
            worst_slack = min(worst_slack, bound - dp)
            cont_ok &= dp <= bound + 1e-15
    return MeasurePropertyReport(samples, bool(range_ok), bool(scale_ok), bool(aligned_ok),
                                 bool(converse_ok), float(max_orth), bool(cont_ok), float(worst_slack))
