"""
Per-qubit noise applied to the probe before encoding.

Channels act qubit by qubit in index order.  Closed-form QFI predictions
for GHZ probes serve as oracles against the simulated channels, and the
scan helpers sweep a noise strength and record the privacy along the way.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .hamiltonians import Dynamics, SeparableDynamics, collective_generator
from .hilbert import DensityMatrix, StateVector, as_density, eig_hermitian, partial_trace
from .privacy import (
    FamilySpec,
    PrivacyReport,
    ZeroInformationError,
    build_family_state,
    privacy_measure,
    thread_cap,
    ZERO_INFORMATION_TOL,
)
from .qfi import QfiMatrix, qfi_mixed_eig
from .resources import BitString, ResourcePartition, TargetFunction, as_partition, as_target, hamming_table, preceq

__all__ = [
    "CHANNEL_KINDS",
    "ChannelSpec",
    "apply_channel",
    "weight_function_g",
    "even_odd",
    "predict_dephasing_qfi",
    "predict_bitflip_qfi",
    "predict_depolarizing_qfi",
    "predict_amplitude_damping_qfi",
    "LossReport",
    "loss_analysis",
    "RobustnessRow",
    "RobustnessCurve",
    "robustness_scan",
    "loss_scan",
    "LogicalCondition",
    "logical_condition",
    "check_logical_basis",
]

CHANNEL_KINDS = ("dephasing", "bitflip", "depolarizing", "amplitude-damping", "loss")

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """A per-qubit channel.

    ``probs[q]`` is the strength on qubit ``q``.  For depolarizing noise the
    default ``"keep"`` convention keeps the state with probability ``p`` and
    applies each Pauli with ``(1 - p)/3``, so ``p = 1`` is noiseless;
    ``"error-rate"`` uses ``1 - p`` as the keep probability.  For loss,
    ``mask[q]`` marks traced-out qubits.
    """

    kind: str
    probs: Optional[np.ndarray] = None
    mask: Optional[np.ndarray] = None
    convention: str = "keep"
    allow_total_loss: bool = False

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}; expected one of {CHANNEL_KINDS}")
        if self.convention not in ("keep", "error-rate"):
            raise ValueError(f"unknown depolarizing convention {self.convention!r}")
        if self.kind == "loss":
            if self.mask is None:
                raise ValueError("loss needs a qubit mask")
            mask = np.asarray(self.mask, dtype=bool).reshape(-1)
            if mask.all() and not self.allow_total_loss:
                raise ValueError("loss mask traces out every qubit; pass allow_total_loss=True to permit it")
            mask.setflags(write=False)
            object.__setattr__(self, "mask", mask)
            return
        if self.probs is None:
            raise ValueError(f"{self.kind} needs a probability vector")
        probs = np.asarray(self.probs, dtype=float).reshape(-1)
        if np.any(~np.isfinite(probs)) or np.any(probs < 0) or np.any(probs > 1):
            raise ValueError(f"probabilities must lie in [0, 1], got {probs}")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, kind: str, p: float, n: int, **kw) -> "ChannelSpec":
        return cls(kind, probs=np.full(n, float(p)), **kw)

    @classmethod
    def loss(cls, lost: Sequence[int], n: int, allow_total_loss: bool = False) -> "ChannelSpec":
        mask = np.zeros(n, dtype=bool)
        mask[list(lost)] = True
        return cls("loss", mask=mask, allow_total_loss=allow_total_loss)

    @property
    def n(self) -> int:
        return (self.mask if self.kind == "loss" else self.probs).size

    def kraus(self, q: int) -> list[np.ndarray]:
        """Kraus operators on qubit ``q`` (not defined for loss)."""
        p = float(self.probs[q])
        if self.kind == "dephasing":
            return [math.sqrt(1 - p) * _I, math.sqrt(p) * _Z]
        if self.kind == "bitflip":
            return [math.sqrt(1 - p) * _I, math.sqrt(p) * _X]
        if self.kind == "depolarizing":
            keep = p if self.convention == "keep" else 1 - p
            e = math.sqrt((1 - keep) / 3)
            return [math.sqrt(keep) * _I, e * _X, e * _Y, e * _Z]
        if self.kind == "amplitude-damping":
            return [np.array([[1, 0], [0, math.sqrt(1 - p)]], dtype=complex),
                    np.array([[0, math.sqrt(p)], [0, 0]], dtype=complex)]
        raise ValueError("loss has no Kraus form here")


def _kraus_on_qubit(mat: np.ndarray, kraus: Sequence[np.ndarray], q: int, n: int) -> np.ndarray:
    hi, lo = 1 << (n - 1 - q), 1 << q
    t = mat.reshape(hi, 2, lo, hi, 2, lo)
    out = np.zeros_like(t)
    for k in kraus:
        out += np.einsum("ab,xbyuvw,cv->xayucw", k, t, k.conj())
    return out.reshape(mat.shape)


def apply_channel(rho, c: ChannelSpec) -> DensityMatrix:
    rho = as_density(rho)
    n = rho.n
    if c.n != n:
        raise ValueError(f"channel covers {c.n} qubits, state has {n}")
    if c.kind == "loss":
        lost = np.flatnonzero(c.mask).tolist()
        out = partial_trace(rho, lost) if lost else rho
        if not isinstance(out, DensityMatrix):
            raise ValueError("every qubit was traced out; no state remains")
        return out
    mat = np.array(rho.mat)
    for q in range(n):
        mat = _kraus_on_qubit(mat, c.kraus(q), q, n)
    return DensityMatrix(mat)


def weight_function_g(p: Sequence[float], j: BitString | Sequence[int] | str) -> float:
    """``prod_i p_i^{j_i} (1 - p_i)^{1 - j_i}``."""
    if isinstance(j, str):
        j = BitString.from_str(j)
    bits = j.bits if isinstance(j, BitString) else tuple(int(b) for b in j)
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size != len(bits):
        raise ValueError(f"{p.size} probabilities but {len(bits)} bits")
    return float(np.prod(np.where(np.asarray(bits) == 1, p, 1 - p)))


def even_odd(p: Sequence[float]) -> tuple[float, float]:
    """Total ``g`` weight of even- and odd-parity strings: ``E + O = 1``, ``E - O = prod(1 - 2 p_i)``."""
    diff = float(np.prod(1 - 2 * np.asarray(p, dtype=float)))
    return 0.5 * (1 + diff), 0.5 * (1 - diff)


def _ghz_n(a_or_p, probs) -> tuple[np.ndarray, np.ndarray]:
    n_vec = np.asarray(a_or_p.n_vec if isinstance(a_or_p, ResourcePartition)
                       else (a_or_p.a_vec if isinstance(a_or_p, TargetFunction) else a_or_p), dtype=float)
    probs = np.asarray(probs, dtype=float).reshape(-1)
    if probs.size == 1:
        probs = np.full(int(n_vec.sum()), probs[0])
    if probs.size != int(n_vec.sum()):
        raise ValueError(f"{probs.size} probabilities for {int(n_vec.sum())} qubits")
    if np.any(probs < 0) or np.any(probs > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    return n_vec, probs


def predict_dephasing_qfi(p: Sequence[float], a) -> QfiMatrix:
    """GHZ over ``n = a`` under dephasing: ``4 prod(1 - 2 p_i)^2 a a^T``."""
    a, p = _ghz_n(a, p)
    return QfiMatrix(4 * np.prod(1 - 2 * p) ** 2 * np.outer(a, a), "closed-form")


def predict_bitflip_qfi(p: Sequence[float], partition) -> QfiMatrix:
    """GHZ under bit flips: ``4 sum_j (g(j) + g(~j)) h*(j) h*(j)^T`` over half the strings."""
    part = as_partition(partition)
    _, p = _ghz_n(part, p)
    n = part.total
    half = 1 << (n - 1) if n else 1
    hs = np.asarray(part.n_vec, dtype=float) - 2 * hamming_table(part)[:half]
    idx = np.arange(half)
    bits = (idx[:, None] >> np.arange(n)) & 1
    g = np.prod(np.where(bits == 1, p, 1 - p), axis=1)
    gbar = np.prod(np.where(bits == 1, 1 - p, p), axis=1)
    lam = g + gbar
    return QfiMatrix(4 * np.einsum("j,jm,jn->mn", lam, hs, hs), "closed-form")


def predict_depolarizing_qfi(p: Sequence[float], a, convention: str = "keep") -> QfiMatrix:
    """GHZ under depolarizing noise.

    The GHZ block keeps eigenvalues with ``lam+ + lam- = prod((1 + 2p)/3) + prod(2(1 - p)/3)`` and
    ``lam+ - lam- = prod((4p - 1)/3)`` (keep convention); ``Q = 4 (lam+ - lam-)^2/(lam+ + lam-) a a^T``.
    """
    a, p = _ghz_n(a, p)
    if convention == "error-rate":
        p = 1 - p
    elif convention != "keep":
        raise ValueError(f"unknown depolarizing convention {convention!r}")
    total = np.prod((1 + 2 * p) / 3) + np.prod(2 * (1 - p) / 3)
    diff = np.prod((4 * p - 1) / 3)
    scale = 0.0 if total <= 0 else 4 * diff ** 2 / total
    return QfiMatrix(scale * np.outer(a, a), "closed-form")


def predict_amplitude_damping_qfi(p: Sequence[float], a) -> QfiMatrix:
    """GHZ under amplitude damping, from the ``{|0..0>, |1..1>}`` block of the output.

    ``B = 1/2 [[1 + prod p, prod sqrt(1-p)], [prod sqrt(1-p), prod(1-p)]]``; with eigenpairs
    ``(l+, u+)``, ``(l-, u-)``, ``Q = 4 (l+ - l-)^2/(l+ + l-) |u+^T Z u-|^2 a a^T``.  The other damped
    strings are diagonal and do not couple to the block.
    """
    a, p = _ghz_n(a, p)
    off = np.prod(np.sqrt(1 - p))
    block = 0.5 * np.array([[1 + np.prod(p), off], [off, np.prod(1 - p)]])
    vals, vecs = np.linalg.eigh(block)
    lm, lp = vals
    um, up = vecs[:, 0], vecs[:, 1]
    overlap = (up * np.array([1.0, -1.0])) @ um
    scale = 0.0 if lp + lm <= 0 else 4 * (lp - lm) ** 2 / (lp + lm) * overlap ** 2
    return QfiMatrix(scale * np.outer(a, a), "closed-form")


# ---------------------------------------------------------------------------
# particle loss

@dataclass(frozen=True, eq=False)
class LossReport:
    partition: ResourcePartition
    lost: tuple[int, ...]
    zero_information: bool
    below_minimal: bool
    trace_qfi: float
    report: Optional[PrivacyReport]

    @property
    def privacy(self) -> float:
        return float("nan") if self.report is None else self.report.privacy


def _z_like(dyn: Optional[SeparableDynamics], p: ResourcePartition, lost: Sequence[int]) -> SeparableDynamics:
    if dyn is None:
        return SeparableDynamics.z(p)
    keep = [q for q in range(dyn.n) if q not in set(lost)]
    return SeparableDynamics(p, np.asarray(dyn.directions)[keep], dyn.times)


def loss_analysis(f: FamilySpec | StateVector | DensityMatrix, lost: Sequence[int], a=None,
                  partition: ResourcePartition | None = None,
                  dyn: Optional[SeparableDynamics] = None) -> LossReport:
    """Trace out ``lost`` and evaluate the surviving privacy with ``a`` unchanged per node."""
    if isinstance(f, FamilySpec):
        state, partition, a = build_family_state(f), f.partition, f.a if a is None else as_target(a)
    else:
        if partition is None or a is None:
            raise ValueError("a raw state needs its partition and target")
        state, partition, a = f, as_partition(partition), as_target(a)
    lost = tuple(sorted(set(int(q) for q in lost)))
    reduced = partition.without(lost)
    rho = apply_channel(as_density(state), ChannelSpec.loss(lost, partition.total))
    below = not preceq(a.a_vec, reduced.n_vec)
    q = qfi_mixed_eig(rho, _z_like(dyn, reduced, lost))
    if q.trace <= ZERO_INFORMATION_TOL:
        return LossReport(reduced, lost, True, below, q.trace, None)
    return LossReport(reduced, lost, False, below, q.trace, privacy_measure(q, a))


# ---------------------------------------------------------------------------
# scans

@dataclass(frozen=True, eq=False)
class RobustnessRow:
    p: float
    privacy: float
    trace_qfi: float
    q_along_a: float
    qfi: np.ndarray


@dataclass(frozen=True, eq=False)
class RobustnessCurve:
    kind: str
    target: TargetFunction
    rows: tuple[RobustnessRow, ...]

    COLUMNS = ("p", "privacy", "trace_qfi", "q_along_a")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def as_table(self) -> list[tuple[float, float, float, float]]:
        return [(r.p, r.privacy, r.trace_qfi, r.q_along_a) for r in self.rows]


def _row(p: float, q: QfiMatrix, a: TargetFunction) -> RobustnessRow:
    tr = q.trace
    if tr <= ZERO_INFORMATION_TOL:
        return RobustnessRow(float(p), float("nan"), tr, 0.0, np.array(q.matrix))
    rep = privacy_measure(q, a)
    return RobustnessRow(float(p), rep.privacy, tr, rep.q_along_a, np.array(q.matrix))


def robustness_scan(probe: StateVector | DensityMatrix | Callable[[], object], kind: str,
                    grid: Sequence[float], a, dyn: Dynamics, convention: str = "keep") -> RobustnessCurve:
    """Apply a uniform channel of each strength in ``grid`` and record the privacy."""
    if kind == "loss":
        raise ValueError("use loss_scan for particle loss")
    grid = [float(x) for x in grid]
    if any(y < x for x, y in zip(grid, grid[1:])):
        raise ValueError("scan grid must be non-decreasing")
    a = as_target(a)
    state = probe() if callable(probe) else probe
    rho0 = as_density(state)

    def point(p):
        rho = apply_channel(rho0, ChannelSpec.uniform(kind, p, rho0.n, convention=convention))
        return _row(p, qfi_mixed_eig(rho, dyn), a)

    workers = min(thread_cap(), len(grid)) or 1
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(point, grid))
    else:
        rows = [point(p) for p in grid]
    return RobustnessCurve(kind, a, tuple(rows))


def loss_scan(f: FamilySpec | StateVector, order: Sequence[int], a=None,
              partition: ResourcePartition | None = None) -> RobustnessCurve:
    """Lose qubits of ``order`` one at a time; row ``p`` is the number lost so far."""
    order = [int(q) for q in order]
    target = f.a if isinstance(f, FamilySpec) else as_target(a)
    rows = []
    for count in range(len(order) + 1):
        r = loss_analysis(f, order[:count], a=a, partition=partition)
        if r.report is None:
            rows.append(RobustnessRow(float(count), float("nan"), r.trace_qfi, 0.0,
                                      np.zeros((target.k, target.k))))
        else:
            rows.append(RobustnessRow(float(count), r.report.privacy, r.trace_qfi, r.report.q_along_a,
                                      np.array(r.report.qfi.matrix)))
    return RobustnessCurve("loss", target, tuple(rows))


# ---------------------------------------------------------------------------
# logical-basis condition

@dataclass(frozen=True, eq=False)
class LogicalCondition:
    holds: bool
    worst_deviation: float
    pairs_checked: int


def logical_condition(rho, dyn: Dynamics, a, tol: float = 1e-9, eps_supp: float = 1e-10) -> LogicalCondition:
    """Check that generator matrix elements between eigenvectors of ``rho`` point along ``a``.

    Pairs are taken across distinct eigenvalues, with the null space counted
    as a single eigenvalue; those are the pairs that carry Fisher information.
    """
    a = as_target(a)
    ahat = a.normalized_a
    spec = eig_hermitian(as_density(rho).mat, eps_supp)
    vals, vecs, supp = spec.eigenvalues, spec.eigenvectors, spec.support
    gens = [collective_generator(dyn, mu) for mu in range(dyn.k)]
    els = np.stack([vecs.conj().T @ g @ vecs for g in gens], axis=-1)  # (d, d, k)
    scale = max(1.0, max(np.linalg.norm(g, 2) for g in gens))
    top = vals[0]
    worst, count = 0.0, 0
    d = vals.size
    for i in range(d):
        if not supp[i]:
            continue
        for j in range(d):
            if j == i or (supp[j] and abs(vals[i] - vals[j]) <= 1e-9 * top):
                continue
            if j < i and supp[j]:
                continue
            v = els[i, j]
            perp = v - (ahat @ v) * ahat
            worst = max(worst, float(np.linalg.norm(perp)) / scale)
            count += 1
    return LogicalCondition(worst <= tol, worst, count)


def check_logical_basis(zero: StateVector, one: StateVector, dyn: Dynamics, a, channel: ChannelSpec,
                        samples: int = 50, seed: int = 0) -> tuple[bool, list[float]]:
    """Does the condition hold on every channel output of ``alpha|0_L> + beta|1_L>``?

    Returns whether it held for all samples and the privacy of each sample
    (``nan`` for zero information).
    """
    rng = np.random.default_rng(seed)
    z = np.asarray(zero.amps if isinstance(zero, StateVector) else zero)
    o = np.asarray(one.amps if isinstance(one, StateVector) else one)
    ok = True
    privs = []
    a = as_target(a)
    for _ in range(samples):
        ab = rng.normal(size=2) + 1j * rng.normal(size=2)
        ab /= np.linalg.norm(ab)
        psi = StateVector.normalized(ab[0] * z + ab[1] * o)
        rho = apply_channel(psi.density(), channel)
        ok &= logical_condition(rho, dyn, a).holds
        q = qfi_mixed_eig(rho, dyn)
        privs.append(float("nan") if q.trace <= ZERO_INFORMATION_TOL else privacy_measure(q, a).privacy)
    return bool(ok), privs
