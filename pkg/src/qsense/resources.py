"""
Integer-vector arithmetic over distributed resources.

A network of ``k`` nodes shares ``n`` qubits.  Node ``mu`` owns a contiguous
range of qubit indices, qubit 0 being the least-significant bit of the
integer encoding of a computational basis string.  Target functions are
linear, ``f(theta) = a . theta``, and are stored in a canonical integer form.
"""
from __future__ import annotations

import enum
import functools
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Order",
    "Zone",
    "ResourcePartition",
    "TargetFunction",
    "BitString",
    "gcd_vec",
    "product_order",
    "preceq",
    "prec",
    "incomparable",
    "hamming_vec",
    "hamming_vec_sym",
    "hamming_table",
    "classify_zone",
    "class_representatives",
    "class_indices",
    "weight_vectors",
    "as_target",
    "as_partition",
    "nonzero_multiples",
    "multiple_counterexamples",
    "weight_pair_counterexamples",
]


class Order(enum.Enum):
    """Outcome of comparing two integer vectors in the product order."""

    EQUAL = "equal"
    LESS = "strictly-less"
    GREATER = "strictly-greater"
    INCOMPARABLE = "incomparable"

    @property
    def less_or_equal(self) -> bool:
        return self in (Order.EQUAL, Order.LESS)

    @property
    def greater_or_equal(self) -> bool:
        return self in (Order.EQUAL, Order.GREATER)


class Zone(enum.Enum):
    """Resource regimes for a positive canonical target."""

    I = "I"
    II = "II"
    III = "III"
    IV = "IV"


def _as_int_tuple(v: Iterable, name: str = "vector") -> tuple[int, ...]:
    out = []
    for x in v:
        if isinstance(x, (bool, np.bool_)):
            raise ValueError(f"{name} entries must be integers, got bool")
        if isinstance(x, (int, np.integer)):
            out.append(int(x))
        elif isinstance(x, (float, np.floating)) and float(x).is_integer():
            out.append(int(x))
        else:
            raise ValueError(f"{name} entries must be integers, got {x!r}")
    return tuple(out)


def gcd_vec(v: Sequence[int]) -> int:
    """Greatest common divisor of the absolute values; ``gcd(0,...,0) = 0``."""
    t = _as_int_tuple(v)
    if len(t) == 0:
        raise ValueError("gcd of an empty vector is undefined")
    return reduce(math.gcd, (abs(x) for x in t), 0)


def product_order(u: Sequence[int], v: Sequence[int]) -> Order:
    """Compare ``u`` against ``v`` componentwise."""
    if len(u) != len(v):
        raise ValueError(f"length mismatch: {len(u)} vs {len(v)}")
    le = all(x <= y for x, y in zip(u, v))
    ge = all(x >= y for x, y in zip(u, v))
    if le and ge:
        return Order.EQUAL
    if le:
        return Order.LESS
    if ge:
        return Order.GREATER
    return Order.INCOMPARABLE


def preceq(u: Sequence[int], v: Sequence[int]) -> bool:
    """``u ⪯ v``."""
    return product_order(u, v).less_or_equal


def prec(u: Sequence[int], v: Sequence[int]) -> bool:
    """``u ≺ v``: ``u ⪯ v`` with at least one strict coordinate."""
    return product_order(u, v) is Order.LESS


def incomparable(u: Sequence[int], v: Sequence[int]) -> bool:
    return product_order(u, v) is Order.INCOMPARABLE


@dataclass(frozen=True)
class ResourcePartition:
    """Contiguous assignment of qubits to nodes.

    Node ``mu`` owns qubits ``offsets[mu] .. offsets[mu] + n_vec[mu] - 1``.
    """

    n_vec: tuple[int, ...]

    def __post_init__(self):
        n_vec = _as_int_tuple(self.n_vec, "n_vec")
        if len(n_vec) == 0:
            raise ValueError("a partition needs at least one node")
        if any(x < 0 for x in n_vec):
            raise ValueError(f"node sizes must be non-negative, got {n_vec}")
        object.__setattr__(self, "n_vec", n_vec)

    @property
    def k(self) -> int:
        return len(self.n_vec)

    @property
    def total(self) -> int:
        return sum(self.n_vec)

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(itertools.accumulate((0,) + self.n_vec[:-1]))

    @property
    def node_ranges(self) -> tuple[range, ...]:
        return tuple(range(o, o + m) for o, m in zip(self.offsets, self.n_vec))

    def node_of(self, qubit: int) -> int:
        for mu, r in enumerate(self.node_ranges):
            if qubit in r:
                return mu
        raise ValueError(f"qubit {qubit} outside 0..{self.total - 1}")

    def qubit_nodes(self) -> np.ndarray:
        """Node label of every qubit, shape ``(n,)``."""
        return np.repeat(np.arange(self.k), self.n_vec)

    def without(self, qubits: Iterable[int]) -> "ResourcePartition":
        """Partition over the surviving qubits after removing ``qubits``."""
        lost = set(int(q) for q in qubits)
        if any(q < 0 or q >= self.total for q in lost):
            raise ValueError(f"qubits {sorted(lost)} outside 0..{self.total - 1}")
        counts = [sum(1 for q in r if q not in lost) for r in self.node_ranges]
        return ResourcePartition(tuple(counts))

    def __str__(self) -> str:
        return f"ResourcePartition{self.n_vec}"


@dataclass(frozen=True)
class TargetFunction:
    """Linear target ``a . theta`` in canonical integer form.

    Rational input is multiplied by the lcm of its denominators and then
    divided by the gcd of the result.  ``scale`` is the factor that maps the
    input to the canonical vector, ``a_vec = scale * input``.
    """

    a_vec: tuple[int, ...]
    scale: Fraction = field(default=Fraction(1))

    def __post_init__(self):
        a = _as_int_tuple(self.a_vec, "a_vec")
        if len(a) == 0:
            raise ValueError("target vector is empty")
        g = gcd_vec(a)
        if g == 0:
            raise ValueError("target vector must not be zero")
        if g != 1:
            object.__setattr__(self, "scale", Fraction(self.scale) / g)
            a = tuple(x // g for x in a)
        object.__setattr__(self, "a_vec", a)

    @classmethod
    def from_values(cls, values: Sequence) -> "TargetFunction":
        """Build from ints, Fractions, decimal strings or ``"p/q"`` strings."""
        fr = [Fraction(v) if not isinstance(v, float) else Fraction(v).limit_denominator(10**9)
              for v in values]
        if not fr:
            raise ValueError("target vector is empty")
        lcm = reduce(math.lcm, (f.denominator for f in fr), 1)
        ints = tuple(int(f * lcm) for f in fr)
        if gcd_vec(ints) == 0:
            raise ValueError("target vector must not be zero")
        return cls(ints, Fraction(lcm))

    @property
    def k(self) -> int:
        return len(self.a_vec)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.a_vec, dtype=float)

    @property
    def normalized_a(self) -> np.ndarray:
        a = self.array
        return a / np.linalg.norm(a)

    @property
    def is_positive(self) -> bool:
        return all(x > 0 for x in self.a_vec)


@dataclass(frozen=True)
class BitString:
    """Computational-basis label; ``bits[q]`` is the value of qubit ``q``."""

    bits: tuple[int, ...]

    def __post_init__(self):
        b = _as_int_tuple(self.bits, "bits")
        if any(x not in (0, 1) for x in b):
            raise ValueError(f"bits must be 0/1, got {b}")
        object.__setattr__(self, "bits", b)

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitString":
        return cls(tuple(bits))

    @classmethod
    def from_str(cls, text: str) -> "BitString":
        """Parse text read left to right as qubit 0, 1, 2, ...; spaces ignored."""
        chars = [c for c in text if not c.isspace()]
        if any(c not in "01" for c in chars):
            raise ValueError(f"not a bit string: {text!r}")
        return cls(tuple(int(c) for c in chars))

    @classmethod
    def from_int(cls, value: int, n: int) -> "BitString":
        if value < 0 or value >= 1 << n:
            raise ValueError(f"{value} does not fit in {n} bits")
        return cls(tuple((value >> q) & 1 for q in range(n)))

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def value(self) -> int:
        return sum(b << q for q, b in enumerate(self.bits))

    def complement(self) -> "BitString":
        return BitString(tuple(1 - b for b in self.bits))

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def _bits_of(s: BitString | int | str, n: int) -> BitString:
    if isinstance(s, BitString):
        bs = s
    elif isinstance(s, str):
        bs = BitString.from_str(s)
    else:
        bs = BitString.from_int(int(s), n)
    if bs.n != n:
        raise ValueError(f"bit string has {bs.n} bits, partition has {n}")
    return bs


def hamming_vec(s: BitString | int | str, p: ResourcePartition) -> tuple[int, ...]:
    """Number of ones of ``s`` inside every node."""
    bits = _bits_of(s, p.total).bits
    return tuple(sum(bits[q] for q in r) for r in p.node_ranges)


def hamming_vec_sym(s: BitString | int | str, p: ResourcePartition) -> tuple[int, ...]:
    """``n_vec - 2 * hamming_vec``: the eigenvalues of the node Z-sums on ``|s>``."""
    h = hamming_vec(s, p)
    return tuple(m - 2 * x for m, x in zip(p.n_vec, h))


def hamming_table(p: ResourcePartition, symmetric: bool = False) -> np.ndarray:
    """Vectorial Hamming weight of every basis index, shape ``(2**n, k)``."""
    n = p.total
    idx = np.arange(1 << n)
    bits = (idx[:, None] >> np.arange(n)[None, :]) & 1
    table = np.zeros((1 << n, p.k), dtype=np.int64)
    for mu, r in enumerate(p.node_ranges):
        if len(r):
            table[:, mu] = bits[:, r.start:r.stop].sum(axis=1)
    if symmetric:
        table = np.asarray(p.n_vec)[None, :] - 2 * table
    return table


def classify_zone(a: TargetFunction | Sequence[int], n: Sequence[int]) -> Zone:
    """Privacy zone of resources ``n`` for a positive canonical target ``a``."""
    a_vec = a.a_vec if isinstance(a, TargetFunction) else _as_int_tuple(a, "a")
    n_vec = _as_int_tuple(n, "n")
    if len(a_vec) != len(n_vec):
        raise ValueError(f"length mismatch: a has {len(a_vec)}, n has {len(n_vec)}")
    if gcd_vec(a_vec) != 1:
        raise ValueError(f"target {a_vec} is not canonical (gcd != 1); reduce it first")
    if any(x <= 0 for x in a_vec):
        raise ValueError(f"zones are defined for positive targets only, got {a_vec}")
    rel = product_order(n_vec, a_vec)
    if rel is Order.EQUAL:
        return Zone.II
    if rel is not Order.GREATER:
        return Zone.I
    two_a = tuple(2 * x for x in a_vec)
    if preceq(two_a, n_vec):
        return Zone.IV
    return Zone.III


def weight_vectors(upper: Sequence[int], lower: Sequence[int] | None = None):
    """All integer vectors ``w`` with ``lower ⪯ w ⪯ upper`` in lexicographic order."""
    upper = _as_int_tuple(upper)
    lower = (0,) * len(upper) if lower is None else _as_int_tuple(lower)
    return [tuple(w) for w in itertools.product(*(range(lo, hi + 1) for lo, hi in zip(lower, upper)))]


def class_indices(p: ResourcePartition, w: Sequence[int]) -> np.ndarray:
    """Integer encodings of every string with vectorial weight ``w``, increasing."""
    w = _as_int_tuple(w, "w")
    if len(w) != p.k:
        raise ValueError(f"weight has {len(w)} entries, partition has {p.k} nodes")
    if not (preceq((0,) * p.k, w) and preceq(w, p.n_vec)):
        raise ValueError(f"weight {w} outside 0 ⪯ w ⪯ {p.n_vec}")
    per_node = []
    for r, wm in zip(p.node_ranges, w):
        vals = [sum(1 << q for q in combo) for combo in itertools.combinations(r, wm)]
        per_node.append(vals)
    idx = sorted(sum(parts) for parts in itertools.product(*per_node))
    return np.asarray(idx, dtype=np.int64)


def class_representatives(p: ResourcePartition, w: Sequence[int]) -> list[BitString]:
    """The full equivalence class of strings with vectorial weight ``w``."""
    return [BitString.from_int(int(i), p.total) for i in class_indices(p, w)]


def as_target(a) -> TargetFunction:
    """Coerce a sequence (ints, fractions, strings) to a canonical target."""
    if isinstance(a, TargetFunction):
        return a
    return TargetFunction.from_values(list(a))


def as_partition(p) -> ResourcePartition:
    if isinstance(p, ResourcePartition):
        return p
    return ResourcePartition(tuple(p))


# ---------------------------------------------------------------------------
# integer-vector facts behind the zone classification, as exhaustive checkers

def nonzero_multiples(v: np.ndarray, m: Sequence[int]) -> np.ndarray:
    """Row mask: ``v[r] = alpha m`` for some real ``alpha != 0``."""
    v = np.atleast_2d(np.asarray(v, dtype=np.int64))
    m = np.asarray(m, dtype=np.int64)
    ok = np.any(v != 0, axis=1) & np.all((v == 0) | (m != 0), axis=1)
    for i in range(m.size):
        for j in range(i + 1, m.size):
            ok &= v[:, i] * m[j] - v[:, j] * m[i] == 0
    return ok


def multiple_counterexamples(bound: int = 6, k_max: int = 3) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Pairs ``(a, b)`` with ``gcd(a) = 1`` and ``b = alpha a`` for a non-integer ``alpha``.

    Both vectors range over ``[-bound, bound]^k`` for ``k <= k_max``.
    """
    bad = []
    for k in range(1, k_max + 1):
        grid = np.array(list(itertools.product(range(-bound, bound + 1), repeat=k)), dtype=np.int64)
        for a in grid:
            if gcd_vec(tuple(a)) != 1:
                continue
            i = int(np.flatnonzero(a)[0])
            hits = grid[nonzero_multiples(grid, a)]
            # alpha = b_i / a_i must be an integer
            for b in hits[hits[:, i] % a[i] != 0]:
                bad.append((tuple(int(x) for x in a), tuple(int(x) for x in b)))
    return bad


@functools.lru_cache(maxsize=4096)
def _weight_pair_vectors(n: tuple[int, ...], strict: bool) -> np.ndarray:
    ws = [w for w in weight_vectors(n) if not strict or prec(w, n)]
    if len(ws) < 2:
        return np.zeros((0, len(n)), dtype=np.int64)
    u = np.asarray(n, dtype=np.int64) - 2 * np.asarray(ws, dtype=np.int64)
    off = ~np.eye(len(ws), dtype=bool)
    out = np.unique(np.concatenate([(u[:, None] + u[None, :])[off], (u[:, None] - u[None, :])[off]]), axis=0)
    out.setflags(write=False)
    return out


def weight_pair_counterexamples(n: Sequence[int], m: Sequence[int], strict: bool = True) -> np.ndarray:
    """Weights ``a != b`` under ``n`` with ``(n - 2a) +- (n - 2b) = alpha m``, ``alpha != 0``.

    With ``strict`` both weights must satisfy ``w ≺ n``; otherwise ``w ⪯ n``.
    Returns the offending vectors ``(n - 2a) +- (n - 2b)``.
    """
    cand = _weight_pair_vectors(_as_int_tuple(n, "n"), bool(strict))
    return cand[nonzero_multiples(cand, m)] if cand.size else cand
