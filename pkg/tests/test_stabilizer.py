import itertools

import numpy as np
import pytest

from qsense.hamiltonians import PauliString, SeparableDynamics
from qsense.hilbert import StateVector, ghz
from qsense.qfi import qfi_pure_dense
from qsense.resources import ResourcePartition
from qsense.stabilizer import (
    Tableau,
    apply_local_clifford,
    canonical_form,
    enumerate_stabilizer_states,
    local_clifford_orbit,
    qfi_stabilizer,
    signed_membership,
    stabilizer_state_vector,
    tableau_ghz,
    tableau_graph,
    tableau_product_zero,
)

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
S = np.diag([1, 1j])
GATES = {"H": H, "S": S, "X": np.array([[0, 1], [1, 0]]), "Y": np.array([[0, -1j], [1j, 0]]), "Z": np.diag([1, -1])}


def _apply_dense(vec, gate, q, n):
    op = np.kron(np.kron(np.eye(1 << (n - q - 1)), GATES[gate]), np.eye(1 << q))
    return op @ vec


def _same_ray(u, v):
    return abs(abs(np.vdot(u, v)) - 1) < 1e-10


def _stabilizes(t, vec):
    return all(np.allclose(p.matrix() @ vec, vec, atol=1e-12) for p in t.paulis())


def test_ghz_tableau_examples():
    assert [str(p) for p in tableau_ghz(3).paulis()] == ["+XXX", "+ZZI", "+ZIZ"]
    assert [str(p) for p in tableau_ghz(1).paulis()] == ["+X"]
    assert [str(p) for p in tableau_ghz(2).paulis()] == ["+XX", "+ZZ"]
    for n in range(1, 6):
        assert tableau_ghz(n).is_valid()
        assert _same_ray(stabilizer_state_vector(tableau_ghz(n)).amps, ghz(n).amps)


def test_graph_tableau_examples():
    k2 = tableau_graph([[0, 1], [1, 0]])
    assert [p.letters for p in k2.paulis()] == ["XZ", "ZX"]
    empty = tableau_graph(np.zeros((3, 3), dtype=int))
    assert [p.letters for p in empty.paulis()] == ["XII", "IXI", "IIX"]
    with pytest.raises(ValueError):
        tableau_graph([[0, 1], [0, 0]])
    with pytest.raises(ValueError):
        tableau_graph([[1, 0], [0, 0]])


def test_ghz_with_hadamards_is_star_graph():
    t = apply_local_clifford(apply_local_clifford(tableau_ghz(3), "H", 1), "H", 2)
    star = tableau_graph([[0, 1, 1], [1, 0, 0], [1, 0, 0]])
    assert canonical_form(t) == canonical_form(star)


def test_hadamard_is_involution():
    t = tableau_graph([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    for q in range(3):
        assert apply_local_clifford(apply_local_clifford(t, "H", q), "H", q) == t


def test_z_flips_only_x_row_of_ghz():
    for q in range(3):
        t = apply_local_clifford(tableau_ghz(3), "Z", q)
        assert [str(p) for p in t.paulis()] == ["-XXX", "+ZZI", "+ZIZ"]
        vec = _apply_dense(ghz(3).amps, "Z", q, 3)
        assert _stabilizes(t, vec)


@pytest.mark.parametrize("seed", range(6))
def test_clifford_updates_match_dense(seed):
    rng = np.random.default_rng(seed)
    n = 4
    t = tableau_ghz(n)
    vec = ghz(n).amps
    for _ in range(12):
        g = str(rng.choice(list(GATES)))
        q = int(rng.integers(n))
        t = apply_local_clifford(t, g, q)
        vec = _apply_dense(vec, g, q, n)
        assert t.is_valid()
        assert _stabilizes(t, vec)
    assert _same_ray(stabilizer_state_vector(t).amps, vec)


def test_signed_membership_examples():
    t = tableau_ghz(3)
    assert signed_membership(t, "ZZI") == 1
    assert signed_membership(t, "ZII") == 0
    assert signed_membership(t, "-XXX") == -1
    assert signed_membership(t, "IZZ") == 1
    assert signed_membership(t, "-YYX") == 1
    with pytest.raises(ValueError):
        signed_membership(t, "iZZI")


def test_signed_membership_matches_expectation():
    t = apply_local_clifford(apply_local_clifford(tableau_ghz(3), "S", 0), "H", 2)
    vec = stabilizer_state_vector(t).amps
    for letters in itertools.product("IXYZ", repeat=3):
        p = PauliString("".join(letters))
        ev = np.vdot(vec, p.matrix() @ vec).real
        m = signed_membership(t, p)
        if m == 0:
            assert abs(ev) < 1e-12
        else:
            assert abs(ev - m) < 1e-12


def test_qfi_stabilizer_examples():
    p = ResourcePartition((1, 1, 1))
    np.testing.assert_allclose(np.asarray(qfi_stabilizer(tableau_ghz(3), p)), 4 * np.ones((3, 3)), atol=1e-12)
    plus = Tableau.from_paulis(["XII", "IXI", "IIX"])
    p2 = ResourcePartition((2, 1))
    np.testing.assert_allclose(np.asarray(qfi_stabilizer(plus, p2)), 4 * np.diag([2, 1]), atol=1e-12)
    np.testing.assert_allclose(np.asarray(qfi_stabilizer(tableau_product_zero(3), p)), 0, atol=1e-12)
    assert qfi_stabilizer(tableau_ghz(3), p).provenance == "stabilizer"
    with pytest.raises(ValueError):
        qfi_stabilizer(tableau_ghz(3), p, SeparableDynamics.uniform(p, [1, 1, 0]))


def _seeds(n):
    out = [tableau_ghz(n)]
    path = np.zeros((n, n), dtype=int)
    for i in range(n - 1):
        path[i, i + 1] = path[i + 1, i] = 1
    out.append(tableau_graph(path))
    return out


def _short_words(t, depth, gates=("H", "S", "X")):
    frontier = [t]
    seen = {canonical_form(t): t}
    for _ in range(depth):
        nxt = []
        for u in frontier:
            for q in range(u.n):
                for g in gates:
                    v = apply_local_clifford(u, g, q)
                    key = canonical_form(v)
                    if key not in seen:
                        seen[key] = v
                        nxt.append(v)
        frontier = nxt
    return list(seen.values())


@pytest.mark.parametrize("n_vec", [(1, 1), (1, 2), (2, 1, 1), (1, 1, 1, 1), (2, 1, 2)])
def test_qfi_stabilizer_matches_dense_on_orbit(n_vec):
    p = ResourcePartition(n_vec)
    n = p.total
    rng = np.random.default_rng(sum(n_vec))
    depth = 4 if n <= 3 else 2
    states = [s for seed in _seeds(n) for s in _short_words(seed, depth)]
    letters = ["Z" * n, "X" * n, "".join(rng.choice(list("XYZ"), n))]
    worst = 0.0
    for t in states:
        vec = stabilizer_state_vector(t)
        for word in letters:
            dyn = SeparableDynamics.from_letters(p, word, times=rng.uniform(0.5, 2, p.k))
            a = np.asarray(qfi_stabilizer(t, p, dyn))
            b = np.asarray(qfi_pure_dense(vec, dyn))
            worst = max(worst, float(np.max(np.abs(a - b))))
    assert worst <= 1e-9


def test_qfi_stabilizer_signed_axes():
    p = ResourcePartition((1, 2))
    dyn = SeparableDynamics(p, np.array([[0, 0, -1.0], [1.0, 0, 0], [0, -1.0, 0]]))
    t = apply_local_clifford(tableau_graph([[0, 1, 1], [1, 0, 0], [1, 0, 0]]), "S", 1)
    np.testing.assert_allclose(np.asarray(qfi_stabilizer(t, p, dyn)),
                               np.asarray(qfi_pure_dense(stabilizer_state_vector(t), dyn)), atol=1e-12)


@pytest.mark.parametrize("n,count", [(1, 6), (2, 60), (3, 1080)])
def test_enumeration_counts(n, count):
    states = enumerate_stabilizer_states(n)
    assert len(states) == count
    assert len({canonical_form(t) for t in states}) == count
    vecs = np.array([stabilizer_state_vector(t).amps for t in states])
    gram = np.abs(vecs.conj() @ vecs.T)
    np.fill_diagonal(gram, 0)
    assert gram.max() < 1 - 1e-9


def _max_privacy_over_axes(vec, p, a):
    """Dense privacy for every per-qubit choice of signed Pauli axis."""
    from qsense.privacy import ZeroInformationError, privacy_measure

    best = -1.0
    axes = [s * e for e in np.eye(3) for s in (1.0, -1.0)]
    for rows in itertools.product(axes, repeat=p.total):
        dyn = SeparableDynamics(p, np.array(rows))
        try:
            rep = privacy_measure(qfi_pure_dense(vec, dyn), a)
        except ZeroInformationError:
            continue
        best = max(best, rep.privacy)
    return best


def test_no_private_two_qubit_stabilizer_for_1_2():
    p = ResourcePartition((1, 1))
    best = max(_max_privacy_over_axes(stabilizer_state_vector(t), p, (1, 2)) for t in enumerate_stabilizer_states(2))
    assert best < 1 - 1e-6


def _pauli_covariances(vecs, word):
    """Per-state 3x3 covariance of the single-qubit Paulis named by ``word``."""
    n = len(word)
    ops = [PauliString.single(c, j, n).matrix() for j, c in enumerate(word)]
    mean = np.stack([np.einsum("si,ij,sj->s", vecs.conj(), o, vecs).real for o in ops], axis=1)
    second = np.empty((len(vecs), n, n))
    for j, k in itertools.product(range(n), repeat=2):
        second[:, j, k] = np.einsum("si,ij,sj->s", vecs.conj(), ops[j] @ ops[k], vecs).real
    return second - mean[:, :, None] * mean[:, None, :]


def test_private_three_qubit_stabilizers_are_ghz_orbit():
    from qsense.hilbert import partial_trace
    from qsense.privacy import privacy_measure

    p = ResourcePartition((1, 1, 1))
    states = enumerate_stabilizer_states(3)
    vecs = np.array([stabilizer_state_vector(t).amps for t in states])
    signs = np.array(list(itertools.product((1, -1), repeat=3)), dtype=float)
    private = set()
    for word in itertools.product("XYZ", repeat=3):
        cov = _pauli_covariances(vecs, "".join(word))
        tr = np.trace(cov, axis1=1, axis2=2)
        along = np.einsum("ai,sij,aj->sa", signs, cov, signs) / 3
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(tr[:, None] > 1e-12, along / tr[:, None], 0.0)
        for si, ai in zip(*np.nonzero(ratio > 1 - 1e-6)):
            axes = np.zeros((3, 3))
            axes[np.arange(3), ["XYZ".index(c) for c in word]] = signs[ai]
            dyn = SeparableDynamics(p, axes)
            if privacy_measure(qfi_stabilizer(states[si], p, dyn), (1, 1, 1)).is_private:
                private.add(canonical_form(states[si]))
    orbit = {canonical_form(t) for t in local_clifford_orbit([tableau_ghz(3)])}
    assert private == orbit
    # the orbit is exactly the set of states with every qubit maximally mixed
    genuine = {
        canonical_form(t) for t, v in zip(states, vecs)
        if all(np.allclose(partial_trace(StateVector(v).density(), [x for x in range(3) if x != q]).mat,
                           np.eye(2) / 2, atol=1e-12) for q in range(3))
    }
    assert genuine == orbit
