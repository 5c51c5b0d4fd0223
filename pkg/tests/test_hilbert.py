import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsense.hilbert import (
    DensityMatrix,
    StateVector,
    apply_local,
    basis_state,
    eig_hermitian,
    embed_single,
    ghz,
    partial_trace,
    permute_qubits,
    random_density,
    random_state,
)
from qsense.resources import BitString, ResourcePartition


def _kron_all(ops):
    """``kron(op_{n-1}, ..., op_0)`` for a list indexed by qubit."""
    out = np.ones((1, 1))
    for op in reversed(ops):
        out = np.kron(out, op)
    return out


def _trace_out_oracle(rho, n, q):
    # explicit index sum over the traced bit
    d = 1 << n
    keep = [x for x in range(n) if x != q]
    out = np.zeros((d >> 1, d >> 1), dtype=complex)
    for i in range(d):
        for j in range(d):
            if ((i >> q) & 1) != ((j >> q) & 1):
                continue
            ri = sum(((i >> x) & 1) << t for t, x in enumerate(keep))
            rj = sum(((j >> x) & 1) << t for t, x in enumerate(keep))
            out[ri, rj] += rho[i, j]
    return out


def test_basis_state_examples():
    np.testing.assert_array_equal(basis_state("0").amps, [1, 0])
    np.testing.assert_array_equal(basis_state("11").amps, [0, 0, 0, 1])
    assert np.argmax(np.abs(basis_state((0, 1)).amps)) == 2
    assert np.argmax(np.abs(basis_state(BitString.from_bits((0, 1))).amps)) == 2


def test_ghz_examples():
    g = ghz(3)
    expect = np.zeros(8)
    expect[[0, 7]] = 2 ** -0.5
    np.testing.assert_allclose(g.amps, expect)
    np.testing.assert_allclose(ghz(3, 1, 0).amps, basis_state("000").amps)
    minus = ghz(ResourcePartition((1, 1)), 2 ** -0.5, -(2 ** -0.5)).amps
    np.testing.assert_allclose(minus, [2 ** -0.5, 0, 0, -(2 ** -0.5)])
    with pytest.raises(ValueError):
        ghz(2, 1, 1)


def test_state_validation():
    with pytest.raises(ValueError):
        StateVector(np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        StateVector(np.ones(3) / np.sqrt(3))
    with pytest.raises(ValueError):
        DensityMatrix(np.array([[1, 1], [0, 0]]))
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(2))


def test_partial_trace_examples():
    g2 = ghz(2).density()
    np.testing.assert_allclose(partial_trace(g2, [0]).mat, np.eye(2) / 2, atol=1e-15)
    rng = np.random.default_rng(1)
    psi = random_state(2, rng)
    prod = np.kron(psi.amps, basis_state("0").amps)  # qubit 0 in |0>, psi on qubits 1, 2
    np.testing.assert_allclose(partial_trace(StateVector(prod).density(), [0]).mat,
                               np.outer(psi.amps, psi.amps.conj()), atol=1e-14)
    g3 = partial_trace(ghz(3).density(), [2]).mat
    np.testing.assert_allclose(np.diag(g3).real, [0.5, 0, 0, 0.5], atol=1e-15)
    np.testing.assert_allclose(g3 - np.diag(np.diag(g3)), 0, atol=1e-15)
    full = partial_trace(g2, [0, 1])
    np.testing.assert_allclose(full, [[1.0]])
    with pytest.raises(ValueError):
        partial_trace(g2, [0, 0])


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_partial_trace_matches_index_sum(n):
    rng = np.random.default_rng(n)
    rho = random_density(n, min(3, 1 << n), rng)
    for q in range(n):
        if n == 1:
            continue
        np.testing.assert_allclose(partial_trace(rho, [q]).mat, _trace_out_oracle(rho.mat, n, q), atol=1e-14)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_partial_trace_composes(n):
    rng = np.random.default_rng(10 + n)
    rho = random_density(n, 2, rng)
    for i, j in itertools.permutations(range(n), 2):
        once = partial_trace(rho, [i, j])
        step = partial_trace(rho, [i])
        j_new = j - (1 if j > i else 0)
        twice = partial_trace(step, [j_new]) if n > 2 else partial_trace(step, [j_new])
        np.testing.assert_allclose(np.asarray(twice), np.asarray(once), atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2 ** 31), st.data())
def test_partial_trace_is_a_valid_state(n, seed, data):
    rng = np.random.default_rng(seed)
    rho = random_density(n, data.draw(st.integers(1, 1 << n)), rng)
    qs = data.draw(st.sets(st.integers(0, n - 1), max_size=n - 1))
    out = partial_trace(rho, sorted(qs))
    assert isinstance(out, DensityMatrix)
    assert abs(np.trace(out.mat) - 1) < 1e-12
    assert np.linalg.eigvalsh(out.mat)[0] > -1e-12


def test_eig_examples():
    s = eig_hermitian(np.eye(4) / 4)
    np.testing.assert_allclose(s.eigenvalues, 0.25)
    assert s.rank == 4
    rng = np.random.default_rng(3)
    psi = random_state(3, rng)
    s = eig_hermitian(psi.density())
    assert s.rank == 1
    assert abs(s.eigenvalues[0] - 1) < 1e-12
    rho = random_density(2, 3, rng)
    assert np.max(np.abs(eig_hermitian(rho).reconstruct() - rho.mat)) <= 1e-9
    with pytest.raises(ValueError):
        eig_hermitian(np.array([[0, 1], [0, 0]]))


@pytest.mark.parametrize("seed", range(5))
def test_eig_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(3, 4, rng)
    z = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    u, _ = np.linalg.qr(z)
    a = eig_hermitian(rho).eigenvalues
    b = eig_hermitian(u @ rho.mat @ u.conj().T).eigenvalues
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_embed_single_matches_kron():
    x = np.array([[0, 1], [1, 0]])
    for q in range(3):
        ops = [np.eye(2)] * 3
        ops[q] = x
        np.testing.assert_array_equal(embed_single(x, q, 3), _kron_all(ops))


@pytest.mark.parametrize("qubits", [[0], [2], [0, 1], [2, 0], [1, 3]])
def test_apply_local_matches_dense(qubits):
    n = 4
    rng = np.random.default_rng(7)
    m = len(qubits)
    op = rng.normal(size=(1 << m, 1 << m)) + 1j * rng.normal(size=(1 << m, 1 << m))
    vec = random_state(n, rng).amps
    dense = np.zeros((1 << n, 1 << n), dtype=complex)
    for col in range(1 << n):
        local_in = sum(((col >> q) & 1) << t for t, q in enumerate(qubits))
        for local_out in range(1 << m):
            row = col
            for t, q in enumerate(qubits):
                row = (row & ~(1 << q)) | (((local_out >> t) & 1) << q)
            dense[row, col] += op[local_out, local_in]
    np.testing.assert_allclose(apply_local(vec, op, qubits, n), dense @ vec, atol=1e-13)
    batch = np.stack([vec, 2 * vec])
    np.testing.assert_allclose(apply_local(batch, op, qubits, n)[1], 2 * dense @ vec, atol=1e-13)


def test_permute_qubits_relabels():
    rng = np.random.default_rng(2)
    a, b, c = (random_state(1, rng).amps for _ in range(3))
    vec = np.kron(c, np.kron(b, a))  # qubit 0 = a, 1 = b, 2 = c
    out = permute_qubits(vec, [2, 0, 1])  # new 0 = old 2 (c), new 1 = a, new 2 = b
    np.testing.assert_allclose(out, np.kron(b, np.kron(a, c)), atol=1e-15)
    with pytest.raises(ValueError):
        permute_qubits(vec, [0, 0, 1])


def test_random_density_rank():
    rng = np.random.default_rng(4)
    for r in (1, 2, 4):
        assert eig_hermitian(random_density(2, r, rng)).rank == r
