import itertools

import numpy as np
import pytest

from qsense.hamiltonians import GeneralLocalHamiltonian, SeparableDynamics, build_orthotope, target_in_O2minus
from qsense.hilbert import StateVector, apply_local, basis_state, ghz, random_state
from qsense.privacy import (
    FamilySpec,
    LogicalBlock,
    LogicalSpec,
    ZeroInformationError,
    build_family_state,
    build_logical_state,
    check_measure_properties,
    class_state,
    eigenstate_superposition,
    enumerate_family_specs,
    family_orbit_fidelity,
    logical_partition,
    privacy_measure,
    search_max_privacy,
    verify_private,
)
from qsense.qfi import qfi_mixed_eig, qfi_pure_dense
from qsense.resources import ResourcePartition, TargetFunction, Zone, class_indices
from qsense.stabilizer import tableau_ghz


def _random_unitary(rng):
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _random_class_amps(p, w, rng):
    m = class_indices(p, w).size
    v = rng.normal(size=m) + 1j * rng.normal(size=m)
    return v / np.linalg.norm(v)


def test_privacy_measure_examples():
    a = np.array([1.0, 2.0, 3.0])
    for scale in (1e-3, 1.0, 7.0):
        rep = privacy_measure(scale * np.outer(a, a), a)
        assert abs(rep.privacy - 1) < 1e-12 and rep.is_private
    for k in (2, 3, 5):
        e1 = np.eye(k)[0]
        assert abs(privacy_measure(np.eye(k), e1).privacy - 1 / k) < 1e-15
    rep = privacy_measure(np.diag([1.0, 0.0]), (0, 1))
    assert rep.privacy == 0 and not rep.is_private


def test_privacy_report_fields():
    q = np.array([[4.0, 1.0], [1.0, 2.0]])
    rep = privacy_measure(q, (2, 4))
    assert rep.target.a_vec == (1, 2)
    np.testing.assert_allclose(rep.direction, np.array([1, 2]) / np.sqrt(5))
    assert abs(rep.trace - 6) < 1e-15
    np.testing.assert_allclose(rep.eigenvalues, sorted(np.linalg.eigvalsh(q), reverse=True))
    along = rep.direction @ q @ rep.direction
    assert abs(rep.q_along_a - along) < 1e-12
    assert abs(rep.residual - np.linalg.norm(q - along * np.outer(rep.direction, rep.direction))) < 1e-12
    rep = privacy_measure(q, [0.3, 0.7])
    assert rep.target is None


def test_zero_information_is_an_error():
    with pytest.raises(ZeroInformationError):
        privacy_measure(np.zeros((2, 2)), (1, 1))
    with pytest.raises(ZeroInformationError):
        verify_private(basis_state("00"), SeparableDynamics.z((1, 1)), (1, 1))
    with pytest.raises(ValueError):
        privacy_measure(np.eye(2), (0, 0))
    with pytest.raises(ValueError):
        privacy_measure(np.eye(2), (1, 1, 1))


def test_verify_private_examples():
    for a in [(1, 1), (1, 1, 1), (1, 2), (2, 1, 2)]:
        p = ResourcePartition(a)
        rep = verify_private(ghz(p), SeparableDynamics.z(p), a)
        assert rep.is_private and abs(rep.privacy - 1) < 1e-10
        assert rep.zone is Zone.II
    plus = StateVector(np.ones(4) / 2)
    rep = verify_private(plus, SeparableDynamics.z((1, 1)), (1, 1))
    assert abs(rep.privacy - 0.5) < 1e-12
    rep = verify_private(tableau_ghz(3), SeparableDynamics.z((1, 1, 1)), (1, 1, 1))
    assert rep.qfi.provenance == "stabilizer" and rep.is_private
    rep = verify_private(ghz(3).density(), SeparableDynamics.z((1, 1, 1)), (1, 1, 1))
    assert rep.qfi.provenance == "mixed-eig" and rep.is_private
    h = GeneralLocalHamiltonian.from_texts((1, 1), ["1 Z", "1 Z"])
    assert verify_private(ghz(2), h, (1, 1)).zone is None
    with pytest.raises(ValueError):
        verify_private(ghz(2), SeparableDynamics.z((1, 1)), (1, 1), ResourcePartition((2,)))


def test_zone_reported_for_separable():
    dyn = SeparableDynamics.z((2, 2, 5))
    spec = FamilySpec((2, 2, 5), (1, 2, 3), (0, 0, 0))
    assert verify_private(build_family_state(spec), dyn, (1, 2, 3)).zone is Zone.III
    assert verify_private(ghz(4), SeparableDynamics.z((2, 2)), (1, 1)).zone is Zone.IV


def test_enumerate_family_counts():
    assert len(enumerate_family_specs((2, 2, 5), (1, 2, 3))) == 6
    assert enumerate_family_specs((1, 1, 1), (1, 1, 1)) == [(0, 0, 0)]
    assert len(enumerate_family_specs((3, 3), (1, 1))) == 9
    ds = enumerate_family_specs((2, 1, 2), (1, 1, 1))
    assert sorted(ds) == sorted(itertools.product((0, 1), (0,), (0, 1)))
    with pytest.raises(ValueError):
        enumerate_family_specs((1, 1), (1, 2))


def test_family_spec_validation():
    with pytest.raises(ValueError):
        FamilySpec((2, 1), (1, 1), (1, 1))
    with pytest.raises(ValueError):
        FamilySpec((2, 1), (1, -1), (0, 0))
    with pytest.raises(ValueError):
        FamilySpec((2, 1), (1, 1), (0, 0), alpha=1.0, beta=0.0)
    with pytest.raises(ValueError):
        FamilySpec((2, 1), (1, 1), (0, 0), alpha=0.8, beta=0.8)
    with pytest.raises(ValueError):
        class_state(ResourcePartition((2,)), (1,), [1.0, 1.0])


def test_family_degenerate_is_ghz():
    s = build_family_state(FamilySpec((1, 1, 1), (1, 1, 1), (0, 0, 0)))
    np.testing.assert_allclose(s.amps, ghz(3).amps, atol=1e-15)


def test_family_with_concentrated_ancilla_is_ghz_times_zero():
    p = ResourcePartition((2, 1, 2))
    low = np.zeros(1)
    high_idx = class_indices(p, (1, 1, 1))
    # put the whole upper class on qubits 0, 2, 3 (first qubit of each node)
    target = (1 << 0) | (1 << 2) | (1 << 3)
    high = (high_idx == target).astype(complex)
    s = build_family_state(FamilySpec(p, (1, 1, 1), (0, 0, 0), low=low + 1, high=high))
    expect = np.zeros(32)
    expect[[0, target]] = 2 ** -0.5
    np.testing.assert_allclose(s.amps, expect, atol=1e-15)
    assert verify_private(s, SeparableDynamics.z(p), (1, 1, 1)).is_private


@pytest.mark.parametrize("seed", range(12))
def test_family_states_are_private(seed):
    rng = np.random.default_rng(seed)
    cases = [((2, 2, 5), (1, 2, 3)), ((2, 1, 2), (1, 1, 1)), ((3, 2), (1, 1)), ((2, 3), (1, 2))]
    n_vec, a = cases[seed % len(cases)]
    p = ResourcePartition(n_vec)
    dyn = SeparableDynamics.z(p)
    for d in enumerate_family_specs(p, a):
        al = rng.uniform(0.05, 0.95)
        alpha = np.sqrt(al) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        beta = np.sqrt(1 - al) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        upper = tuple(x + y for x, y in zip(a, d))
        f = FamilySpec(p, a, d, alpha, beta, _random_class_amps(p, d, rng), _random_class_amps(p, upper, rng))
        psi = build_family_state(f)
        rep = verify_private(psi, dyn, a)
        assert abs(rep.privacy - 1) < 1e-10 and rep.is_private
        expect = 4 * np.outer(a, a) * (1 - (abs(alpha) ** 2 - abs(beta) ** 2) ** 2)
        np.testing.assert_allclose(np.asarray(rep.qfi), expect, atol=1e-9)


def test_family_qfi_maximized_at_equal_weights():
    p = ResourcePartition((2, 1))
    dyn = SeparableDynamics.z(p)
    vals = []
    for al in np.linspace(0.05, 0.95, 19):
        f = FamilySpec(p, (1, 1), (1, 0), np.sqrt(al), np.sqrt(1 - al))
        vals.append(np.trace(np.asarray(qfi_pure_dense(build_family_state(f), dyn))))
    assert int(np.argmax(vals)) == 9
    assert abs(vals[9] - 4 * 2) < 1e-12


def test_mixtures_across_families_are_not_private():
    p = ResourcePartition((2, 1))
    dyn = SeparableDynamics.z(p)
    ds = enumerate_family_specs(p, (1, 1))
    assert ds == [(0, 0), (1, 0)]
    u, v = (build_family_state(FamilySpec(p, (1, 1), d)).amps for d in ds)
    for w in (0.1, 0.5, 0.9):
        # coherent superposition across the two families
        psi = StateVector.normalized(np.sqrt(w) * u + np.sqrt(1 - w) * v)
        assert verify_private(psi, dyn, (1, 1)).privacy < 1 - 1e-6
    # every member of each family stays private
    assert verify_private(StateVector(u), dyn, (1, 1)).is_private


def test_incoherent_family_mixture_stays_private():
    # disjoint supports under diagonal generators leave no cross terms
    p = ResourcePartition((2, 1))
    u, v = (build_family_state(FamilySpec(p, (1, 1), d)).amps for d in enumerate_family_specs(p, (1, 1)))
    rho = 0.3 * np.outer(u, u.conj()) + 0.7 * np.outer(v, v.conj())
    assert privacy_measure(qfi_mixed_eig(rho, SeparableDynamics.z(p)), (1, 1)).is_private


def test_mixtures_across_families_2_2_5():
    p = ResourcePartition((2, 2, 5))
    dyn = SeparableDynamics.z(p)
    states = [build_family_state(FamilySpec(p, (1, 2, 3), d)).amps for d in enumerate_family_specs(p, (1, 2, 3))]
    for i, j in itertools.combinations(range(len(states)), 2):
        psi = StateVector.normalized(states[i] + states[j])
        assert verify_private(psi, dyn, (1, 2, 3)).privacy < 1 - 1e-6


def test_logical_single_block_is_family():
    spec = LogicalSpec((1, 1), (LogicalBlock((2, 1), (1, 0)),), np.array([0.6, 0.8]))
    f = FamilySpec((2, 1), (1, 1), (1, 0), 0.6, 0.8)
    np.testing.assert_allclose(build_logical_state(spec).amps, build_family_state(f).amps, atol=1e-15)


def test_logical_two_ghz_blocks():
    a = (1, 1)
    spec = LogicalSpec(a, (LogicalBlock(a, (0, 0)), LogicalBlock(a, (0, 0))), np.array([1, 0, 0, 1]) / np.sqrt(2))
    p = logical_partition(spec)
    assert p.n_vec == (2, 2)
    psi = build_logical_state(spec)
    # |0000> + |1111> in either layout
    np.testing.assert_allclose(np.abs(psi.amps[[0, 15]]), [2 ** -0.5] * 2, atol=1e-15)
    rep = verify_private(psi, SeparableDynamics.z(p), a)
    assert rep.is_private
    np.testing.assert_allclose(np.asarray(rep.qfi), 4 * np.outer((2, 2), (2, 2)), atol=1e-10)


def test_logical_product_has_no_information():
    a = (1, 1)
    spec = LogicalSpec(a, (LogicalBlock(a, (0, 0)), LogicalBlock(a, (0, 0))), np.array([1, 0, 0, 0]))
    with pytest.raises(ZeroInformationError):
        verify_private(build_logical_state(spec), SeparableDynamics.z(logical_partition(spec)), a)


@pytest.mark.parametrize("seed", range(6))
def test_logical_states_are_private(seed):
    rng = np.random.default_rng(seed)
    a = (1, 1)
    blocks = [LogicalBlock((1, 1), (0, 0)), LogicalBlock((2, 1), (1, 0)), LogicalBlock((1, 2), (0, 1))]
    picks = [blocks[i] for i in rng.choice(3, size=2 if seed % 2 else 3)]
    picks = [LogicalBlock(b.n_vec, b.d,
                          _random_class_amps(ResourcePartition(b.n_vec), b.d, rng),
                          _random_class_amps(ResourcePartition(b.n_vec), tuple(x + y for x, y in zip(a, b.d)), rng))
             for b in picks]
    amps = rng.normal(size=1 << len(picks)) + 1j * rng.normal(size=1 << len(picks))
    spec = LogicalSpec(a, tuple(picks), amps / np.linalg.norm(amps))
    p = logical_partition(spec)
    rep = verify_private(build_logical_state(spec), SeparableDynamics.z(p), a)
    assert abs(rep.privacy - 1) < 1e-10 and rep.is_private


def test_logical_spec_validation():
    with pytest.raises(ValueError):
        LogicalSpec((1, 2), (LogicalBlock((1, 1), (0, 0)),), np.array([1, 0]))
    with pytest.raises(ValueError):
        LogicalSpec((1, 1), (LogicalBlock((1, 1), (0, 0)),), np.array([1, 1]))
    with pytest.raises(ValueError):
        LogicalSpec((1, 1), (LogicalBlock((1, 1), (0, 0)),), np.array([1, 0, 0, 0]))


def test_search_zone_ii_finds_ghz_orbit():
    dyn = SeparableDynamics.z((1, 1))
    res = search_max_privacy(dyn, (1, 1), restarts=20, budget=3000, seed=1)
    assert res.best_privacy >= 1 - 1e-6
    assert family_orbit_fidelity(res.state, (1, 1), (1, 1)) >= 1 - 1e-4


def test_search_zone_i_stays_below_one():
    res = search_max_privacy(SeparableDynamics.z((1, 1)), (1, 2), restarts=50, budget=3000, seed=2)
    assert res.best_privacy <= 1 - 1e-3
    assert res.best_privacy > 0.5


def test_search_single_parameter():
    res = search_max_privacy(SeparableDynamics.z((1,)), (1,), restarts=4, budget=500, seed=0)
    assert abs(res.best_privacy - 1) < 1e-12
    plus = verify_private(StateVector(np.ones(2) / np.sqrt(2)), SeparableDynamics.z((1,)), (1,))
    assert abs(plus.privacy - 1) < 1e-12


def test_search_zone_iii_and_iv_reach_one():
    for n_vec, a in [((2, 1), (1, 1)), ((2, 2), (1, 1))]:
        res = search_max_privacy(SeparableDynamics.z(n_vec), a, restarts=10, budget=4000, seed=3)
        assert res.best_privacy >= 1 - 1e-6


def test_search_deterministic_and_thread_independent(monkeypatch):
    dyn = SeparableDynamics.z((1, 1))
    monkeypatch.setenv("QSENSE_THREADS", "1")
    a = search_max_privacy(dyn, (1, 2), restarts=120, budget=400, seed=5)
    monkeypatch.setenv("QSENSE_THREADS", "3")
    b = search_max_privacy(dyn, (1, 2), restarts=120, budget=400, seed=5)
    np.testing.assert_array_equal(a.restart_best, b.restart_best)
    np.testing.assert_array_equal(a.state.amps, b.state.amps)
    c = search_max_privacy(dyn, (1, 2), restarts=120, budget=400, seed=6)
    assert not np.array_equal(a.restart_best, c.restart_best)


def test_search_budget_exhaustion_is_flagged():
    res = search_max_privacy(SeparableDynamics.z((1, 2)), (1, 2), restarts=3, budget=20, seed=0)
    assert not res.converged
    assert res.evaluations <= 3 * 20


def test_search_limits():
    with pytest.raises(ValueError):
        search_max_privacy(SeparableDynamics.z((4, 3)), (1, 1))
    with pytest.raises(ValueError):
        search_max_privacy(SeparableDynamics.z((1, 1)), (1, 1, 1))


def test_search_objective_matches_privacy_measure():
    # the best value reported is the privacy of the returned state
    rng = np.random.default_rng(0)
    dyn = SeparableDynamics.random((1, 2), rng)
    res = search_max_privacy(dyn, (1, 1), restarts=5, budget=600, seed=0)
    rep = verify_private(res.state, dyn, (1, 1))
    assert abs(rep.privacy - res.best_privacy) < 1e-9


def test_orbit_fidelity_of_locally_rotated_family():
    rng = np.random.default_rng(11)
    p = ResourcePartition((2, 1))
    psi = build_family_state(FamilySpec(p, (1, 1), (1, 0), 0.6, 0.8))
    v = psi.amps
    for q in range(3):
        v = apply_local(v, _random_unitary(rng), [q], 3)
    assert family_orbit_fidelity(v, p, (1, 1), restarts=16) >= 1 - 1e-4
    # a generic state is far from every family orbit
    assert family_orbit_fidelity(random_state(3, rng), p, (1, 1), restarts=4) < 1 - 1e-2


def _cube():
    return GeneralLocalHamiltonian.from_texts((1, 1, 1), ["1 Z"] * 3)


def test_general_existence_cube():
    h = _cube()
    o = build_orthotope(h)
    checked = 0
    for a in itertools.product(range(-2, 3), repeat=3):
        if not any(a):
            continue
        w = target_in_O2minus(a, o)
        # differences of cube vertices are 2u with u in {-1, 0, 1}^3
        m = max(abs(x) for x in a)
        parallel = all(abs(x) in (0, m) for x in a)
        assert (w is not None) == parallel
        if w is None:
            continue
        checked += 1
        psi = eigenstate_superposition(h, w)
        rep = privacy_measure(qfi_pure_dense(psi, h), a)
        assert abs(rep.privacy - 1) < 1e-9 and rep.is_private
    assert checked == 52


def test_general_existence_noncommuting_terms():
    h = GeneralLocalHamiltonian.from_texts((2, 1), ["1 XX\n0.5 ZI", "1 Z\n0.3 X"])
    o = build_orthotope(h)
    rng = np.random.default_rng(0)
    hits = 0
    for i, j in itertools.combinations(range(len(o.points)), 2):
        d = o.points[i] - o.points[j]
        w = target_in_O2minus(d, o)
        assert w is not None
        psi = eigenstate_superposition(h, w)
        rep = privacy_measure(qfi_pure_dense(psi, h), d)
        assert abs(rep.privacy - 1) < 1e-9
        hits += 1
    assert hits > 0


def test_general_outside_o2minus_stays_below_one():
    h = GeneralLocalHamiltonian.from_texts((1, 1), ["1 Z\n0.7 X", "1 Z"])
    assert target_in_O2minus((1, 1), build_orthotope(h)) is None
    res = search_max_privacy(h, (1, 1), restarts=30, budget=3000, seed=4)
    assert res.best_privacy <= 1 - 1e-3
    cube = _cube()
    assert target_in_O2minus((1, 2, 0), build_orthotope(cube)) is None
    res = search_max_privacy(cube, (1, 2, 0), restarts=30, budget=3000, seed=4)
    assert res.best_privacy <= 1 - 1e-3


def test_information_concentration_cube():
    h = _cube()
    a = np.array([1.0, 1.0, 1.0])
    ahat = a / np.linalg.norm(a)
    w = target_in_O2minus(a, build_orthotope(h))
    private = eigenstate_superposition(h, w)
    best_private = ahat @ np.asarray(qfi_pure_dense(private, h)) @ ahat
    rng = np.random.default_rng(0)
    best_random = max(ahat @ np.asarray(qfi_pure_dense(random_state(3, rng), h)) @ ahat for _ in range(500))
    assert best_random <= best_private + 1e-6
    assert abs(best_private - 12) < 1e-12


def test_measure_properties_pass():
    rep = check_measure_properties(samples=200, seed=0)
    assert rep.passed
    assert rep.max_orthogonal_deviation <= 1e-10
    assert rep.worst_continuity_slack >= 0


def test_measure_identity_basis_change_exact():
    rng = np.random.default_rng(1)
    m = rng.normal(size=(3, 3))
    q = m @ m.T
    a = rng.normal(size=3)
    assert privacy_measure(np.eye(3) @ q @ np.eye(3), a).privacy == privacy_measure(q, a).privacy


def test_mixed_private_states():
    # a classical mixture within one family keeps privacy
    p = ResourcePartition((1, 1))
    dyn = SeparableDynamics.z(p)
    g = ghz(p).amps
    gm = g * np.array([1, 1, 1, -1])
    rho = 0.8 * np.outer(g, g) + 0.2 * np.outer(gm, gm)
    q = qfi_mixed_eig(rho, dyn)
    rep = privacy_measure(q, (1, 1))
    assert rep.is_private
    np.testing.assert_allclose(np.asarray(q), 4 * 0.6 ** 2 * np.ones((2, 2)), atol=1e-12)
