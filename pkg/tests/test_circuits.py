from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg

from nzne.circuits import (
    FSWAP,
    Circuit,
    Gate,
    build_fhm,
    build_random_brickwork,
    build_tfim,
    build_xym,
    fhm_afm_bits,
    fhm_bonds,
    hopping,
    onsite,
    rzz,
    tfim_bonds,
    xy_rotation,
)
from nzne.oracle import dense_expectation, evolve_statevector, initial_statevector
from nzne.paulis import PauliString


def test_gate_matrices():
    zz = np.diag([1, -1, -1, 1])
    np.testing.assert_allclose(rzz(0.3), scipy.linalg.expm(-0.15j * zz))
    xx = np.kron([[0, 1], [1, 0]], [[0, 1], [1, 0]])
    yy = np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]])
    np.testing.assert_allclose(xy_rotation(0.4), scipy.linalg.expm(-0.2j * (xx + yy)), atol=1e-14)
    np.testing.assert_allclose(hopping(0.4), xy_rotation(0.4))
    np.testing.assert_allclose(onsite(0.5), np.diag([1, 1, 1, np.exp(-0.5j)]))


def test_gate_rejects_non_unitary():
    with pytest.raises(ValueError):
        Gate(np.ones((2, 2)), (0,), "bad")


def test_reversed_gate_ordering():
    g = Gate(np.kron(np.diag([1, -1]), np.eye(2)).astype(complex), (3, 2), "z_on_first")
    site, op = g.ordered()
    assert site == 2
    np.testing.assert_allclose(op, np.kron(np.eye(2), np.diag([1, -1])))


def test_tfim_bonds_two_wide_dedupe():
    bonds = tfim_bonds(2, 7)
    assert len(bonds) == 21
    assert len(set(bonds)) == 21
    assert (0, 7) in bonds and (0, 6) in bonds


def test_tfim_gate_counts_and_locality():
    c = build_tfim(2, 7)
    assert c.is_nearest_neighbour()
    assert c.n_steps == 10
    assert sum(1 for g in c.gates() if g.gate_class == "zz") == 210
    assert c.count(2) == 549


def test_tfim_routing_preserves_physics():
    # commuting ZZ terms: greedy and restoring routers give the same state
    a = build_tfim(2, 3, steps=3)
    b = build_tfim(2, 3, steps=3, routing="restore")
    sa, sb = evolve_statevector(a), evolve_statevector(b)
    for name in a.observables:
        assert dense_expectation(sa, a.observables[name]) == pytest.approx(dense_expectation(sb, b.observables[name]), abs=1e-12)


def test_tfim_energy_near_conserved_for_small_step():
    c = build_tfim(2, 3, dt=0.01, steps=5)
    s = evolve_statevector(c)
    # |0...0> has E = J * bonds / n
    assert dense_expectation(s, c.observables["energy_per_site"]) == pytest.approx(len(tfim_bonds(2, 3)) / 6, abs=1e-3)


def test_cat_compilation_uses_native_gates():
    c = build_tfim(2, 2, steps=2, gate_set="cat")
    assert {g.gate_class for g in c.gates()} <= {"rz", "h", "cx"}
    ref = build_tfim(2, 2, steps=2)
    s, r = evolve_statevector(c), evolve_statevector(ref)
    assert abs(np.vdot(s.data, r.data)) == pytest.approx(1.0, abs=1e-12)


def test_xym_gate_count():
    c = build_xym(60)
    assert c.count(2) == 1770
    assert c.initial_bits[:4] == (1, 0, 1, 0)


def test_xym_conserves_magnetization():
    c = build_xym(8, steps=5)
    s = evolve_statevector(c)
    total = sum(dense_expectation(s, c.observables[f"Z_{k}"]) for k in range(8))
    assert total == pytest.approx(0.0, abs=1e-12)


def test_fhm_bonds_row_major():
    h, v = fhm_bonds(2, 4)
    assert h == [(0, 1), (2, 3), (4, 5), (6, 7)]
    assert (0, 2) in v and len(v) == 6


def test_fhm_afm_state_half_filled():
    bits = fhm_afm_bits(2, 4)
    assert sum(bits) == 8
    assert bits[0:2] != bits[2:4]


def test_fhm_conserves_particle_number_and_filling():
    c = build_fhm(2, 2, steps=2)
    assert c.is_nearest_neighbour()
    assert any(np.allclose(g.matrix, FSWAP) for g in c.gates())
    s = evolve_statevector(c)
    fill = [dense_expectation(s, c.observables[f"filling_{k}"]) for k in range(4)]
    assert sum(fill) == pytest.approx(4.0, abs=1e-12)


def test_fhm_matches_dense_hamiltonian_evolution_for_small_step():
    from nzne.circuits import fhm_hamiltonian

    dt, steps = 0.02, 5
    c = build_fhm(2, 1, dt=dt, steps=steps)
    h = sum(coef * p.dense(4) for coef, p in fhm_hamiltonian(2, 1, 1.0, 8.0).terms)
    psi = scipy.linalg.expm(-1j * h * dt * steps) @ initial_statevector(c.initial_bits)
    s = evolve_statevector(c)
    layout = c.metadata["layout"]
    # number operators only: relabelling a Jordan-Wigner string is not a fermionic identity
    for name in ("n_0_up", "n_0_down", "n_1_up", "n_1_down"):
        obs = c.observables[name]
        inv = {p: m for m, p in enumerate(layout)}
        ref = obs.relabel([inv[q] for q in range(4)])
        want = sum(coef * np.vdot(psi, p.dense(4) @ psi).real for coef, p in ref.terms)
        assert dense_expectation(s, obs) == pytest.approx(want, abs=5e-3)


def test_random_brickwork_is_seeded():
    a, b = build_random_brickwork(6, 4, seed=3), build_random_brickwork(6, 4, seed=3)
    assert all(np.array_equal(x.matrix, y.matrix) for x, y in zip(a.gates(), b.gates()))


def test_circuit_json_roundtrip(tmp_path):
    c = build_tfim(2, 2, steps=2)
    c.dump(tmp_path / "c.json")
    d = Circuit.load(tmp_path / "c.json")
    assert d.count() == c.count()
    assert all(np.allclose(x.matrix, y.matrix) and x.targets == y.targets for x, y in zip(c.gates(), d.gates()))
    assert set(d.observables) == set(c.observables)


def test_circuit_validation():
    with pytest.raises(ValueError):
        Circuit(2, [[Gate(np.eye(4, dtype=complex), (1, 2), "x")]], (0, 0))
    with pytest.raises(ValueError):
        Circuit(2, [], (0, 0))
    with pytest.raises(ValueError):
        build_tfim(2, 2, gate_set="ibm")


def _fhm_energy(dt: float, steps: int) -> tuple[float, float]:
    c = build_fhm(2, 2, dt=dt, steps=steps)
    s = evolve_statevector(c)
    layout = c.metadata["layout"]
    kinetic = -sum(dense_expectation(s, o) for name, o in c.observables.items() if name.startswith("hop_"))
    double = 0.0
    for site in range(4):
        u, d = layout[2 * site], layout[2 * site + 1]
        zu, zd, zz = (dense_expectation(s, p) for p in (f"Z{u}", f"Z{d}", PauliString.parse(f"Z{u} Z{d}")))
        double += (1 - zu - zd + zz) / 4
    return kinetic, kinetic + 8.0 * double


def test_fhm_energy_drift_is_first_order_in_dt():
    # hop observables carry the Jordan-Wigner strings of the final layout;
    # the AFM start has zero energy, so the drift is pure Trotter error
    kin, e1 = _fhm_energy(0.01, 10)
    _, e2 = _fhm_energy(0.005, 20)
    assert abs(kin) > 0.1
    assert e2 / e1 == pytest.approx(0.5, abs=0.02)
