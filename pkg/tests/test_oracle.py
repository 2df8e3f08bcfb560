from __future__ import annotations

import numpy as np
import pytest

from nzne.circuits import build_random_brickwork, build_tfim, build_xym
from nzne.noise import noise_model
from nzne.oracle import (
    dense_expectation,
    evolve_density,
    evolve_statevector,
    initial_statevector,
    presample_kraus,
    run_presampled,
    trajectory_mean,
)

# values computed once with the dense simulators below and frozen
FROZEN = {
    ("tfim_2x3_4", "depolarizing", 0.01, "ZZ_0_1"): 0.392154063348521,
    ("tfim_2x3_4", "depolarizing", 0.01, "energy_per_site"): 1.1988489235316102,
    ("xym_8_6", "matchgate_depolarizing", 0.02, "YX_3_4"): -0.36088449696897434,
    ("xym_8_6", "matchgate_depolarizing", 0.02, "Z_3"): 0.029820168862269913,
    ("tfim_2x2_3_cat", "cat", 0.01, "ZZ_0_1"): 0.08239586729045144,
}

CIRCUITS = {
    "tfim_2x3_4": lambda: build_tfim(2, 3, steps=4),
    "xym_8_6": lambda: build_xym(8, steps=6),
    "tfim_2x2_3_cat": lambda: build_tfim(2, 2, steps=3, gate_set="cat"),
}


def _full_operator(op, targets, n):
    """Embed ``op`` on ``targets`` into the full 2^n space by brute-force indexing."""
    d = 2**n
    k = len(targets)
    out = np.zeros((d, d), dtype=complex)
    for col in range(d):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        sub_in = sum(bits[t] << (k - 1 - i) for i, t in enumerate(targets))
        for sub_out in range(2**k):
            amp = op[sub_out, sub_in]
            if amp == 0:
                continue
            new = list(bits)
            for i, t in enumerate(targets):
                new[t] = (sub_out >> (k - 1 - i)) & 1
            row = sum(b << (n - 1 - q) for q, b in enumerate(new))
            out[row, col] += amp
    return out


def _naive_density(circuit, noise, lam):
    model = noise_model(noise)
    n = circuit.n_qubits
    psi = initial_statevector(circuit.initial_bits)
    rho = np.outer(psi, psi.conj())
    for g in circuit.gates():
        u = _full_operator(g.matrix, g.targets, n)
        rho = u @ rho @ u.conj().T
        ch = model.channel(g.gate_class, g.arity, lam)
        if ch is not None:
            ks = [_full_operator(k, g.targets, n) for k in ch.kraus_ops]
            rho = sum(k @ rho @ k.conj().T for k in ks)
    return rho


@pytest.mark.parametrize("key", sorted(FROZEN))
def test_frozen_dense_values(key):
    name, noise, lam, obs = key
    c = CIRCUITS[name]()
    s = evolve_density(c, noise, lam)
    assert dense_expectation(s, c.observables[obs]) == pytest.approx(FROZEN[key], abs=1e-12)


@pytest.mark.parametrize("name,noise,lam", [("xym_8_6", "matchgate_depolarizing", 0.05), ("tfim_2x2_3_cat", "cat", 0.02)])
def test_density_matches_naive_kraus_sum(name, noise, lam):
    c = CIRCUITS[name]()
    if c.n_qubits > 6:
        c = build_xym(5, steps=3)
    fast = evolve_density(c, noise, lam).data
    np.testing.assert_allclose(fast, _naive_density(c, noise, lam), atol=1e-12)


def test_reversed_targets_in_density_oracle():
    from nzne.circuits import CX, Circuit, Gate

    c = Circuit(3, [[Gate(CX, (1, 0), "cx"), Gate(CX, (2, 1), "cx")]], (1, 0, 1))
    for noise in ("cat", "depolarizing"):
        np.testing.assert_allclose(evolve_density(c, noise, 0.03).data, _naive_density(c, noise, 0.03), atol=1e-12)


def test_noiseless_density_is_pure_projector():
    c = build_random_brickwork(5, 4, seed=2)
    psi = evolve_statevector(c).data
    rho = evolve_density(c, "depolarizing", 0.0).data
    np.testing.assert_allclose(rho, np.outer(psi, psi.conj()), atol=1e-12)


def test_size_caps():
    with pytest.raises(ValueError):
        evolve_density(build_xym(14, steps=1), "depolarizing", 0.01)


def test_presampled_identity_choices_give_noiseless_state():
    c = build_xym(6, steps=2)
    choices = [0] * c.count()
    a = run_presampled(c, "matchgate_depolarizing", 0.1, choices).data
    np.testing.assert_allclose(a, evolve_statevector(c).data, atol=1e-12)


def test_trajectory_average_converges_to_density(rng):
    c = build_xym(6, steps=4)
    lam = 0.05
    exact = evolve_density(c, "matchgate_depolarizing", lam)
    obs = {k: c.observables[k] for k in ("Z_2", "XY_2_3")}
    res = trajectory_mean(c, "matchgate_depolarizing", lam, 400, seed=5, observables=obs)
    for name, (mean, sem) in res.items():
        assert abs(mean - dense_expectation(exact, obs[name])) < 4 * sem + 1e-9


def test_trajectory_mean_is_reproducible():
    c = build_tfim(2, 2, steps=2)
    obs = {"ZZ_0_1": c.observables["ZZ_0_1"]}
    a = trajectory_mean(c, "depolarizing", 0.05, 30, seed=9, observables=obs)
    b = trajectory_mean(c, "depolarizing", 0.05, 30, seed=9, observables=obs)
    assert a == b


def test_presample_rejects_state_dependent_channels():
    from nzne.noise import Channel, NoiseModel

    amp = Channel(2, (np.diag([1, 1, 1, np.sqrt(0.5)]), np.sqrt(0.5) * np.outer([0, 0, 1, 0], [0, 0, 0, 1])))
    model = NoiseModel("amp", lambda cls, arity: (lambda lam: amp) if arity == 2 else None)
    with pytest.raises(ValueError):
        presample_kraus(build_xym(4, steps=1), model, 0.1, np.random.default_rng(0))
