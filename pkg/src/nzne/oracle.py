"""Dense reference simulators: exact density matrices and statevector trajectories.

Qubit 0 is the most significant bit of a basis index, matching
:meth:`PauliString.dense`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._stats import RunningStats
from .circuits import Circuit, Gate
from .noise import Channel, NoiseModel, noise_model, to_superoperator
from .paulis import PAULI, Observable, PauliString
from .tn_state import TnState, vectorize

__all__ = [
    "DenseState",
    "DENSITY_CAP",
    "STATEVECTOR_CAP",
    "initial_statevector",
    "evolve_statevector",
    "evolve_density",
    "dense_expectation",
    "true_fidelity",
    "sample_trajectory",
    "presample_kraus",
    "run_presampled",
    "trajectory_mean",
]

DENSITY_CAP = 12
STATEVECTOR_CAP = 26


@dataclass
class DenseState:
    """Statevector (``mode="statevector"``) or density matrix (``mode="density_matrix"``)."""

    mode: str
    n_qubits: int
    data: np.ndarray

    def __post_init__(self):
        if self.mode not in ("statevector", "density_matrix"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def density_matrix(self) -> np.ndarray:
        if self.mode == "density_matrix":
            return self.data
        return np.outer(self.data, self.data.conj())


def _resolve_noise(noise) -> NoiseModel:
    return noise_model(noise) if isinstance(noise, str) else noise


def _check_cap(n: int, cap: int, what: str) -> None:
    if n > cap:
        raise ValueError(f"{n} qubits exceed the {what} cap of {cap}")


def initial_statevector(bits) -> np.ndarray:
    n = len(bits)
    psi = np.zeros(2**n, dtype=complex)
    psi[int("".join(str(b) for b in bits), 2) if n else 0] = 1.0
    return psi


def _apply_to_axes(t: np.ndarray, op: np.ndarray, axes: list[int]) -> np.ndarray:
    """Apply ``op`` (``2^k x 2^k``) to the given qubit axes of tensor ``t``."""
    k = len(axes)
    opt = op.reshape((2,) * (2 * k))
    out = np.tensordot(opt, t, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def _apply_sv(psi: np.ndarray, op: np.ndarray, targets, n: int) -> np.ndarray:
    t = psi.reshape((2,) * n)
    return _apply_to_axes(t, op, list(targets)).reshape(-1)


def _apply_superop(rho_t: np.ndarray, sup: np.ndarray, targets, n: int) -> np.ndarray:
    # superoperator index is (i_a j_a)(i_b j_b); bra axes of rho sit at offset n
    axes = []
    for q in targets:
        axes += [q, n + q]
    return _apply_to_axes(rho_t, sup, axes)


def _gate_channel(gate: Gate, model: NoiseModel, lam: float) -> Channel:
    """The gate followed by its noise, as one channel in the gate's target order."""
    ch = model.channel(gate.gate_class, gate.arity, lam)
    if ch is None:
        return Channel(gate.arity, (gate.matrix,), gate.gate_class)
    return Channel(gate.arity, tuple(k @ gate.matrix for k in ch.kraus_ops), gate.gate_class)


def evolve_statevector(circuit: Circuit, max_qubits: int = STATEVECTOR_CAP) -> DenseState:
    """Noiseless statevector evolution."""
    n = circuit.n_qubits
    _check_cap(n, max_qubits, "statevector")
    psi = initial_statevector(circuit.initial_bits)
    for g in circuit.gates():
        psi = _apply_sv(psi, g.matrix, g.targets, n)
    return DenseState("statevector", n, psi)


def evolve_density(circuit: Circuit, noise, lam: float, max_qubits: int = DENSITY_CAP) -> DenseState:
    """Exact density-matrix evolution with each gate post-composed with its channel."""
    n = circuit.n_qubits
    _check_cap(n, max_qubits, "density matrix")
    model = _resolve_noise(noise)
    psi = initial_statevector(circuit.initial_bits)
    rho = np.outer(psi, psi.conj()).reshape((2,) * (2 * n))
    cache: dict[int, np.ndarray] = {}
    for g in circuit.gates():
        key = id(g)
        if key not in cache:
            cache[key] = to_superoperator(_gate_channel(g, model, lam))
        rho = _apply_superop(rho, cache[key], g.targets, n)
    return DenseState("density_matrix", n, rho.reshape(2**n, 2**n))


def _pauli_on_state(t: np.ndarray, pauli: PauliString) -> np.ndarray:
    for site, label in pauli.ops:
        t = _apply_to_axes(t, PAULI[label], [site])
    return t


def dense_expectation(state: DenseState, obs: PauliString | Observable | str) -> float:
    """``<O>`` for a dense state (density matrices are divided by their trace)."""
    if isinstance(obs, str):
        obs = PauliString.parse(obs)
    if isinstance(obs, PauliString):
        obs = Observable.single(obs)
    n = state.n_qubits
    if obs.max_site() >= n:
        raise ValueError("observable acts outside the register")

    if state.mode == "statevector":
        psi = state.data.reshape((2,) * n)
        norm = float(np.vdot(psi, psi).real)

        def value(p: PauliString) -> float:
            return float(np.vdot(psi, _pauli_on_state(psi, p)).real) / norm

    else:
        rho = state.data.reshape((2,) * (2 * n))
        tr = float(np.trace(state.data).real)

        def value(p: PauliString) -> float:
            out = _pauli_on_state(rho, p).reshape(2**n, 2**n)
            return float(np.trace(out).real) / tr

    return obs.evaluate(value)


def true_fidelity(approx: TnState, exact: DenseState) -> float:
    """Normalized Frobenius overlap ``|<<a|b>>|^2 / (||a||^2 ||b||^2)``."""
    if approx.n_sites != exact.n_qubits:
        raise ValueError("qubit counts differ")
    if exact.mode != "density_matrix" or approx.phys_dim != 4:
        raise ValueError("true fidelity compares a VMPO with a density matrix")
    _check_cap(exact.n_qubits, DENSITY_CAP, "density matrix")
    a = approx.to_dense()
    b = vectorize(exact.data)
    overlap = np.vdot(a, b)
    return float(abs(overlap) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real))


# -- trajectories --------------------------------------------------------------


def _noisy_channels(circuit: Circuit, model: NoiseModel, lam: float) -> list[Channel | None]:
    return [model.channel(g.gate_class, g.arity, lam) for g in circuit.gates()]


def sample_trajectory(circuit: Circuit, noise, lam: float, seed) -> DenseState:
    """One Kraus-unravelled statevector trajectory.

    After every gate one Kraus operator of its channel is drawn with
    probability ``||K_i psi||^2`` and applied with renormalization. When all
    Kraus operators are scaled unitaries the probabilities are constants and
    no norms are evaluated.
    """
    n = circuit.n_qubits
    _check_cap(n, STATEVECTOR_CAP, "statevector")
    model = _resolve_noise(noise)
    rng = np.random.default_rng(seed)
    psi = initial_statevector(circuit.initial_bits)
    mixtures: dict[str, tuple] = {}
    for g, ch in zip(circuit.gates(), _noisy_channels(circuit, model, lam)):
        psi = _apply_sv(psi, g.matrix, g.targets, n)
        if ch is None:
            continue
        if ch.label not in mixtures:
            mixtures[ch.label] = ch.unitary_mixture()
        mix = mixtures[ch.label]
        if mix is not None:
            probs, unitaries = mix
            i = rng.choice(len(probs), p=probs / probs.sum())
            psi = _apply_sv(psi, unitaries[i], g.targets, n)
        else:
            branches = [_apply_sv(psi, k, g.targets, n) for k in ch.kraus_ops]
            weights = np.array([np.vdot(b, b).real for b in branches])
            i = rng.choice(len(branches), p=weights / weights.sum())
            psi = branches[i] / np.sqrt(weights[i])
    return DenseState("statevector", n, psi)


def presample_kraus(circuit: Circuit, noise, lam: float, rng) -> list[int]:
    """Draw the Kraus index for every gate of a unitary-mixture noise model.

    Noiseless gates get index 0. Raises ``ValueError`` for channels whose
    branch probabilities depend on the state.
    """
    model = _resolve_noise(noise)
    out = []
    for ch in _noisy_channels(circuit, model, lam):
        if ch is None:
            out.append(0)
            continue
        mix = ch.unitary_mixture()
        if mix is None:
            raise ValueError(f"channel {ch.label} is not a mixture of unitaries")
        probs = mix[0]
        out.append(int(rng.choice(len(probs), p=probs / probs.sum())))
    return out


def run_presampled(circuit: Circuit, noise, lam: float, choices: list[int]) -> DenseState:
    """Statevector evolution with the given Kraus index after each gate."""
    n = circuit.n_qubits
    model = _resolve_noise(noise)
    psi = initial_statevector(circuit.initial_bits)
    for g, ch, i in zip(circuit.gates(), _noisy_channels(circuit, model, lam), choices, strict=True):
        psi = _apply_sv(psi, g.matrix, g.targets, n)
        if ch is not None:
            _, unitaries = ch.unitary_mixture()
            psi = _apply_sv(psi, unitaries[i], g.targets, n)
    return DenseState("statevector", n, psi)


def trajectory_mean(
    circuit: Circuit, noise, lam: float, n_samples: int, seed: int = 0, observables: dict | None = None
) -> dict[str, tuple[float, float]]:
    """Mean and standard error of each observable over statevector trajectories.

    Trajectory ``k`` uses the seed sequence ``(seed, k)``, so results do not
    depend on how samples are batched.
    """
    obs = circuit.observables if observables is None else observables
    names = list(obs)
    stats = RunningStats()
    for k in range(n_samples):
        state = sample_trajectory(circuit, noise, lam, np.random.SeedSequence([seed, k]))
        stats.push([dense_expectation(state, obs[name]) for name in names])
    mean = np.atleast_1d(stats.mean)
    sem = np.atleast_1d(stats.sem)
    return {name: (float(mean[i]), float(sem[i])) for i, name in enumerate(names)}
