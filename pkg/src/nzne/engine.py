"""Noisy circuit emulation on matrix-product states with fidelity bookkeeping.

For ``lam > 0`` the circuit acts on a VMPO: every gate and its noise channel
are merged into one superoperator applied to neighbouring sites, followed by
a truncated SVD to bond dimension ``D``. For ``lam == 0`` a pure MPS is
evolved the same way. The kept weights of all truncations within a
subcircuit multiply into its partial fidelity ``f_l``; the emulation fidelity
is the product of the ``f_l``.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .circuits import SWAP, Circuit, Gate
from .noise import Channel, NoiseModel, noise_model, to_superoperator
from .paulis import Observable
from .tn_state import TnState, expectation, max_entropy, mpo_entanglement_entropy, product_density, product_pure

__all__ = ["EmulationRecord", "run_emulation", "fidelity_scan", "emulate_state", "record_key", "circuit_digest", "RECORD_SCHEMA"]

RECORD_SCHEMA = "nzne-record/1"
SVD_FLOOR = 1e-14


@dataclass
class EmulationRecord:
    """Result of one ``(lam, D)`` emulation.

    ``values`` maps observable names to expectation values; ``entropy_trace``
    holds the largest MPO entropy over bonds after each subcircuit when
    requested. ``error`` is set instead of results when the run failed.
    """

    lam: float
    max_bond: int
    noise: str
    mode: str
    values: dict[str, float] = field(default_factory=dict)
    partial_fidelities: list[float] = field(default_factory=list)
    emulation_fidelity: float = float("nan")
    entropy_trace: list[float] | None = None
    wall_time: float = 0.0
    error: str | None = None
    schema: str = RECORD_SCHEMA
    key: str = ""

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def log_fidelity(self) -> float:
        return float(np.sum(np.log(self.partial_fidelities)))

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> EmulationRecord:
        return cls(**d)


def circuit_digest(circuit: Circuit) -> str:
    """Hash of the gate sequence, subcircuit boundaries and initial state."""
    h = hashlib.sha256(bytes(circuit.initial_bits))
    for sub in circuit.subcircuits:
        h.update(b"|")
        for g in sub:
            h.update(f"{g.gate_class}{g.targets}".encode())
            h.update(np.ascontiguousarray(g.matrix, dtype=complex).tobytes())
    return h.hexdigest()


def record_key(circuit: Circuit, noise: str, lam: float, max_bond: int) -> str:
    """Content hash identifying one grid point of one circuit."""
    payload = json.dumps([circuit_digest(circuit), noise, float(lam), int(max_bond)])
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _resolve_noise(noise) -> NoiseModel:
    return noise_model(noise) if isinstance(noise, str) else noise


def _swap_superoperator() -> np.ndarray:
    return to_superoperator(Channel(2, (SWAP,)))


_SWAP_SUP = _swap_superoperator()


def _local_operator(gate: Gate, model: NoiseModel, lam: float, density: bool) -> tuple[int, np.ndarray]:
    """Leftmost site and the operator to apply there, in increasing chain order."""
    if not density:
        return gate.ordered()
    ch = model.channel(gate.gate_class, gate.arity, lam)
    kraus = (gate.matrix,) if ch is None else tuple(k @ gate.matrix for k in ch.kraus_ops)
    sup = to_superoperator(Channel(gate.arity, kraus))
    if gate.arity == 2 and gate.targets[0] > gate.targets[1]:
        return gate.targets[1], _SWAP_SUP @ sup @ _SWAP_SUP
    return gate.targets[0], sup


def _is_unitary(op: np.ndarray) -> bool:
    return bool(np.allclose(op.conj().T @ op, np.eye(op.shape[0]), atol=1e-13))


def emulate_state(
    circuit: Circuit,
    noise,
    lam: float,
    max_bond: int,
    track_entropy: bool = False,
    pure_when_noiseless: bool = True,
) -> tuple[TnState, list[float], list[float] | None]:
    """Evolve the initial product state through ``circuit``.

    Returns:
        The final state, the partial fidelities and (optionally) the largest
        bond entropy after each subcircuit.
    """
    model = _resolve_noise(noise)
    if max_bond < 1:
        raise ValueError("bond dimension must be at least 1")
    if not circuit.is_nearest_neighbour():
        raise ValueError("every two-qubit gate must act on neighbouring chain positions")
    lam = float(lam)
    if not 0.0 <= lam <= max(model.max_lam, 0.0):
        raise ValueError(f"noise strength {lam} unsupported by {model.family}")
    density = lam > 0 or not pure_when_noiseless
    state = product_density(circuit.initial_bits) if density else product_pure(circuit.initial_bits)
    cache: dict[int, tuple[int, np.ndarray, bool]] = {}
    fidelities: list[float] = []
    entropies: list[float] | None = [] if track_entropy else None
    for sub in circuit.subcircuits:
        kept = 1.0
        for g in sub:
            if id(g) not in cache:
                site, op = _local_operator(g, model, lam, density)
                cache[id(g)] = site, op, _is_unitary(op)
            site, op, unitary = cache[id(g)]
            if g.arity == 1:
                state.apply_one_site(op, site, unitary=unitary)
            else:
                kept *= state.apply_two_site(op, site, max_bond, SVD_FLOOR)
            if not np.isfinite(state.log_scale):
                raise FloatingPointError("state norm is no longer finite")
        state.normalize()
        fidelities.append(kept)
        state.log_fidelity += float(np.log(kept))
        if entropies is not None:
            entropies.append(max_entropy(state))
    return state, fidelities, entropies


def run_emulation(
    circuit: Circuit,
    noise,
    lam: float,
    max_bond: int,
    observables: dict[str, Observable] | None = None,
    track_entropy: bool = False,
) -> EmulationRecord:
    """Emulate ``circuit`` under ``noise`` at strength ``lam`` with bond cap ``max_bond``."""
    model = _resolve_noise(noise)
    obs = circuit.observables if observables is None else observables
    t0 = time.perf_counter()
    state, fids, ent = emulate_state(circuit, model, lam, max_bond, track_entropy)
    values = {name: expectation(state, o) for name, o in obs.items()}
    return EmulationRecord(
        lam=float(lam),
        max_bond=int(max_bond),
        noise=model.family,
        mode="pure" if state.phys_dim == 2 else "density",
        values=values,
        partial_fidelities=[float(f) for f in fids],
        emulation_fidelity=float(np.exp(np.sum(np.log(fids)))),
        entropy_trace=ent,
        wall_time=time.perf_counter() - t0,
        key=record_key(circuit, model.family, lam, max_bond),
    )


def fidelity_scan(
    circuit: Circuit, noise, lams, max_bond: int, observables: dict | None = None
) -> list[EmulationRecord]:
    """One emulation per ``lam``; failures are recorded per point, results sorted by ``lam``."""
    lams = sorted(float(x) for x in lams)
    if not lams:
        raise ValueError("empty noise-strength grid")
    model = _resolve_noise(noise)
    out = []
    for lam in lams:
        try:
            out.append(run_emulation(circuit, model, lam, max_bond, observables))
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            out.append(EmulationRecord(lam, max_bond, model.family, "failed", error=f"{type(exc).__name__}: {exc}"))
    return out


def mid_bond_entropy_trace(circuit: Circuit, noise, lam: float, max_bond: int) -> list[float]:
    """MPO entropy of the middle bond after each subcircuit."""
    model = _resolve_noise(noise)
    mid = circuit.n_qubits // 2
    state = product_density(circuit.initial_bits)
    out = []
    for k in range(circuit.n_steps):
        sub = Circuit(circuit.n_qubits, [circuit.subcircuits[k]], circuit.initial_bits)
        for g in sub.gates():
            site, op = _local_operator(g, model, lam, True)
            if g.arity == 1:
                state.apply_one_site(op, site)
            else:
                state.apply_two_site(op, site, max_bond, SVD_FLOOR)
        state.normalize()
        out.append(mpo_entanglement_entropy(state, mid))
    return out


__all__ += ["mid_bond_entropy_trace"]
