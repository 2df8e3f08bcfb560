"""Gates, circuits and Trotter circuit builders for the benchmark models.

Qubits live on a 1D chain. Two-qubit gates always act on neighbouring chain
positions; builders insert swap gates to bring interacting qubits together and
track where each logical qubit ends up, so observables in a finished
:class:`Circuit` already refer to final chain positions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.linalg
from scipy.stats import unitary_group

from .paulis import I2, X, Y, Z, Observable, PauliString

__all__ = [
    "Gate",
    "Circuit",
    "rx",
    "rz",
    "rzz",
    "xy_rotation",
    "hopping",
    "onsite",
    "H",
    "CX",
    "SWAP",
    "FSWAP",
    "build_tfim",
    "build_fhm",
    "build_xym",
    "build_random_brickwork",
    "tfim_hamiltonian",
    "xym_hamiltonian",
    "fhm_hamiltonian",
]

# -- gate matrices -------------------------------------------------------------

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
FSWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, -1]], dtype=complex)

XX = np.kron(X, X)
YY = np.kron(Y, Y)
ZZ = np.kron(Z, Z)


def rx(theta: float) -> np.ndarray:
    """``exp(-i theta X / 2)``."""
    return scipy.linalg.expm(-0.5j * theta * X)


def rz(theta: float) -> np.ndarray:
    """``exp(-i theta Z / 2)``."""
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def rzz(theta: float) -> np.ndarray:
    """``exp(-i theta ZZ / 2)``."""
    d = np.diag(ZZ).real
    return np.diag(np.exp(-0.5j * theta * d))


def xy_rotation(theta: float) -> np.ndarray:
    """``exp(-i theta (XX + YY) / 2)``."""
    return scipy.linalg.expm(-0.5j * theta * (XX + YY))


def hopping(phi: float) -> np.ndarray:
    """``exp(-i phi (a1^dag a2 + a2^dag a1))`` for neighbouring Jordan-Wigner modes."""
    return xy_rotation(phi)


def onsite(phi: float) -> np.ndarray:
    """``exp(-i phi n1 n2)`` with ``n = (I - Z) / 2``."""
    return np.diag([1, 1, 1, np.exp(-1j * phi)]).astype(complex)


# -- data model ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Gate:
    """A one- or two-qubit unitary on chain positions ``targets``.

    For two-qubit gates the matrix index is ``2 * b0 + b1`` with ``b0`` the bit
    of ``targets[0]``; ``targets`` may be given in either chain order.
    """

    matrix: np.ndarray
    targets: tuple[int, ...]
    gate_class: str
    param: float | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        targets = tuple(int(t) for t in self.targets)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "targets", targets)
        if len(targets) not in (1, 2):
            raise ValueError(f"gates act on one or two qubits, got targets {targets}")
        if len(set(targets)) != len(targets) or min(targets) < 0:
            raise ValueError(f"invalid targets {targets}")
        dim = 2 ** len(targets)
        if m.shape != (dim, dim):
            raise ValueError(f"matrix shape {m.shape} does not fit {len(targets)} targets")
        if np.max(np.abs(m.conj().T @ m - np.eye(dim))) > 1e-12:
            raise ValueError(f"gate {self.gate_class!r} is not unitary")

    @property
    def arity(self) -> int:
        return len(self.targets)

    def ordered(self) -> tuple[int, np.ndarray]:
        """Leftmost target and the matrix written for increasing chain order."""
        if self.arity == 1 or self.targets[0] < self.targets[1]:
            return self.targets[0], self.matrix
        return self.targets[1], SWAP @ self.matrix @ SWAP

    def to_json(self) -> dict:
        return {
            "targets": list(self.targets),
            "class": self.gate_class,
            "param": self.param,
            "re": self.matrix.real.tolist(),
            "im": self.matrix.imag.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> Gate:
        m = np.array(d["re"]) + 1j * np.array(d["im"])
        return cls(m, tuple(d["targets"]), d["class"], d.get("param"))


@dataclass
class Circuit:
    """Gates grouped into subcircuits (one per Trotter step), plus readout data.

    Attributes:
        n_qubits: Chain length.
        subcircuits: Ordered gate lists; fidelity bookkeeping is per subcircuit.
        initial_bits: Computational basis start state.
        observables: Named observables in final chain positions.
        metadata: Free-form description (model, parameters, final layout).
    """

    n_qubits: int
    subcircuits: list[list[Gate]]
    initial_bits: tuple[int, ...]
    observables: dict[str, Observable] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.initial_bits = tuple(int(b) for b in self.initial_bits)
        if len(self.initial_bits) != self.n_qubits:
            raise ValueError("initial_bits length differs from n_qubits")
        if any(b not in (0, 1) for b in self.initial_bits):
            raise ValueError("initial bits must be 0 or 1")
        if not self.subcircuits:
            raise ValueError("a circuit needs at least one subcircuit")
        for gate in self.gates():
            if max(gate.targets) >= self.n_qubits:
                raise ValueError(f"gate on {gate.targets} outside {self.n_qubits} qubits")
        for name, obs in self.observables.items():
            if obs.max_site() >= self.n_qubits:
                raise ValueError(f"observable {name!r} outside the register")

    def gates(self) -> Iterable[Gate]:
        for sub in self.subcircuits:
            yield from sub

    @property
    def n_steps(self) -> int:
        return len(self.subcircuits)

    def count(self, arity: int | None = None) -> int:
        return sum(1 for g in self.gates() if arity is None or g.arity == arity)

    def is_nearest_neighbour(self) -> bool:
        return all(g.arity == 1 or abs(g.targets[0] - g.targets[1]) == 1 for g in self.gates())

    def with_observables(self, observables: dict[str, Observable]) -> Circuit:
        return Circuit(self.n_qubits, self.subcircuits, self.initial_bits, dict(observables), dict(self.metadata))

    def to_json(self) -> dict:
        return {
            "schema": "nzne-circuit/1",
            "n_qubits": self.n_qubits,
            "initial_bits": list(self.initial_bits),
            "subcircuits": [[g.to_json() for g in sub] for sub in self.subcircuits],
            "observables": {k: v.to_json() for k, v in self.observables.items()},
            "metadata": self.metadata,
        }

    @classmethod
    def from_json(cls, d: dict) -> Circuit:
        return cls(
            d["n_qubits"],
            [[Gate.from_json(g) for g in sub] for sub in d["subcircuits"]],
            tuple(d["initial_bits"]),
            {k: Observable.from_json(v) for k, v in d.get("observables", {}).items()},
            d.get("metadata", {}),
        )

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> Circuit:
        with open(path) as fh:
            return cls.from_json(json.load(fh))


# -- routing -------------------------------------------------------------------


class _Router:
    """Greedy nearest-neighbour router with layout tracking.

    ``pos[q]`` is the chain position of logical qubit ``q``. A two-qubit term
    between distant qubits is made local by swapping the rightmost of the two
    towards the other; the layout is left as is afterwards.
    """

    def __init__(self, n: int, swap: np.ndarray, swap_class: str):
        self.pos = list(range(n))
        self.at = list(range(n))
        self.swap = swap
        self.swap_class = swap_class

    def _swap_positions(self, p: int, out: list[Gate]) -> None:
        out.append(Gate(self.swap, (p, p + 1), self.swap_class))
        a, b = self.at[p], self.at[p + 1]
        self.at[p], self.at[p + 1] = b, a
        self.pos[a], self.pos[b] = p + 1, p

    def bring_together(self, q1: int, q2: int, out: list[Gate]) -> tuple[int, int]:
        """Swap until ``q1`` and ``q2`` are neighbours; return their positions."""
        p1, p2 = self.pos[q1], self.pos[q2]
        if p1 < p2:
            while self.pos[q2] > self.pos[q1] + 1:
                self._swap_positions(self.pos[q2] - 1, out)
        else:
            while self.pos[q1] > self.pos[q2] + 1:
                self._swap_positions(self.pos[q1] - 1, out)
        return self.pos[q1], self.pos[q2]


def _emit_two(
    router: _Router, q1: int, q2: int, matrix: np.ndarray, cls: str, param, out: list[Gate], restore: bool = False
) -> None:
    swaps: list[Gate] = []
    p1, p2 = router.bring_together(q1, q2, swaps)
    out += swaps
    out.append(Gate(matrix, (p1, p2), cls, param))
    if restore:
        for g in reversed(swaps):
            router._swap_positions(min(g.targets), out)


# -- cat-qubit native gate set {rz, h, cx} -------------------------------------


def _native_rzz(p1: int, p2: int, theta: float) -> list[Gate]:
    return [
        Gate(CX, (p1, p2), "cx"),
        Gate(rz(theta), (p2,), "rz", theta),
        Gate(CX, (p1, p2), "cx"),
    ]


def _native_rx(p: int, theta: float) -> list[Gate]:
    return [Gate(H, (p,), "h"), Gate(rz(theta), (p,), "rz", theta), Gate(H, (p,), "h")]


def _native_swap(p1: int, p2: int) -> list[Gate]:
    return [Gate(CX, (p1, p2), "cx"), Gate(CX, (p2, p1), "cx"), Gate(CX, (p1, p2), "cx")]


def _to_native(gates: list[Gate]) -> list[Gate]:
    out: list[Gate] = []
    for g in gates:
        if g.gate_class == "rx":
            out += _native_rx(g.targets[0], g.param)
        elif g.gate_class == "zz":
            out += _native_rzz(*g.targets, g.param)
        elif g.gate_class in ("swap", "route_swap"):
            out += _native_swap(*g.targets)
        elif g.gate_class in ("rz", "h", "cx"):
            out.append(g)
        else:
            raise ValueError(f"no native decomposition for gate class {g.gate_class!r}")
    return out


# -- TFIM ----------------------------------------------------------------------


def _lattice_bonds(nx: int, ny: int, periodic: bool, index) -> list[tuple[int, int]]:
    bonds = []
    seen = set()
    for x in range(nx):
        for y in range(ny):
            for dx, dy in ((1, 0), (0, 1)):
                x2, y2 = x + dx, y + dy
                if periodic:
                    x2, y2 = x2 % nx, y2 % ny
                elif x2 >= nx or y2 >= ny:
                    continue
                a, b = index(x, y), index(x2, y2)
                key = (min(a, b), max(a, b))
                if a != b and key not in seen:
                    seen.add(key)
                    bonds.append(key)
    return bonds


def tfim_bonds(nx: int, ny: int, periodic: bool = True) -> list[tuple[int, int]]:
    """Nearest-neighbour pairs of an ``nx``-column, ``ny``-row lattice, column-major labels."""
    return _lattice_bonds(nx, ny, periodic, lambda x, y: x * ny + y)


def tfim_hamiltonian(nx: int, ny: int, J: float, h: float, periodic: bool = True) -> Observable:
    terms = [(J, PauliString(((a, "Z"), (b, "Z")))) for a, b in tfim_bonds(nx, ny, periodic)]
    terms += [(h, PauliString(((q, "X"),))) for q in range(nx * ny)]
    return Observable(tuple(terms))


def build_tfim(
    nx: int,
    ny: int,
    J: float = 1.0,
    h: float = 2.0,
    dt: float = 0.25,
    steps: int = 10,
    periodic: bool = True,
    gate_set: str = "generic",
    noisy_routing: bool = True,
    routing: str = "greedy",
) -> Circuit:
    """Second-order Trotter circuit for the 2D transverse-field Ising model.

    The lattice has ``nx`` columns of ``ny`` qubits, labelled column by column
    (qubit ``x * ny + y``). All ``ZZ`` terms commute, so each step is
    ``Rx(dt/2) ZZ(dt) Rx(dt/2)`` with the field halves of consecutive steps
    merged. Within a step the ``ZZ`` rotations are emitted closest pair first
    in the current layout.

    Args:
        nx, ny: Lattice shape.
        J, h: Coupling and transverse field.
        dt, steps: Trotter step size and number of steps.
        periodic: Wrap bonds in both directions (duplicates dropped).
        gate_set: ``"generic"`` or ``"cat"`` (compile to ``rz``, ``h``, ``cx``).
        noisy_routing: Whether routing swaps count as noisy two-qubit gates.
        routing: ``"greedy"`` keeps the layout produced by each swap chain;
            ``"restore"`` swaps qubits back after every routed gate.
    """
    n = nx * ny
    if n < 2 or nx < 1 or ny < 1:
        raise ValueError(f"invalid lattice {nx}x{ny}")
    if steps < 1:
        raise ValueError("steps must be positive")
    if gate_set not in ("generic", "cat"):
        raise ValueError(f"unknown gate set {gate_set!r}")
    if routing not in ("greedy", "restore"):
        raise ValueError(f"unknown routing {routing!r}")
    bonds = tfim_bonds(nx, ny, periodic)
    router = _Router(n, SWAP, "swap" if noisy_routing else "route_swap")

    def field_layer(theta: float) -> list[Gate]:
        return [Gate(rx(theta), (router.pos[q],), "rx", theta) for q in range(n)]

    subcircuits = []
    for step in range(steps):
        gates = field_layer(2 * h * dt * (0.5 if step == 0 else 1.0))
        theta = 2 * J * dt
        # ZZ terms commute: take the currently closest pair first to save swaps
        remaining = list(bonds)
        while remaining:
            a, b = min(remaining, key=lambda ab: abs(router.pos[ab[0]] - router.pos[ab[1]]))
            remaining.remove((a, b))
            _emit_two(router, a, b, rzz(theta), "zz", theta, gates, restore=routing == "restore")
        if step == steps - 1:
            gates += field_layer(h * dt)
        subcircuits.append(_to_native(gates) if gate_set == "cat" else gates)

    pos = router.pos
    obs = {}
    for a, b in bonds:
        obs[f"ZZ_{a}_{b}"] = Observable.single(PauliString(((pos[a], "Z"), (pos[b], "Z"))))
    for q in range(n):
        obs[f"X_{q}"] = Observable.single(PauliString(((pos[q], "X"),)))
    energy = tfim_hamiltonian(nx, ny, J, h, periodic).relabel(pos)
    obs["energy_per_site"] = Observable(tuple((c / n, p) for c, p in energy.terms))
    meta = {
        "model": "tfim",
        "lattice": [nx, ny],
        "J": J,
        "h": h,
        "dt": dt,
        "steps": steps,
        "periodic": periodic,
        "gate_set": gate_set,
        "noisy_routing": noisy_routing,
        "routing": routing,
        "layout": list(pos),
    }
    return Circuit(n, subcircuits, (0,) * n, obs, meta)


# -- XY model ------------------------------------------------------------------


def xym_hamiltonian(n: int, J: float, h: float) -> Observable:
    terms = []
    for k in range(n - 1):
        terms.append((J, PauliString(((k, "X"), (k + 1, "X")))))
        terms.append((J, PauliString(((k, "Y"), (k + 1, "Y")))))
    terms += [(h, PauliString(((k, "Z"),))) for k in range(n)]
    return Observable(tuple(terms))


def build_xym(n: int, J: float = 0.5, h: float = 0.23, dt: float = 0.1, steps: int = 30) -> Circuit:
    """Trotter circuit for the open 1D XY model in a field, from ``|1010...>``.

    Each step is ``F(dt/2) E(dt) O(dt) F(dt/2)`` where ``E``/``O`` are the
    even/odd bond layers and ``F`` the field layer. The field commutes with
    every bond term, so the split is symmetric in field versus hopping and
    first order between the two bond layers. Field half-layers are kept
    separate; one-qubit gates do not add to the two-qubit count.
    """
    if n < 2:
        raise ValueError("the XY chain needs at least two qubits")
    if steps < 1:
        raise ValueError("steps must be positive")
    even = [(k, k + 1) for k in range(0, n - 1, 2)]
    odd = [(k, k + 1) for k in range(1, n - 1, 2)]

    def bond_layer(bonds, tau: float) -> list[Gate]:
        theta = 2 * J * tau
        return [Gate(xy_rotation(theta), b, "xy", theta) for b in bonds]

    def field_layer(tau: float) -> list[Gate]:
        return [Gate(rz(2 * h * tau), (k,), "rz", 2 * h * tau) for k in range(n)]

    subcircuits = [
        field_layer(dt / 2) + bond_layer(even, dt) + bond_layer(odd, dt) + field_layer(dt / 2) for _ in range(steps)
    ]

    obs = {}
    for k in range(n):
        obs[f"Z_{k}"] = Observable.single(PauliString(((k, "Z"),)))
    for k in range(n - 1):
        for a in "XY":
            for b in "XY":
                obs[f"{a}{b}_{k}_{k + 1}"] = Observable.single(PauliString(((k, a), (k + 1, b))))
    bits = tuple((k + 1) % 2 for k in range(n))
    meta = {"model": "xym", "n": n, "J": J, "h": h, "dt": dt, "steps": steps, "layout": list(range(n))}
    return Circuit(n, subcircuits, bits, obs, meta)


# -- Fermi-Hubbard ---------------------------------------------------------------

UP, DOWN = 0, 1


def fhm_mode(site: int, spin: int) -> int:
    """Initial chain position of mode ``(site, spin)``: spins of a site side by side."""
    return 2 * site + spin


def fhm_bonds(nx: int, ny: int) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Horizontal and vertical site pairs of an open ``nx``-wide, ``ny``-tall lattice (row-major)."""
    horizontal, vertical = [], []
    for y in range(ny):
        for x in range(nx):
            s = y * nx + x
            if x + 1 < nx:
                horizontal.append((s, s + 1))
            if y + 1 < ny:
                vertical.append((s, s + nx))
    return horizontal, vertical


def fhm_afm_bits(nx: int, ny: int) -> tuple[int, ...]:
    """Half-filled Neel state: spin up on sites with even ``x + y``, spin down otherwise."""
    bits = [0] * (2 * nx * ny)
    for y in range(ny):
        for x in range(nx):
            s = y * nx + x
            bits[fhm_mode(s, UP if (x + y) % 2 == 0 else DOWN)] = 1
    return tuple(bits)


def _number_op(p: int) -> Observable:
    return Observable(((0.5, PauliString()), (-0.5, PauliString(((p, "Z"),)))))


def _hopping_op(p: int, q: int) -> Observable:
    """``a_p^dag a_q + a_q^dag a_p`` for modes at chain positions ``p``, ``q``."""
    lo, hi = min(p, q), max(p, q)
    string = tuple((k, "Z") for k in range(lo + 1, hi))
    xx = PauliString(((lo, "X"), (hi, "X")) + string)
    yy = PauliString(((lo, "Y"), (hi, "Y")) + string)
    return Observable(((0.5, xx), (0.5, yy)))


def fhm_hamiltonian(nx: int, ny: int, t: float, U: float) -> Observable:
    """Jordan-Wigner form of the Hubbard Hamiltonian in the initial mode order."""
    horizontal, vertical = fhm_bonds(nx, ny)
    terms = []
    for i, j in horizontal + vertical:
        for spin in (UP, DOWN):
            for c, p in _hopping_op(fhm_mode(i, spin), fhm_mode(j, spin)).terms:
                terms.append((-t * c, p))
    for s in range(nx * ny):
        u, d = fhm_mode(s, UP), fhm_mode(s, DOWN)
        terms += [
            (U / 4, PauliString()),
            (-U / 4, PauliString(((u, "Z"),))),
            (-U / 4, PauliString(((d, "Z"),))),
            (U / 4, PauliString(((u, "Z"), (d, "Z")))),
        ]
    return Observable(tuple(terms))


def build_fhm(nx: int, ny: int, t: float = 1.0, U: float = 8.0, dt: float = 0.1, steps: int = 10) -> Circuit:
    """First-order Trotter circuit for the open 2D Fermi-Hubbard model.

    Sites are row-major (``nx`` per row); mode ``(s, spin)`` starts at chain
    position ``2 s + spin``. Each step applies the on-site layer, then the
    horizontal hopping layer, then vertical hopping on even rows and on odd
    rows. Hopping between modes that are not chain neighbours is made local by
    fermionic swaps, which keeps every gate nearest-neighbour and free of
    explicit Z strings. The final mode layout is tracked and the observables
    are expressed in it.
    """
    if nx < 1 or ny < 1 or nx * ny < 2:
        raise ValueError(f"invalid lattice {nx}x{ny}")
    if steps < 1:
        raise ValueError("steps must be positive")
    n_sites = nx * ny
    n = 2 * n_sites
    horizontal, vertical = fhm_bonds(nx, ny)
    vertical_even = [b for b in vertical if (b[0] // nx) % 2 == 0]
    vertical_odd = [b for b in vertical if (b[0] // nx) % 2 == 1]
    router = _Router(n, FSWAP, "fswap")

    subcircuits = []
    for _ in range(steps):
        gates: list[Gate] = []
        phi = U * dt
        for s in range(n_sites):
            _emit_two(router, fhm_mode(s, UP), fhm_mode(s, DOWN), onsite(phi), "onsite", phi, gates)
        for layer in (horizontal, vertical_even, vertical_odd):
            for i, j in layer:
                for spin in (UP, DOWN):
                    _emit_two(router, fhm_mode(i, spin), fhm_mode(j, spin), hopping(-t * dt), "hop", -t * dt, gates)
        subcircuits.append(gates)

    pos = router.pos
    obs = {}
    for s in range(n_sites):
        u, d = pos[fhm_mode(s, UP)], pos[fhm_mode(s, DOWN)]
        obs[f"n_{s}_up"] = _number_op(u)
        obs[f"n_{s}_down"] = _number_op(d)
        obs[f"filling_{s}"] = Observable(((1.0, PauliString()), (-0.5, PauliString(((u, "Z"),))), (-0.5, PauliString(((d, "Z"),)))))
        obs[f"magnetization_{s}"] = Observable(((-0.5, PauliString(((u, "Z"),))), (0.5, PauliString(((d, "Z"),)))))
    for i, j in horizontal + vertical:
        for spin, label in ((UP, "up"), (DOWN, "down")):
            obs[f"hop_{i}_{j}_{label}"] = _hopping_op(pos[fhm_mode(i, spin)], pos[fhm_mode(j, spin)])
    meta = {"model": "fhm", "lattice": [nx, ny], "t": t, "U": U, "dt": dt, "steps": steps, "layout": list(pos)}
    return Circuit(n, subcircuits, fhm_afm_bits(nx, ny), obs, meta)


# -- random circuits -----------------------------------------------------------


def build_random_brickwork(n: int, depth: int, seed: int = 0) -> Circuit:
    """Brickwork of Haar-random two-qubit gates, one layer per subcircuit.

    Starts from ``|0...0>``; observables are all single-site ``Z``.
    """
    if n < 2 or depth < 1:
        raise ValueError("need n >= 2 and depth >= 1")
    rng = np.random.default_rng(seed)
    subcircuits = []
    for layer in range(depth):
        start = layer % 2
        gates = [Gate(unitary_group.rvs(4, random_state=rng), (k, k + 1), "random") for k in range(start, n - 1, 2)]
        subcircuits.append(gates)
    obs = {f"Z_{k}": Observable.single(PauliString(((k, "Z"),))) for k in range(n)}
    return Circuit(n, subcircuits, (0,) * n, obs, {"model": "random", "n": n, "depth": depth, "seed": seed})


__all__ += ["fhm_bonds", "fhm_mode", "fhm_afm_bits", "tfim_bonds", "UP", "DOWN", "I2"]
