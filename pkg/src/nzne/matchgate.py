"""Free-fermion simulation of noisy matchgate circuits with Majorana covariance matrices.

Majorana operators follow the Jordan-Wigner construction
``c_{2k} = Z_0 ... Z_{k-1} X_k`` and ``c_{2k+1} = Z_0 ... Z_{k-1} Y_k``. A
Gaussian state is described by the real antisymmetric matrix
``M_pq = (i/2) <[c_p, c_q]>``. A gate ``U`` acts as ``M -> R M R^T`` where
``U^dag c_p U = sum_q R_pq c_q``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Sequence

import numpy as np

from ._stats import RunningStats
from .circuits import Circuit, Gate
from .noise import MATCHGATE_PAULIS
from .paulis import PAULI, I2, X, Y, Z, Observable, PauliString

__all__ = [
    "CovarianceState",
    "TrajectoryResult",
    "is_matchgate",
    "init_covariance",
    "majorana_rotation",
    "apply_matchgate",
    "apply_pauli",
    "read_observable",
    "run_covariance_trajectory",
    "sample_choices",
    "trajectory_values",
    "trajectory_mean",
]

REANTISYMMETRIZE_EVERY = 1000


def _local_majoranas(w: int) -> list[np.ndarray]:
    """Jordan-Wigner Majoranas on a window of ``w`` qubits (no prefix string)."""
    out = []
    for k in range(w):
        for p in (X, Y):
            m = np.ones((1, 1), dtype=complex)
            for j in range(w):
                m = np.kron(m, Z if j < k else (p if j == k else I2))
            out.append(m)
    return out


_MAJ1 = _local_majoranas(1)
_MAJ2 = _local_majoranas(2)


@dataclass
class CovarianceState:
    """Majorana covariance matrix of an ``n``-qubit fermionic Gaussian state."""

    n_qubits: int
    M: np.ndarray
    ops_since_fix: int = field(default=0, repr=False)

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=float)
        if self.M.shape != (2 * self.n_qubits, 2 * self.n_qubits):
            raise ValueError("covariance matrix has the wrong shape")

    def antisymmetry_error(self) -> float:
        return float(np.max(np.abs(self.M + self.M.T)))

    def is_physical(self, atol: float = 1e-9) -> bool:
        nu = np.abs(np.linalg.eigvals(self.M).imag)
        return self.antisymmetry_error() <= 1e-10 and bool(np.all(nu <= 1 + atol))

    def copy(self) -> CovarianceState:
        return CovarianceState(self.n_qubits, self.M.copy())


def init_covariance(bits) -> CovarianceState:
    """Covariance matrix of the computational basis state ``|bits>``."""
    bits = [int(b) for b in bits]
    n = len(bits)
    M = np.zeros((2 * n, 2 * n))
    for k, b in enumerate(bits):
        z = 1 - 2 * b
        M[2 * k, 2 * k + 1] = -z
        M[2 * k + 1, 2 * k] = z
    return CovarianceState(n, M)


def is_matchgate(matrix: np.ndarray, atol: float = 1e-10) -> tuple[bool, str]:
    """Check the block form ``G(A, B)`` with ``det A == det B``.

    ``A`` acts on ``span{|00>, |11>}`` and ``B`` on ``span{|01>, |10>}``.
    One-qubit gates qualify when diagonal. Returns the verdict and a reason.
    """
    u = np.asarray(matrix, dtype=complex)
    if u.shape == (2, 2):
        if abs(u[0, 1]) > atol or abs(u[1, 0]) > atol:
            return False, "one-qubit gate is not diagonal"
        return True, "diagonal one-qubit gate"
    if u.shape != (4, 4):
        return False, f"unsupported shape {u.shape}"
    even, odd = [0, 3], [1, 2]
    off = max(np.max(np.abs(u[np.ix_(even, odd)])), np.max(np.abs(u[np.ix_(odd, even)])))
    if off > atol:
        return False, f"parity-mixing entries up to {off:.2e}"
    da = np.linalg.det(u[np.ix_(even, even)])
    db = np.linalg.det(u[np.ix_(odd, odd)])
    if abs(da - db) > atol:
        return False, f"det A = {da:.6g} differs from det B = {db:.6g}"
    return True, "matchgate"


def majorana_rotation(matrix: np.ndarray) -> np.ndarray:
    """Orthogonal ``R`` with ``U^dag c_p U = sum_q R_pq c_q`` on the gate's local Majoranas.

    Raises:
        ValueError: if ``U`` is not a matchgate.
    """
    ok, why = is_matchgate(matrix)
    if not ok:
        raise ValueError(f"not a matchgate: {why}")
    u = np.asarray(matrix, dtype=complex)
    maj = _MAJ1 if u.shape[0] == 2 else _MAJ2
    d = u.shape[0]
    r = np.array([[np.trace(mq @ u.conj().T @ mp @ u) / d for mq in maj] for mp in maj])
    return r.real


def _rotate(state: CovarianceState, first: int, r: np.ndarray) -> None:
    idx = slice(2 * first, 2 * first + r.shape[0])
    M = state.M
    M[idx, :] = r @ M[idx, :]
    M[:, idx] = M[:, idx] @ r.T
    state.ops_since_fix += 1
    if state.ops_since_fix >= REANTISYMMETRIZE_EVERY:
        state.M = 0.5 * (M - M.T)
        state.ops_since_fix = 0


def apply_matchgate(state: CovarianceState, gate: Gate) -> CovarianceState:
    """Apply a one- or two-qubit matchgate in place (O(n) work)."""
    first, matrix = gate.ordered()
    if gate.arity == 2 and abs(gate.targets[0] - gate.targets[1]) != 1:
        raise ValueError("matchgates must act on neighbouring qubits")
    _rotate(state, first, _cached_rotation(matrix))
    return state


def _pauli_matrix(label: str) -> np.ndarray:
    m = np.ones((1, 1), dtype=complex)
    for ch in label:
        m = np.kron(m, PAULI[ch])
    return m


def apply_pauli(state: CovarianceState, label: str, sites: tuple[int, ...]) -> CovarianceState:
    """Apply a Pauli from the matchgate-compatible set (``label[i]`` on ``sites[i]``)."""
    if len(sites) == 2 and label not in MATCHGATE_PAULIS:
        raise ValueError(f"{label} is not a matchgate-compatible Pauli")
    return apply_matchgate(state, Gate(_pauli_matrix(label), tuple(sites), "pauli"))


def _cached_rotation(matrix: np.ndarray) -> np.ndarray:
    return _rotation_from_bytes(matrix.tobytes(), matrix.shape[0])


@lru_cache(maxsize=4096)
def _rotation_from_bytes(raw: bytes, dim: int) -> np.ndarray:
    return majorana_rotation(np.frombuffer(raw, dtype=complex).reshape(dim, dim))


# -- readout -------------------------------------------------------------------


@lru_cache(maxsize=None)
def majorana_form(pauli: PauliString, max_window: int = 4) -> tuple[tuple[int, ...], complex]:
    """Write ``pauli`` as ``c_{s_1} ... c_{s_k} / phase`` with ``s`` increasing.

    Returns the Majorana indices and the phase. Only Pauli strings on a
    window of at most ``max_window`` consecutive qubits are supported.
    """
    if not pauli.ops:
        return (), 1.0
    a, b = pauli.sites[0], pauli.sites[-1]
    w = b - a + 1
    if w > max_window:
        raise ValueError(f"{pauli} spans {w} qubits (max {max_window})")
    target = PauliString(tuple((s - a, p) for s, p in pauli.ops)).dense(w)
    maj = _local_majoranas(w)
    for k in range(2, 2 * w + 1, 2):
        for subset in combinations(range(2 * w), k):
            prod = np.eye(2**w, dtype=complex)
            for s in subset:
                prod = prod @ maj[s]
            phase = np.trace(target.conj().T @ prod) / 2**w
            if abs(abs(phase) - 1) < 1e-12:
                return tuple(2 * a + s for s in subset), complex(phase)
    raise ValueError(f"{pauli} is not a product of Majorana operators")


def _pfaffian(a: np.ndarray) -> np.ndarray:
    """Pfaffian of antisymmetric matrices stacked along leading axes (size 0, 2 or 4)."""
    k = a.shape[-1]
    if k == 0:
        return np.ones(a.shape[:-2], dtype=a.dtype)
    if k == 2:
        return a[..., 0, 1]
    if k == 4:
        return a[..., 0, 1] * a[..., 2, 3] - a[..., 0, 2] * a[..., 1, 3] + a[..., 0, 3] * a[..., 1, 2]
    # expansion along the first row
    out = 0
    for j in range(1, k):
        keep = [i for i in range(1, k) if i != j]
        out = out + (-1) ** (j + 1) * a[..., 0, j] * _pfaffian(a[..., keep, :][..., :, keep])
    return out


def _value_from_block(block: np.ndarray, phase: complex) -> np.ndarray:
    """Expectation from the covariance block on the observable's Majoranas."""
    g = -1j * block  # <c_p c_q> for p != q
    val = _pfaffian(g) / phase
    return val.real


def read_observable(state: CovarianceState, obs: PauliString | Observable | str) -> float:
    """Expectation value of a Majorana-monomial Pauli string (or a sum of them)."""
    if isinstance(obs, str):
        obs = PauliString.parse(obs)
    if isinstance(obs, PauliString):
        obs = Observable.single(obs)

    def value(p: PauliString) -> float:
        idx, phase = majorana_form(p)
        return float(_value_from_block(state.M[np.ix_(idx, idx)], phase))

    return obs.evaluate(value)


# -- trajectories ----------------------------------------------------------------


def run_covariance_trajectory(circuit: Circuit, choices) -> CovarianceState:
    """Forward evolution with Kraus index ``choices[i]`` after gate ``i``.

    Index 0 means no error; ``j >= 1`` inserts ``MATCHGATE_PAULIS[j - 1]`` on
    the gate's targets (in target order). One-qubit gates take index 0.
    """
    state = init_covariance(circuit.initial_bits)
    for g, c in zip(circuit.gates(), choices, strict=True):
        apply_matchgate(state, g)
        if c:
            if g.arity != 2:
                raise ValueError("errors are inserted after two-qubit gates only")
            apply_pauli(state, MATCHGATE_PAULIS[c - 1], g.targets)
    return state


def sample_choices(circuit: Circuit, lam: float, n_samples: int, rng) -> np.ndarray:
    """Kraus indices for ``n_samples`` trajectories, shape ``(n_samples, n_gates)``."""
    arity = np.array([g.arity for g in circuit.gates()])
    hit = rng.random((n_samples, arity.size)) < lam
    which = rng.integers(1, len(MATCHGATE_PAULIS) + 1, size=(n_samples, arity.size))
    return np.where(hit & (arity == 2), which, 0)


@dataclass(frozen=True)
class _Program:
    first: np.ndarray
    rotations: list[np.ndarray]
    signs: list[np.ndarray | None]  # (8, 4) sign table per two-qubit gate


def _signs_table(g: Gate) -> np.ndarray:
    table = np.ones((len(MATCHGATE_PAULIS) + 1, 4))
    for j, label in enumerate(MATCHGATE_PAULIS, start=1):
        _, m = Gate(_pauli_matrix(label), g.targets, "pauli").ordered()
        table[j] = np.diag(_cached_rotation(m))
    return table


def _compile(circuit: Circuit) -> _Program:
    firsts, rots, signs = [], [], []
    for g in circuit.gates():
        first, m = g.ordered()
        if g.arity == 2 and abs(g.targets[0] - g.targets[1]) != 1:
            raise ValueError("matchgates must act on neighbouring qubits")
        firsts.append(first)
        rots.append(_cached_rotation(m))
        signs.append(_signs_table(g) if g.arity == 2 else None)
    return _Program(np.array(firsts), rots, signs)


def trajectory_values(circuit: Circuit, choices: np.ndarray, observables: dict[str, Observable]) -> dict[str, np.ndarray]:
    """Per-trajectory observable values for a batch of Kraus index sequences.

    Only the rows of the total Majorana rotation that the observables need
    are propagated backwards through the circuit, so the cost per gate does
    not grow with the number of qubits.
    """
    choices = np.atleast_2d(np.asarray(choices))
    batch = choices.shape[0]
    prog = _compile(circuit)
    if choices.shape[1] != len(prog.rotations):
        raise ValueError("choices do not match the number of gates")
    forms = {}
    needed: set[int] = set()
    for name, obs in observables.items():
        forms[name] = [(c, *majorana_form(p)) for c, p in obs.terms]
        for _, idx, _ in forms[name]:
            needed.update(idx)
    rows = sorted(needed)
    where = {r: i for i, r in enumerate(rows)}
    n2 = 2 * circuit.n_qubits
    W = np.zeros((batch, len(rows), n2))
    for i, r in enumerate(rows):
        W[:, i, r] = 1.0
    for t in range(len(prog.rotations) - 1, -1, -1):
        r = prog.rotations[t]
        lo = 2 * prog.first[t]
        sl = slice(lo, lo + r.shape[0])
        if prog.signs[t] is not None:
            W[:, :, sl] *= prog.signs[t][choices[:, t]][:, None, :]
        W[:, :, sl] = W[:, :, sl] @ r
    z = np.array([1 - 2 * b for b in circuit.initial_bits], dtype=float)
    even, odd = W[:, :, 0::2], W[:, :, 1::2]
    # M0 has M0[2k, 2k+1] = -z_k
    block = -np.einsum("k,bik,bjk->bij", z, even, odd)
    block = block - np.swapaxes(block, 1, 2)
    out = {}
    for name, terms in forms.items():
        total = np.zeros(batch)
        for coeff, idx, phase in terms:
            sel = [where[i] for i in idx]
            sub = block[:, sel, :][:, :, sel]
            total += coeff * _value_from_block(sub, phase)
        out[name] = total
    return out


@dataclass
class TrajectoryResult:
    """Sample statistics of matchgate trajectories for each observable.

    ``trace`` holds the running mean after each batch, ``batch_std`` the
    spread of the batch means.
    """

    lam: float
    n_samples: int
    seed: int
    batch_size: int
    mean: dict[str, float]
    std: dict[str, float]
    sem: dict[str, float]
    batch_std: dict[str, float]
    trace: dict[str, list[float]]

    def to_json(self) -> dict:
        return dict(self.__dict__, schema="nzne-trajectory/1", mode="matchgate")


def trajectory_mean(
    circuit: Circuit,
    lam: float,
    n_samples: int,
    observables: dict[str, Observable] | Sequence[str] | None = None,
    seed: int = 0,
    batch_size: int = 2000,
) -> TrajectoryResult:
    """Average observables over matchgate-depolarizing trajectories.

    Error insertions are drawn independently of the state (every Kraus
    operator is a scaled Pauli), batch ``b`` using the generator seeded with
    ``(seed, b)``.
    """
    if observables is None:
        obs = circuit.observables
    elif isinstance(observables, dict):
        obs = observables
    else:
        obs = {name: circuit.observables[name] for name in observables}
    for g in circuit.gates():
        ok, why = is_matchgate(g.matrix)
        if not ok:
            raise ValueError(f"gate {g.gate_class} on {g.targets}: {why}")
    stats = {name: RunningStats() for name in obs}
    batch_means = {name: RunningStats() for name in obs}
    trace = {name: [] for name in obs}
    done = 0
    b = 0
    while done < n_samples:
        size = min(batch_size, n_samples - done)
        rng = np.random.default_rng([seed, b])
        vals = trajectory_values(circuit, sample_choices(circuit, lam, size, rng), obs)
        for name, v in vals.items():
            stats[name].push_batch(v)
            batch_means[name].push(v.mean())
            trace[name].append(float(stats[name].mean))
        done += size
        b += 1
    return TrajectoryResult(
        lam=float(lam),
        n_samples=n_samples,
        seed=seed,
        batch_size=batch_size,
        mean={k: float(s.mean) for k, s in stats.items()},
        std={k: float(s.std) for k, s in stats.items()},
        sem={k: float(s.sem) for k, s in stats.items()},
        batch_std={k: float(s.std) for k, s in batch_means.items()},
        trace=trace,
    )


__all__ += ["majorana_form", "REANTISYMMETRIZE_EVERY"]
