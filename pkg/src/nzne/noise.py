"""Kraus channels, their superoperators and parametrized noise models.

Noise is attached to a circuit by post-composing gates with a channel whose
strength is set by a single parameter ``lam``; ``lam = 0`` is noiseless.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .paulis import I2, PAULI, X, Y, Z

__all__ = [
    "Channel",
    "NoiseModel",
    "depolarizing2",
    "cat_noise_for_gate",
    "matchgate_depolarizing",
    "to_superoperator",
    "unitary_superoperator",
    "noise_model",
    "MATCHGATE_PAULIS",
    "NOISE_FAMILIES",
]

MATCHGATE_PAULIS = ("ZI", "IZ", "XX", "XY", "YY", "YX", "ZZ")

# gate classes that never receive noise: layout swaps inserted by the router
NOISELESS_CLASSES = frozenset({"route_swap"})


def _pauli2(label: str) -> np.ndarray:
    return np.kron(PAULI[label[0]], PAULI[label[1]])


@dataclass(frozen=True)
class Channel:
    """CPTP map on one or two qubits given by Kraus operators."""

    arity: int
    kraus_ops: tuple[np.ndarray, ...]
    label: str = ""

    def __post_init__(self):
        dim = 2**self.arity
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus_ops)
        for k in ops:
            if k.shape != (dim, dim):
                raise ValueError(f"Kraus operator of shape {k.shape} for arity {self.arity}")
        object.__setattr__(self, "kraus_ops", ops)

    @property
    def dim(self) -> int:
        return 2**self.arity

    def completeness_error(self) -> float:
        s = sum(k.conj().T @ k for k in self.kraus_ops)
        return float(np.max(np.abs(s - np.eye(self.dim))))

    def is_cptp(self, atol: float = 1e-12) -> bool:
        return self.completeness_error() <= atol

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.kraus_ops)

    def unitary_mixture(self, atol: float = 1e-12) -> tuple[np.ndarray, list[np.ndarray]] | None:
        """Split into probabilities and unitaries if every Kraus operator is ``sqrt(p) U``.

        Returns ``None`` when some ``K^dagger K`` is not proportional to the identity.
        """
        probs, unitaries = [], []
        for k in self.kraus_ops:
            kk = k.conj().T @ k
            p = float(np.real(np.trace(kk))) / self.dim
            if np.max(np.abs(kk - p * np.eye(self.dim))) > atol:
                return None
            probs.append(p)
            unitaries.append(k / np.sqrt(p) if p > 0 else np.eye(self.dim, dtype=complex))
        return np.array(probs), unitaries


def _check_lam(lam: float, upper: float = 1.0) -> float:
    lam = float(lam)
    if not 0.0 <= lam <= upper:
        raise ValueError(f"noise strength {lam} outside [0, {upper}]")
    return lam


def depolarizing2(lam: float) -> Channel:
    """Two-qubit depolarizing channel ``rho -> (1 - lam) rho + lam I/4``."""
    lam = _check_lam(lam)
    ops = [np.sqrt(1.0 - 15.0 * lam / 16.0) * np.eye(4, dtype=complex)]
    for a in "IXYZ":
        for b in "IXYZ":
            if a == b == "I":
                continue
            ops.append(np.sqrt(lam / 16.0) * _pauli2(a + b))
    return Channel(2, tuple(ops), f"depolarizing2({lam:g})")


def matchgate_depolarizing(lam: float) -> Channel:
    """Depolarizing channel restricted to the seven matchgate-compatible Paulis."""
    lam = _check_lam(lam)
    ops = [np.sqrt(1.0 - lam) * np.eye(4, dtype=complex)]
    ops += [np.sqrt(lam / 7.0) * _pauli2(p) for p in MATCHGATE_PAULIS]
    return Channel(2, tuple(ops), f"matchgate_depolarizing({lam:g})")


# error -> probability multiplier of lam, per gate class
CAT_ERROR_TABLE: dict[str, dict[str, float]] = {
    "rz": {"Z": 1.0},
    "h": {"Z": 3.0, "X": 2.0},
    "cx": {"ZI": 3.0, "IZ": 0.5, "ZZ": 0.5},
}


def pauli_channel(probs: dict[str, float], label: str = "") -> Channel:
    """Pauli channel from ``{pauli_label: probability}`` (identity gets the rest)."""
    arity = len(next(iter(probs)))
    rest = 1.0 - sum(probs.values())
    if rest < -1e-15 or any(p < 0 for p in probs.values()):
        raise ValueError(f"invalid Pauli error probabilities {probs}")
    rest = max(rest, 0.0)
    ident = np.eye(2**arity, dtype=complex)
    ops = [np.sqrt(rest) * ident]
    for p_label, p in probs.items():
        mat = PAULI[p_label] if arity == 1 else _pauli2(p_label)
        ops.append(np.sqrt(p) * mat)
    return Channel(arity, tuple(ops), label)


def cat_noise_for_gate(gate_class: str, lam: float) -> Channel:
    """Biased cat-qubit Pauli noise after ``rz``, ``h`` or ``cx`` gates.

    For ``cx`` the first qubit is the control.
    """
    if gate_class not in CAT_ERROR_TABLE:
        raise ValueError(f"cat noise is defined for {sorted(CAT_ERROR_TABLE)}, not {gate_class!r}")
    table = CAT_ERROR_TABLE[gate_class]
    lam = float(lam)
    probs = {k: v * lam for k, v in table.items()}
    if lam < 0 or sum(probs.values()) > 1.0 + 1e-15:
        raise ValueError(f"noise strength {lam} gives probabilities outside [0, 1] for {gate_class}")
    return pauli_channel(probs, f"cat_{gate_class}({lam:g})")


def cat_max_lam() -> float:
    return min(1.0 / sum(t.values()) for t in CAT_ERROR_TABLE.values())


def unitary_superoperator(u: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> u rho u^dagger`` in the site-interleaved basis."""
    return to_superoperator(Channel(int(np.log2(u.shape[0])), (u,)))


def to_superoperator(ch: Channel) -> np.ndarray:
    """Matrix ``S`` with ``S @ vectorize(rho) == vectorize(ch(rho))``.

    Rows and columns use the VMPO ordering: for two qubits the index is
    ``4 * (2 i1 + j1) + (2 i2 + j2)``.
    """
    n = ch.arity
    d = ch.dim
    s = sum(np.kron(k, k.conj()) for k in ch.kraus_ops)
    # kron order is (i_1..i_n, j_1..j_n); interleave to (i_1 j_1, ..., i_n j_n)
    t = s.reshape((2,) * (4 * n))
    out_axes = [ax for k in range(n) for ax in (k, n + k)]
    in_axes = [2 * n + ax for ax in out_axes]
    return t.transpose(out_axes + in_axes).reshape(d * d, d * d)


# -- noise models --------------------------------------------------------------

ChannelFactory = Callable[[float], Channel]

NOISE_FAMILIES = ("none", "depolarizing", "cat", "matchgate_depolarizing")


@dataclass(frozen=True)
class NoiseModel:
    """Binds gate occurrences to channel factories ``lam -> Channel``.

    ``rule(gate_class, arity)`` returns a factory or ``None`` for a noiseless
    gate.
    """

    family: str
    rule: Callable[[str, int], ChannelFactory | None]
    max_lam: float = 1.0

    def channel(self, gate_class: str, arity: int, lam: float) -> Channel | None:
        if not 0.0 <= lam <= self.max_lam:
            raise ValueError(f"noise strength {lam} unsupported by {self.family} (max {self.max_lam})")
        if lam == 0.0 or gate_class in NOISELESS_CLASSES:
            return None
        factory = self.rule(gate_class, arity)
        return None if factory is None else factory(lam)


def _no_noise(gate_class: str, arity: int):
    return None


def _depolarizing_rule(gate_class: str, arity: int):
    return depolarizing2 if arity == 2 else None


def _matchgate_rule(gate_class: str, arity: int):
    return matchgate_depolarizing if arity == 2 else None


def _cat_rule(gate_class: str, arity: int):
    if gate_class in CAT_ERROR_TABLE:
        return lambda lam: cat_noise_for_gate(gate_class, lam)
    return None


@lru_cache(maxsize=None)
def noise_model(family: str) -> NoiseModel:
    """Look up a noise model by family name."""
    if family == "none":
        return NoiseModel("none", _no_noise, 0.0)
    if family == "depolarizing":
        return NoiseModel("depolarizing", _depolarizing_rule)
    if family == "matchgate_depolarizing":
        return NoiseModel("matchgate_depolarizing", _matchgate_rule)
    if family == "cat":
        return NoiseModel("cat", _cat_rule, cat_max_lam())
    raise ValueError(f"unknown noise family {family!r}; choose from {NOISE_FAMILIES}")


__all__ += ["pauli_channel", "cat_max_lam", "NOISELESS_CLASSES", "CAT_ERROR_TABLE", "I2", "X", "Y", "Z"]
