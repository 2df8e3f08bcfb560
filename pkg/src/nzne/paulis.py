"""Pauli strings and weighted sums of them used as observables."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)

PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

_TOKEN = re.compile(r"^([IXYZ])(\d+)$")


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis; unlisted sites carry the identity.

    ``ops`` is a tuple of ``(site, label)`` sorted by site. Identity factors are
    dropped on construction.
    """

    ops: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        cleaned = []
        seen = set()
        for site, label in self.ops:
            site = int(site)
            if label not in PAULI:
                raise ValueError(f"unknown Pauli label {label!r}")
            if site < 0:
                raise ValueError(f"negative site index {site}")
            if site in seen:
                raise ValueError(f"site {site} listed twice")
            seen.add(site)
            if label != "I":
                cleaned.append((site, label))
        object.__setattr__(self, "ops", tuple(sorted(cleaned)))

    @classmethod
    def from_dict(cls, ops: Mapping[int, str]) -> PauliString:
        return cls(tuple(ops.items()))

    @classmethod
    def parse(cls, text: str) -> PauliString:
        """Parse strings such as ``"Y30 X31"`` (empty string is the identity)."""
        ops = []
        for tok in text.split():
            m = _TOKEN.match(tok)
            if m is None:
                raise ValueError(f"cannot parse Pauli token {tok!r}")
            ops.append((int(m.group(2)), m.group(1)))
        return cls(tuple(ops))

    @property
    def sites(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.ops)

    def as_dict(self) -> dict[int, str]:
        return dict(self.ops)

    def max_site(self) -> int:
        return max(self.sites, default=-1)

    def relabel(self, mapping: Mapping[int, int] | list[int]) -> PauliString:
        return PauliString(tuple((mapping[s], p) for s, p in self.ops))

    def __str__(self) -> str:
        return " ".join(f"{p}{s}" for s, p in self.ops) or "I"

    def dense(self, n_qubits: int) -> np.ndarray:
        """Dense ``2**n x 2**n`` matrix, qubit 0 being the most significant."""
        out = np.ones((1, 1), dtype=complex)
        d = self.as_dict()
        for k in range(n_qubits):
            out = np.kron(out, PAULI[d.get(k, "I")])
        return out


@dataclass(frozen=True)
class Observable:
    """Real-weighted sum of Pauli strings."""

    terms: tuple[tuple[float, PauliString], ...]

    @classmethod
    def single(cls, pauli: PauliString | str, coeff: float = 1.0) -> Observable:
        if isinstance(pauli, str):
            pauli = PauliString.parse(pauli)
        return cls(((float(coeff), pauli),))

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[float, PauliString | str]]) -> Observable:
        out = []
        for c, p in terms:
            out.append((float(c), PauliString.parse(p) if isinstance(p, str) else p))
        return cls(tuple(out))

    def max_site(self) -> int:
        return max((p.max_site() for _, p in self.terms), default=-1)

    def relabel(self, mapping) -> Observable:
        return Observable(tuple((c, p.relabel(mapping)) for c, p in self.terms))

    def evaluate(self, pauli_value) -> float:
        """Combine term values given a callable ``PauliString -> float``."""
        return float(sum(c * pauli_value(p) for c, p in self.terms))

    def to_json(self) -> list:
        return [[c, str(p)] for c, p in self.terms]

    @classmethod
    def from_json(cls, data) -> Observable:
        return cls.from_terms((c, "" if p == "I" else p) for c, p in data)
