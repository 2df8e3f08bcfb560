"""Matrix-product states of qubits and of vectorized density matrices.

A :class:`TnState` with ``phys_dim == 2`` is an ordinary MPS. With
``phys_dim == 4`` it is a vectorized matrix product operator (VMPO): the
physical index of site ``k`` is the superket index ``2 * i + j`` of
``|i><j|`` on qubit ``k`` (``i`` the ket index).

The represented vector is ``exp(log_scale) * contract(tensors)``; the engine
keeps the tensors at Frobenius norm 1 and moves the overall scale into
``log_scale``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .paulis import PAULI, Observable, PauliString
from .tensor_core import qr, truncated_svd

__all__ = [
    "TnState",
    "product_density",
    "product_pure",
    "expectation",
    "trace",
    "frobenius_norm",
    "mpo_entanglement_entropy",
    "max_entropy",
    "canonicalize",
    "compress",
    "save_state",
    "load_state",
]

_FORMAT_VERSION = 1


def superket_vector(op: np.ndarray) -> np.ndarray:
    """Vector ``w`` with ``w . vec(rho) = Tr(op @ rho)`` for a single qubit."""
    # Tr(O rho) = sum_ij O[j, i] rho[i, j], entry (i, j) stored at 2*i + j
    return np.asarray(op).T.reshape(4)


def vectorize(rho: np.ndarray) -> np.ndarray:
    """Site-interleaved vectorization of an ``n``-qubit density matrix.

    The returned vector is indexed by ``(i_1 j_1)(i_2 j_2)...`` with each pair
    linearized as ``2 * i + j``, matching the VMPO physical index order.
    """
    dim = rho.shape[0]
    n = dim.bit_length() - 1
    t = np.asarray(rho).reshape((2,) * (2 * n))
    perm = [ax for k in range(n) for ax in (k, n + k)]
    return t.transpose(perm).reshape(-1)


def unvectorize(vec: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    n = (vec.size.bit_length() - 1) // 2
    t = np.asarray(vec).reshape((2,) * (2 * n))
    perm = [2 * k for k in range(n)] + [2 * k + 1 for k in range(n)]
    return t.transpose(perm).reshape(2**n, 2**n)


@dataclass
class TnState:
    """Matrix-product state with site tensors of shape ``(left, phys, right)``.

    Attributes:
        tensors: Site tensors; boundary bonds have extent 1.
        phys_dim: 2 for pure states, 4 for vectorized density matrices.
        center: Orthogonality center, or ``None`` if unknown.
        log_fidelity: Accumulated ``sum(log f_l)`` over applied subcircuits.
        log_scale: Log of the overall scalar prefactor.
    """

    tensors: list[np.ndarray]
    phys_dim: int
    center: int | None = None
    log_fidelity: float = 0.0
    log_scale: float = 0.0

    def __post_init__(self):
        if self.phys_dim not in (2, 4):
            raise ValueError("phys_dim must be 2 or 4")
        if not self.tensors:
            raise ValueError("a state needs at least one site")
        self.tensors = [np.asarray(t, dtype=np.complex128) for t in self.tensors]
        self.check()

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def copy(self) -> TnState:
        return TnState([t.copy() for t in self.tensors], self.phys_dim, self.center, self.log_fidelity, self.log_scale)

    def check(self) -> None:
        """Raise ``ValueError`` if bond extents or physical dimensions are inconsistent."""
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise ValueError("boundary bonds must have extent 1")
        for k, t in enumerate(self.tensors):
            if t.ndim != 3 or t.shape[1] != self.phys_dim:
                raise ValueError(f"site {k} has shape {t.shape}")
            if k > 0 and self.tensors[k - 1].shape[2] != t.shape[0]:
                raise ValueError(f"bond mismatch between sites {k - 1} and {k}")

    # -- gauge ------------------------------------------------------------

    def _shift_right(self, k: int) -> None:
        a = self.tensors[k]
        dl, d, dr = a.shape
        q, r = qr(a.reshape(dl * d, dr))
        self.tensors[k] = q.reshape(dl, d, q.shape[1])
        self.tensors[k + 1] = np.tensordot(r, self.tensors[k + 1], axes=(1, 0))

    def _shift_left(self, k: int) -> None:
        b = self.tensors[k]
        dl, d, dr = b.shape
        q, r = qr(b.reshape(dl, d * dr).conj().T)
        self.tensors[k] = q.conj().T.reshape(q.shape[1], d, dr)
        self.tensors[k - 1] = np.tensordot(self.tensors[k - 1], r.conj().T, axes=(2, 0))

    def move_center(self, target: int) -> None:
        """Bring the orthogonality center to ``target`` with QR sweeps."""
        n = self.n_sites
        if not 0 <= target < n:
            raise IndexError(f"site {target} out of range")
        if self.center is None:
            for k in range(target):
                self._shift_right(k)
            for k in range(n - 1, target, -1):
                self._shift_left(k)
        else:
            for k in range(self.center, target):
                self._shift_right(k)
            for k in range(self.center, target, -1):
                self._shift_left(k)
        self.center = target

    def canonicalize(self, center: int) -> TnState:
        self.center = None
        self.move_center(center)
        return self

    def is_canonical(self, atol: float = 1e-10) -> bool:
        if self.center is None:
            return False
        for k, t in enumerate(self.tensors):
            dl, d, dr = t.shape
            if k < self.center:
                m = t.reshape(dl * d, dr)
                if not np.allclose(m.conj().T @ m, np.eye(dr), atol=atol):
                    return False
            elif k > self.center:
                m = t.reshape(dl, d * dr)
                if not np.allclose(m @ m.conj().T, np.eye(dl), atol=atol):
                    return False
        return True

    # -- norms ------------------------------------------------------------

    def raw_norm(self) -> float:
        """Frobenius norm of the contracted tensors, ignoring ``log_scale``."""
        if self.center is not None:
            return float(np.linalg.norm(self.tensors[self.center]))
        env = np.ones((1, 1), dtype=complex)
        for t in self.tensors:
            env = np.tensordot(env, t, axes=(1, 0))
            env = np.tensordot(t.conj(), env, axes=([0, 1], [0, 1]))
        return float(np.sqrt(abs(env[0, 0])))

    def normalize(self) -> float:
        """Scale the tensors to norm 1, absorbing the factor into ``log_scale``."""
        nrm = self.raw_norm()
        k = self.center if self.center is not None else 0
        self.tensors[k] = self.tensors[k] / nrm
        self.log_scale += float(np.log(nrm))
        return nrm

    def scale(self, factor: float) -> TnState:
        self.log_scale += float(np.log(abs(factor)))
        if factor < 0:
            self.tensors[0] = -self.tensors[0]
        return self

    # -- operator application ---------------------------------------------

    def apply_one_site(self, op: np.ndarray, site: int, unitary: bool = False) -> None:
        """Apply a ``d x d`` operator to the physical leg of ``site``.

        Non-unitary operators move the orthogonality center to ``site`` first
        so that the canonical form survives.
        """
        if not unitary and self.center != site:
            self.move_center(site)
        self.tensors[site] = np.einsum("pq,aqb->apb", op, self.tensors[site])

    def apply_two_site(self, op: np.ndarray, site: int, max_bond: int | None = None, cutoff: float = 0.0) -> float:
        """Apply a ``d^2 x d^2`` operator on ``(site, site + 1)`` and truncate.

        The state is brought to canonical form on the pair, the operator is
        applied, and the pair is split by a truncated SVD. The kept singular
        values are rescaled so the tensors keep Frobenius norm 1; the
        pre-truncation norm goes into ``log_scale``.

        Returns:
            The kept weight ``sum(kept s^2) / sum(s^2)`` of the truncation.
        """
        d = self.phys_dim
        if self.center not in (site, site + 1):
            self.move_center(site)
        a, b = self.tensors[site], self.tensors[site + 1]
        dl, dr = a.shape[0], b.shape[2]
        theta = np.tensordot(a, b, axes=(2, 0))  # (dl, d, d, dr)
        theta = np.tensordot(op.reshape(d, d, d, d), theta, axes=([2, 3], [1, 2]))  # (d, d, dl, dr)
        theta = theta.transpose(2, 0, 1, 3).reshape(dl * d, d * dr)
        total = np.linalg.norm(theta)
        if total == 0.0:
            raise FloatingPointError("state vanished under a two-site operator")
        res = truncated_svd(theta, max_bond or min(theta.shape), cutoff)
        s = res.s / np.linalg.norm(res.s)
        k = res.rank
        self.tensors[site] = res.u.reshape(dl, d, k)
        self.tensors[site + 1] = (s[:, None] * res.vh).reshape(k, d, dr)
        self.center = site + 1
        self.log_scale += float(np.log(total))
        return res.kept_weight

    # -- dense conversion -------------------------------------------------

    def to_dense(self) -> np.ndarray:
        """Full vector of length ``phys_dim ** n`` (including ``log_scale``)."""
        out = self.tensors[0].reshape(-1, self.tensors[0].shape[2])
        for t in self.tensors[1:]:
            out = np.tensordot(out, t, axes=(1, 0)).reshape(-1, t.shape[2])
        return out.reshape(-1) * np.exp(self.log_scale)


# -- constructors -------------------------------------------------------------


def product_pure(bits) -> TnState:
    """Computational basis state ``|b_1 ... b_n>`` as a bond-1 MPS."""
    bits = list(bits)
    if not bits:
        raise ValueError("need at least one site")
    tensors = []
    for b in bits:
        t = np.zeros((1, 2, 1), dtype=complex)
        t[0, int(b), 0] = 1.0
        tensors.append(t)
    return TnState(tensors, 2, center=0)


def product_density(bits) -> TnState:
    """Vectorized ``|b><b|`` as a bond-1 VMPO with unit trace and norm."""
    bits = list(bits)
    if not bits:
        raise ValueError("need at least one site")
    tensors = []
    for b in bits:
        t = np.zeros((1, 4, 1), dtype=complex)
        t[0, 3 * int(b), 0] = 1.0
        tensors.append(t)
    return TnState(tensors, 4, center=0)


# -- measurements -------------------------------------------------------------


def _density_contraction(state: TnState, local: dict[int, np.ndarray]) -> complex:
    ident = superket_vector(PAULI["I"])
    env = np.ones(1, dtype=complex)
    for k, t in enumerate(state.tensors):
        w = superket_vector(local[k]) if k in local else ident
        env = env @ np.tensordot(t, w, axes=(1, 0))
    return complex(env[0])


def _pure_sandwich(state: TnState, local: dict[int, np.ndarray]) -> complex:
    env = np.ones((1, 1), dtype=complex)
    for k, t in enumerate(state.tensors):
        ket = t if k not in local else np.einsum("pq,aqb->apb", local[k], t)
        env = np.tensordot(env, ket, axes=(1, 0))  # (a', p, b)
        env = np.tensordot(t.conj(), env, axes=([0, 1], [0, 1]))  # (b', b)
    return complex(env[0, 0])


def trace(state: TnState) -> complex:
    """``Tr(rho)`` of a VMPO, including the ``log_scale`` prefactor."""
    if state.phys_dim != 4:
        raise ValueError("trace is defined for vectorized density matrices")
    return _density_contraction(state, {}) * np.exp(state.log_scale)


def frobenius_norm(state: TnState) -> float:
    return state.raw_norm() * float(np.exp(state.log_scale))


def pauli_expectation(state: TnState, pauli: PauliString, imag_tol: float = 1e-8) -> float:
    """Normalized expectation of one Pauli string.

    Pure states return ``<psi|P|psi> / <psi|psi>``. VMPOs return
    ``Tr(P rho_h) / Tr(rho_h)`` with ``rho_h = (rho + rho^dag) / 2``: truncation
    preserves neither the trace nor, when singular values are degenerate at
    the cut, Hermiticity.

    Raises:
        ValueError: if a pure-state result has an imaginary part above ``imag_tol``.
    """
    if pauli.max_site() >= state.n_sites:
        raise IndexError(f"observable acts on site {pauli.max_site()} of a {state.n_sites}-site state")
    local = {s: PAULI[p] for s, p in pauli.ops}
    if state.phys_dim == 4:
        return float(_density_contraction(state, local).real / _density_contraction(state, {}).real)
    else:
        val = _pure_sandwich(state, local) / _pure_sandwich(state, {})
    if abs(val.imag) > imag_tol:
        raise ValueError(f"expectation of {pauli} has imaginary part {val.imag:.3e}")
    return float(val.real)


def expectation(state: TnState, obs: PauliString | Observable | str, imag_tol: float = 1e-8) -> float:
    """Expectation of a Pauli string, a Pauli sum or a parseable string such as ``"Z0 Z1"``."""
    if isinstance(obs, str):
        obs = PauliString.parse(obs)
    if isinstance(obs, PauliString):
        return pauli_expectation(state, obs, imag_tol)
    cache: dict[PauliString, float] = {}

    def value(p: PauliString) -> float:
        if p not in cache:
            cache[p] = 1.0 if not p.ops else pauli_expectation(state, p, imag_tol)
        return cache[p]

    return obs.evaluate(value)


# -- entanglement ---------------------------------------------------------------


def bond_spectrum(state: TnState, bond: int) -> np.ndarray:
    """Schmidt values across the cut between sites ``bond - 1`` and ``bond``."""
    if not 0 < bond < state.n_sites:
        raise IndexError(f"bond {bond} out of range (0, {state.n_sites})")
    state.move_center(bond)
    t = state.tensors[bond]
    return np.linalg.svd(t.reshape(t.shape[0], -1), compute_uv=False)


def _entropy(s: np.ndarray) -> float:
    p = s**2
    tot = p.sum()
    if tot == 0:
        return 0.0
    p = p[p > 0] / tot
    return float(-np.sum(p * np.log(p)))


def mpo_entanglement_entropy(state: TnState, bond: int) -> float:
    """Entropy of the normalized squared Schmidt values across ``bond``.

    For a VMPO this is the MPO entanglement entropy; for a pure MPS it is the
    usual entanglement entropy.
    """
    return _entropy(bond_spectrum(state, bond))


def max_entropy(state: TnState) -> float:
    return max((mpo_entanglement_entropy(state, b) for b in range(1, state.n_sites)), default=0.0)


# -- canonical form and compression -------------------------------------------


def canonicalize(state: TnState, center: int) -> TnState:
    return state.canonicalize(center)


def compress(state: TnState, max_bond: int, cutoff: float = 0.0) -> tuple[TnState, float]:
    """Sweep-truncate every bond to ``max_bond`` and renormalize to norm 1.

    Returns the state (modified in place) and the product of the kept-weight
    fractions of all truncations.
    """
    n = state.n_sites
    state.move_center(n - 1)
    state.normalize()
    kept = 1.0
    for k in range(n - 1, 0, -1):
        t = state.tensors[k]
        dl, d, dr = t.shape
        res = truncated_svd(t.reshape(dl, d * dr), max_bond, cutoff)
        kept *= res.kept_weight
        s = res.s / np.linalg.norm(res.s)
        state.tensors[k] = res.vh.reshape(res.rank, d, dr)
        state.tensors[k - 1] = np.tensordot(state.tensors[k - 1], res.u * s, axes=(2, 0))
    state.center = 0
    return state, kept


# -- checkpointing ------------------------------------------------------------


def save_state(state: TnState, path) -> None:
    """Write ``state`` to an ``.npz`` container.

    The archive holds a JSON ``header`` (format version, ``phys_dim``,
    ``center``, ``log_fidelity``, ``log_scale`` and the list of site shapes)
    and one complex array ``site_<k>`` per site.
    """
    header = {
        "format": "nzne-tnstate",
        "version": _FORMAT_VERSION,
        "phys_dim": state.phys_dim,
        "center": state.center,
        "log_fidelity": state.log_fidelity,
        "log_scale": state.log_scale,
        "shapes": [list(t.shape) for t in state.tensors],
    }
    arrays = {f"site_{k}": t for k, t in enumerate(state.tensors)}
    with open(Path(path), "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header)), **arrays)


def load_state(path) -> TnState:
    with np.load(Path(path), allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format") != "nzne-tnstate":
            raise ValueError("not a TnState checkpoint")
        tensors = [data[f"site_{k}"] for k in range(len(header["shapes"]))]
    for t, shape in zip(tensors, header["shapes"]):
        if list(t.shape) != shape:
            raise ValueError("checkpoint shape header does not match payload")
    return TnState(tensors, header["phys_dim"], header["center"], header["log_fidelity"], header["log_scale"])
