"""
A 60-qubit reference from free fermions
=======================================

The XY chain circuit consists of matchgates only, and the matchgate
depolarizing channel inserts Paulis that keep it that way. Each noise
trajectory is then a fermionic Gaussian state described by a 120x120
covariance matrix, so exact references for 60 qubits cost seconds.

Run with ``python3 demos/03_matchgate_reference.py``.
"""

from __future__ import annotations

from nzne import build_xym
from nzne.matchgate import read_observable, run_covariance_trajectory, trajectory_mean

circuit = build_xym(60)
print(f"{circuit.n_qubits} qubits, {circuit.count(2)} two-qubit gates")

# noiseless run: every trajectory is the same
state = run_covariance_trajectory(circuit, [0] * circuit.count())
for name in ("YX_30_31", "Z_30"):
    print(f"noiseless {name:<9} {read_observable(state, circuit.observables[name]): .4f}")

# noisy averages; the standard error shrinks as 1/sqrt(samples)
for n in (500, 2000, 8000):
    res = trajectory_mean(circuit, 0.002, n, ["YX_30_31", "Z_30"], seed=0)
    print(
        f"{n:5d} samples  YX_30_31 {res.mean['YX_30_31']: .4f} +- {res.sem['YX_30_31']:.4f}"
        f"   Z_30 {res.mean['Z_30']: .4f} +- {res.sem['Z_30']:.4f}"
    )
