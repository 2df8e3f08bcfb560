"""Noisy quantum circuit emulation with vectorized MPOs and non-zero noise extrapolation."""

from __future__ import annotations

from .circuits import Circuit, Gate, build_fhm, build_random_brickwork, build_tfim, build_xym
from .engine import EmulationRecord, emulate_state, fidelity_scan, run_emulation
from .extrapolation import NzneResult, extrapolate_fidelity, run_nzne
from .noise import Channel, NoiseModel, noise_model
from .paulis import Observable, PauliString
from .tn_state import TnState

__version__ = "0.1.0"

__all__ = [
    "Channel",
    "Circuit",
    "EmulationRecord",
    "Gate",
    "NoiseModel",
    "NzneResult",
    "Observable",
    "PauliString",
    "TnState",
    "build_fhm",
    "build_random_brickwork",
    "build_tfim",
    "build_xym",
    "emulate_state",
    "extrapolate_fidelity",
    "fidelity_scan",
    "noise_model",
    "run_emulation",
    "run_nzne",
]
