"""Standard gate definitions as finite-time Lindbladians."""
from __future__ import annotations

import re
from typing import Mapping

import numpy as np

from . import reps

_ROTATION = re.compile(r"^([IXYZ]+?)(90|180|45)?$")


def pauli_hamiltonian(coeffs: Mapping[str, float]) -> np.ndarray:
    """H = sum_P c_P P over (unnormalized) Pauli strings of equal length."""
    labels = list(coeffs)
    if not labels:
        raise ValueError("empty Hamiltonian specification")
    n = len(labels[0])
    if any(len(s) != n for s in labels):
        raise ValueError("Pauli strings must have equal length")
    h = sum(float(c) * reps.pauli_string(s) for s, c in coeffs.items())
    return np.asarray(h, dtype=complex)


def rotation_hamiltonian(pauli: str, angle: float) -> np.ndarray:
    """Hamiltonian H with exp(-iH) = exp(-i angle P / 2)."""
    return 0.5 * angle * reps.pauli_string(pauli)


def hamiltonian_for(name: str, num_qubits: int = 1) -> np.ndarray:
    """Hamiltonian of a named gate.

    Names are ``T``, ``I`` or a Pauli string optionally suffixed with a
    rotation angle in degrees, e.g. ``X90``, ``ZX90``, ``IX90``. A bare Pauli
    string (``X``, ``ZZ``) is a 180 degree rotation. One-qubit names used on
    two qubits act on the first qubit.
    """
    key = name.upper()
    if key == "T":
        h = rotation_hamiltonian("Z", np.pi / 4)
    else:
        m = _ROTATION.match(key)
        if m is None:
            raise ValueError(f"unknown gate name {name!r}")
        pauli, deg = m.groups()
        if set(pauli) == {"I"}:
            h = np.zeros((2 ** len(pauli),) * 2, complex)
        else:
            h = rotation_hamiltonian(pauli, np.deg2rad(float(deg or 180)))
    size = int(round(np.log2(h.shape[0])))
    if size > num_qubits:
        raise ValueError(f"gate {name!r} acts on {size} qubits, gate set has {num_qubits}")
    if size < num_qubits:
        h = np.kron(h, np.eye(2 ** (num_qubits - size)))
    return h


def ideal_lindbladian(name: str, num_qubits: int = 1) -> np.ndarray:
    basis = reps.pauli_basis(num_qubits)
    return reps.hamiltonian_lindbladian(hamiltonian_for(name, num_qubits), basis)


def amplitude_damping_jump(gamma: float, num_qubits: int = 1, qubit: int = 0) -> np.ndarray:
    """sqrt(gamma) |0><1| on ``qubit``."""
    lower = np.array([[0, 1], [0, 0]], complex) * np.sqrt(gamma)
    ops = [np.eye(2)] * num_qubits
    ops[qubit] = lower
    out = ops[0]
    for o in ops[1:]:
        out = np.kron(out, o)
    return out
