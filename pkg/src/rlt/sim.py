"""Forward simulation of EAC experiments."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from functools import reduce
from typing import Sequence

import numpy as np

from . import reps
from .eac import GateSet, _labels
from .linalg import expm

_PREP_KETS = {
    "0": np.array([1, 0], complex),
    "1": np.array([0, 1], complex),
    "+": np.array([1, 1], complex) / np.sqrt(2),
    "+i": np.array([1, 1j], complex) / np.sqrt(2),
}
_EIGVECS = {
    "X": (np.array([1, 1], complex) / np.sqrt(2), np.array([1, -1], complex) / np.sqrt(2)),
    "Y": (np.array([1, 1j], complex) / np.sqrt(2), np.array([1, -1j], complex) / np.sqrt(2)),
    "Z": (np.array([1, 0], complex), np.array([0, 1], complex)),
}


class NonCPTPError(ValueError):
    pass


@dataclass(frozen=True)
class SPAMModel:
    """Preparations and POVMs, optionally with HS error channels attached.

    ``prep_channel`` acts on every prepared state; ``meas_channel`` acts just
    before every measurement.
    """

    num_qubits: int
    preparations: tuple[np.ndarray, ...]
    povms: tuple[tuple[np.ndarray, ...], ...]
    prep_labels: tuple[str, ...] = ()
    povm_labels: tuple[str, ...] = ()
    prep_channel: np.ndarray | None = field(default=None, repr=False)
    meas_channel: np.ndarray | None = field(default=None, repr=False)

    @property
    def basis(self) -> reps.MatrixBasis:
        return reps.pauli_basis(self.num_qubits)

    @property
    def shape(self) -> tuple[int, int, int]:
        return len(self.preparations), len(self.povms), len(self.povms[0])

    def prep_vectors(self) -> np.ndarray:
        """(n_prep, d**2) real vectorized states, error channel applied."""
        v = np.array([reps.vectorize(r, self.basis) for r in self.preparations]).real
        if self.prep_channel is not None:
            v = v @ self.prep_channel.T
        return v

    def effect_vectors(self) -> np.ndarray:
        """(n_povm, n_outcome, d**2) real vectorized effects, error channel applied."""
        v = np.array([[reps.vectorize(e, self.basis) for e in povm] for povm in self.povms]).real
        if self.meas_channel is not None:
            v = v @ self.meas_channel
        return v

    def ideal(self) -> "SPAMModel":
        return replace(self, prep_channel=None, meas_channel=None)

    def validate(self, atol: float = 1e-10) -> None:
        d = 2**self.num_qubits
        for rho in self.preparations:
            if abs(np.trace(rho) - 1) > atol or np.linalg.eigvalsh(rho)[0] < -atol:
                raise ValueError("preparation is not a density matrix")
        for povm in self.povms:
            if np.linalg.norm(sum(povm) - np.eye(d)) > atol:
                raise ValueError("POVM elements do not sum to identity")
            if any(np.linalg.eigvalsh(e)[0] < -atol for e in povm):
                raise ValueError("POVM element is not PSD")


def _ket_dm(k: np.ndarray) -> np.ndarray:
    return np.outer(k, k.conj())


def qpt_circuit_set(num_qubits: int) -> SPAMModel:
    """Informationally complete Pauli preparations and measurements."""
    if num_qubits not in (1, 2):
        raise ValueError("QPT circuit set supports 1 or 2 qubits")
    preps, prep_labels = [], []
    for combo in itertools.product(_PREP_KETS, repeat=num_qubits):
        preps.append(_ket_dm(reduce(np.kron, (_PREP_KETS[c] for c in combo))))
        prep_labels.append(",".join(combo))
    povms, povm_labels = [], []
    for axes in itertools.product("XYZ", repeat=num_qubits):
        effects = []
        for bits in itertools.product((0, 1), repeat=num_qubits):
            ket = reduce(np.kron, (_EIGVECS[a][b] for a, b in zip(axes, bits)))
            effects.append(_ket_dm(ket))
        povms.append(tuple(effects))
        povm_labels.append("".join(axes))
    return SPAMModel(num_qubits, tuple(preps), tuple(povms), tuple(prep_labels), tuple(povm_labels))


def depolarizing_hs(p: float, num_qubits: int) -> np.ndarray:
    m = 4**num_qubits
    g = (1 - p) * np.eye(m)
    g[0, 0] = 1.0
    return g


def rotation_hs(angle: float, axis: Sequence[float], num_qubits: int) -> np.ndarray:
    """Same single-qubit rotation on every qubit."""
    axis = np.asarray(axis, float)
    axis = axis / np.linalg.norm(axis)
    h1 = 0.5 * angle * sum(c * reps.PAULI[p] for c, p in zip(axis, "XYZ"))
    u1 = expm(-1j * h1)
    u = reduce(np.kron, [u1] * num_qubits)
    return reps.hs_of_unitary(u, reps.pauli_basis(num_qubits))


def with_spam_error(
    spam: SPAMModel,
    depolarizing: float = 0.0,
    rotation: float = 0.0,
    prep_axis: Sequence[float] = (1.0, 1.0, 1.0),
    meas_axis: Sequence[float] = (1.0, -1.0, 1.0),
) -> SPAMModel:
    """Attach depolarizing-plus-rotation error channels to preparation and measurement."""
    n = spam.num_qubits
    prep = depolarizing_hs(depolarizing, n) @ rotation_hs(rotation, prep_axis, n)
    meas = rotation_hs(rotation, meas_axis, n) @ depolarizing_hs(depolarizing, n)
    return replace(spam, prep_channel=prep, meas_channel=meas)


def check_cptp(g: np.ndarray, basis: reps.MatrixBasis, atol: float = 1e-8, name: str = "gate") -> None:
    tp = reps.tp_residual(g, basis)
    cp = reps.cp_min_eig(g, basis)
    if tp > atol or cp < -atol:
        raise NonCPTPError(f"{name} is not CPTP (tp residual {tp:.3g}, min CJ eigenvalue {cp:.3g})")


def noisy_unit(gs: GateSet, seq: Sequence, deltas: Sequence | None = None, *, check: bool = True) -> np.ndarray:
    """HS matrix of one repetition unit with errors injected into the generators."""
    basis = reps.default_basis(gs.d)
    deltas = list(deltas) if deltas is not None else [None] * len(gs)
    gmats = {}
    for i in set(_labels(gs, seq)):
        lind = gs[i].lindbladian if deltas[i] is None else gs[i].lindbladian + deltas[i]
        gmats[i] = expm(lind)
        if check:
            check_cptp(gmats[i], basis, name=gs[i].name)
    g = np.eye(gs.m)
    for i in _labels(gs, seq):
        g = gmats[i] @ g
    return g


def probabilities_of(g: np.ndarray, spam: SPAMModel) -> np.ndarray:
    """p[prep, povm, outcome] = <<Pi_x| G |rho>>."""
    p = np.einsum("uxa,ab,sb->sux", spam.effect_vectors(), g, spam.prep_vectors())
    return p


def exact_probabilities(gs: GateSet, seq: Sequence, deltas, spam: SPAMModel, n: int) -> np.ndarray:
    if n < 0:
        raise ValueError("n must be non-negative")
    g = np.linalg.matrix_power(noisy_unit(gs, seq, deltas), n)
    return probabilities_of(g, spam)


@dataclass(frozen=True)
class ShotTable:
    counts: np.ndarray  # (n_prep, n_povm, n_outcome)
    shots: int
    seed: int

    def frequencies(self) -> np.ndarray:
        return self.counts / self.shots


def sample_counts(probs, shots: int, seed: int) -> ShotTable:
    """Multinomial draw of ``shots`` outcomes per (preparation, POVM) cell."""
    if shots <= 0:
        raise ValueError("shots must be positive")
    p = np.clip(np.asarray(probs, float), 0.0, None)
    p = p / p.sum(axis=-1, keepdims=True)
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, p)
    return ShotTable(counts.astype(np.int64), int(shots), int(seed))
