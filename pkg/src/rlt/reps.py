"""Quantum-operation representations.

Conventions
-----------
* ``|A>>_a = Tr[B_a^dag A]`` for an orthonormal Hermitian basis ``B``.
* HS (Pauli-transfer) matrix ``G_ab = Tr[B_a^dag G(B_b)]``; sequential
  composition is ``HS(G2 o G1) = G2 @ G1``.
* Choi matrix ``CJ(G) = sum_ij G(E_ij) (x) E_ij = sum_ab G_ab B_a (x) conj(B_b)``,
  so the identity channel maps to ``|Omega><Omega|`` with
  ``|Omega> = sum_i |ii>`` (trace ``d``).
* Superoperators on row-major flattened matrices satisfy
  ``vec(A X B) = (A (x) B^T) vec(X)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from typing import Iterable, Sequence

import numpy as np

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class MatrixBasis:
    """Orthonormal Hermitian basis of d x d matrices, identity element first."""

    elements: np.ndarray  # (d**2, d, d)
    labels: tuple[str, ...] = field(default=())

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    def __len__(self) -> int:
        return self.elements.shape[0]

    @property
    def change(self) -> np.ndarray:
        """Unitary W with ``|X>>_basis = W @ X.ravel()``."""
        return self.elements.conj().reshape(len(self), -1)

    def gram(self) -> np.ndarray:
        e = self.elements
        return np.einsum("aij,bij->ab", e.conj(), e)


def pauli_string(label: str) -> np.ndarray:
    return reduce(np.kron, (PAULI[c] for c in label.upper()))


@lru_cache(maxsize=None)
def pauli_basis(num_qubits: int) -> MatrixBasis:
    """Normalized Pauli strings, lexicographic with I < X < Y < Z per qubit."""
    if num_qubits < 1:
        raise ValueError("num_qubits must be >= 1")
    labels = tuple("".join(p) for p in itertools.product("IXYZ", repeat=num_qubits))
    d = 2**num_qubits
    elements = np.array([pauli_string(s) for s in labels]) / np.sqrt(d)
    elements.setflags(write=False)
    return MatrixBasis(elements, labels)


@lru_cache(maxsize=None)
def gell_mann_basis(d: int) -> MatrixBasis:
    """Normalized generalized Gell-Mann basis (identity first)."""
    if d < 2:
        raise ValueError("d must be >= 2")
    mats, labels = [np.eye(d, dtype=complex) / np.sqrt(d)], ["I"]
    for j in range(d):
        for k in range(j + 1, d):
            s = np.zeros((d, d), complex)
            s[j, k] = s[k, j] = 1 / np.sqrt(2)
            a = np.zeros((d, d), complex)
            a[j, k], a[k, j] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            mats += [s, a]
            labels += [f"S{j}{k}", f"A{j}{k}"]
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1
        diag[l] = -l
        mats.append(np.diag(diag / np.sqrt(l * (l + 1))).astype(complex))
        labels.append(f"D{l}")
    elements = np.array(mats)
    elements.setflags(write=False)
    return MatrixBasis(elements, tuple(labels))


def default_basis(d: int) -> MatrixBasis:
    n = int(round(np.log2(d)))
    if 2**n == d:
        return pauli_basis(n)
    return gell_mann_basis(d)


def _check_dim(a: np.ndarray, basis: MatrixBasis) -> None:
    if a.shape != (basis.dim, basis.dim):
        raise ValueError(f"matrix shape {a.shape} does not match basis dim {basis.dim}")


def _maybe_real(a: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    if np.iscomplexobj(a) and np.max(np.abs(a.imag), initial=0.0) <= tol * max(1.0, np.abs(a).max()):
        return np.ascontiguousarray(a.real)
    return a


def vectorize(a, basis: MatrixBasis) -> np.ndarray:
    a = np.asarray(a)
    _check_dim(a, basis)
    return basis.change @ a.ravel()


def devectorize(v, basis: MatrixBasis) -> np.ndarray:
    v = np.asarray(v)
    if v.shape != (len(basis),):
        raise ValueError(f"vector length {v.shape} does not match basis size {len(basis)}")
    return np.einsum("a,aij->ij", v, basis.elements)


def superop_to_hs(s: np.ndarray, basis: MatrixBasis) -> np.ndarray:
    """Convert a row-major elementary superoperator into the HS matrix in ``basis``."""
    w = basis.change
    return _maybe_real(w @ s @ w.conj().T)


def hs_to_superop(g: np.ndarray, basis: MatrixBasis) -> np.ndarray:
    w = basis.change
    return w.conj().T @ g @ w


def hs_of_map(fn, basis: MatrixBasis) -> np.ndarray:
    out = np.array([fn(b) for b in basis.elements])
    return _maybe_real(np.einsum("aij,bij->ab", basis.elements.conj(), out))


def hs_of_unitary(u, basis: MatrixBasis, atol: float = 1e-10) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    _check_dim(u, basis)
    if np.linalg.norm(u.conj().T @ u - np.eye(basis.dim)) > atol * basis.dim:
        raise ValueError("input is not unitary")
    return hs_of_map(lambda b: u @ b @ u.conj().T, basis)


def hs_to_cj(g: np.ndarray, basis: MatrixBasis) -> np.ndarray:
    e = basis.elements
    d = basis.dim
    cj = np.einsum("ab,aij,bkl->ikjl", g, e, e.conj()).reshape(d * d, d * d)
    return cj


def cj_to_hs(cj: np.ndarray, basis: MatrixBasis) -> np.ndarray:
    e = basis.elements
    d = basis.dim
    cj4 = np.asarray(cj).reshape(d, d, d, d)
    return _maybe_real(np.einsum("aij,bkl,ikjl->ab", e.conj(), e, cj4))


def omega(d: int) -> np.ndarray:
    """Unnormalized maximally entangled vector sum_i |ii>."""
    return np.eye(d).ravel().astype(complex)


def q_projector(d: int) -> np.ndarray:
    w = omega(d)
    return np.eye(d * d) - np.outer(w, w.conj()) / d


def _herm_min_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])


def tp_residual(g: np.ndarray, basis: MatrixBasis) -> float:
    vi = vectorize(np.eye(basis.dim), basis)
    return float(np.linalg.norm(vi.conj() @ g - vi.conj()))


def cp_min_eig(g: np.ndarray, basis: MatrixBasis) -> float:
    return _herm_min_eig(hs_to_cj(g, basis))


def q_isometry(d: int) -> np.ndarray:
    """Orthonormal basis (columns) of range(Q), the complement of sum_i |ii>."""
    w = omega(d) / np.sqrt(d)
    u, _, _ = np.linalg.svd(w[:, None], full_matrices=True)
    return u[:, 1:]


def lindblad_physicality(lind: np.ndarray, basis: MatrixBasis) -> dict[str, float]:
    """Trace-annihilation residual and conditional-CP minimum eigenvalues.

    ``cp_min_eig`` is the smallest eigenvalue of ``Q CJ Q`` itself, which is
    never positive because of the projected-out direction;
    ``cp_min_eig_restricted`` is the smallest eigenvalue on range(Q) and is
    the informative number.
    """
    vi = vectorize(np.eye(basis.dim), basis)
    q = q_projector(basis.dim)
    v = q_isometry(basis.dim)
    cj = hs_to_cj(lind, basis)
    return {
        "tp_residual": float(np.linalg.norm(vi.conj() @ lind)),
        "cp_min_eig": _herm_min_eig(q @ cj @ q),
        "cp_min_eig_restricted": _herm_min_eig(v.conj().T @ cj @ v),
    }


def is_hermitian(h, atol: float = 1e-12) -> bool:
    h = np.asarray(h)
    return h.shape[0] == h.shape[1] and np.allclose(h, h.conj().T, atol=atol)


def hamiltonian_lindbladian(h, basis: MatrixBasis) -> np.ndarray:
    """HS matrix of rho -> -i[H, rho]."""
    h = np.asarray(h, dtype=complex)
    _check_dim(h, basis)
    if not is_hermitian(h):
        raise ValueError("Hamiltonian must be Hermitian")
    eye = np.eye(basis.dim)
    return superop_to_hs(-1j * (np.kron(h, eye) - np.kron(eye, h.T)), basis)


def dissipator_lindbladian(jumps: Iterable, basis: MatrixBasis) -> np.ndarray:
    """HS matrix of rho -> sum_i A_i rho A_i^dag - {A_i^dag A_i, rho}/2."""
    d = basis.dim
    eye = np.eye(d)
    s = np.zeros((d * d, d * d), complex)
    for a in jumps:
        a = np.asarray(a, dtype=complex)
        _check_dim(a, basis)
        ada = a.conj().T @ a
        s += np.kron(a, a.conj()) - 0.5 * (np.kron(ada, eye) + np.kron(eye, ada.T))
    return superop_to_hs(s, basis)


def lindbladian(h=None, jumps: Sequence = (), *, basis: MatrixBasis) -> np.ndarray:
    out = np.zeros((len(basis), len(basis)))
    if h is not None:
        out = out + hamiltonian_lindbladian(h, basis)
    if len(jumps):
        out = out + dissipator_lindbladian(jumps, basis)
    return out
