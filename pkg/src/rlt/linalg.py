"""Dense complex matrix primitives.

Matrix exponential, principal logarithm, clustered spectral decomposition
into eigenprojectors and the diagonalizability diagnostics used by the
perturbation maps.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

#: eigenvector-matrix condition number above which a matrix is treated as defective
COND_LIMIT = 1e8
#: relative reconstruction residual above which a decomposition is rejected
RECON_LIMIT = 1e-6
#: relative distance of an eigenvalue from the negative real axis treated as on the cut
BRANCH_TOL = 1e-8


class LinalgError(ValueError):
    """Base class for numerical precondition failures."""


class NotDiagonalizableError(LinalgError):
    pass


class BranchCutError(LinalgError):
    """An eigenvalue lies on the closed negative real axis (or at zero)."""


def _square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise LinalgError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise LinalgError(f"{name} has non-finite entries")
    return a


def fro_norm(a) -> float:
    return float(np.linalg.norm(np.asarray(a), "fro"))


def expm(a) -> np.ndarray:
    """Matrix exponential e^A."""
    return scipy.linalg.expm(_square(a))


def logm_principal(g, *, branch_tol: float = BRANCH_TOL) -> np.ndarray:
    """Principal matrix logarithm.

    Eigenvalue imaginary parts of the result lie in (-pi, pi). Real input with
    no eigenvalue on the negative real axis gives a real result.

    Raises
    ------
    BranchCutError
        If ``g`` is singular or has an eigenvalue on the closed negative real
        axis, where the principal logarithm is undefined.
    """
    g = _square(g)
    scale = max(fro_norm(g), 1.0)
    lam = np.linalg.eigvals(g)
    if np.min(np.abs(lam)) < branch_tol * scale:
        raise BranchCutError("matrix is singular; logarithm undefined")
    on_cut = (lam.real < 0) & (np.abs(lam.imag) <= branch_tol * np.abs(lam))
    if np.any(on_cut):
        raise BranchCutError(
            f"eigenvalue(s) {lam[on_cut]} on the negative real axis (branch cut)"
        )
    out = scipy.linalg.logm(g)
    if np.isrealobj(g):
        if np.max(np.abs(np.imag(out)), initial=0.0) > 1e-8 * scale:
            raise BranchCutError("principal logarithm of real matrix is not real")
        out = np.real(out)
    return np.asarray(out)


@dataclass(frozen=True)
class SpectralDecomposition:
    """A = sum_i a_i P_i with distinct eigenvalues a_i and eigenprojectors P_i."""

    eigenvalues: np.ndarray
    projectors: np.ndarray  # shape (n_clusters, m, m)
    cond: float = 1.0

    @property
    def dim(self) -> int:
        return self.projectors.shape[1]

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        return np.einsum("i,ijk->jk", self.eigenvalues, self.projectors)

    def ranks(self) -> list[int]:
        return [int(round(np.trace(p).real)) for p in self.projectors]


def _cluster(values: np.ndarray, tol: float) -> list[list[int]]:
    """Single-linkage clustering of complex values closer than ``tol``."""
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    dist = np.abs(values[:, None] - values[None, :])
    for i, j in zip(*np.nonzero(np.triu(dist <= tol, k=1))):
        parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: (values[g].real.mean(), values[g].imag.mean()))


@lru_cache(maxsize=None)
def _frame(m: int) -> np.ndarray:
    q, r = np.linalg.qr(np.random.default_rng(20230611 + m).normal(size=(m, m)))
    q = q * np.sign(np.diag(r))
    q.setflags(write=False)
    return q


def eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and right eigenvectors, solved in a fixed random orthogonal frame.

    LAPACK balancing rescales rows/columns whose entries are near round-off
    (e.g. the trace-preserving row of a Lindbladian), which can cost eight
    digits of accuracy. Rotating first removes the tiny entries.
    """
    a = _square(a)
    q = _frame(a.shape[0])
    lam, w = np.linalg.eig(q @ a @ q.T)
    return lam, q.T @ w


def spectral_decompose(a, cluster_tol: float | None = None) -> SpectralDecomposition:
    """Spectral decomposition of a diagonalizable matrix.

    Eigenvalues closer than ``cluster_tol`` (default ``1e-9 * ||A||_F``) are
    merged, and their rank-1 spectral projectors summed.

    Raises
    ------
    NotDiagonalizableError
        If the eigenvector matrix has condition number above ``COND_LIMIT`` or
        the decomposition fails to reconstruct ``a``.
    """
    a = _square(a)
    m = a.shape[0]
    norm = fro_norm(a)
    if cluster_tol is None:
        cluster_tol = 1e-9 * norm
    if norm == 0.0:
        return SpectralDecomposition(np.zeros(1, complex), np.eye(m, dtype=complex)[None], 1.0)
    lam, v = eig(a)
    cond = np.linalg.cond(v)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NotDiagonalizableError(
            f"eigenvector matrix condition number {cond:.3g} exceeds {COND_LIMIT:.0e}"
        )
    vinv = np.linalg.inv(v)
    groups = _cluster(lam, cluster_tol)
    values = np.array([lam[g].mean() for g in groups])
    proj = np.array([v[:, g] @ vinv[g, :] for g in groups])
    sd = SpectralDecomposition(values, proj, float(cond))
    if fro_norm(sd.reconstruct() - a) > RECON_LIMIT * norm:
        raise NotDiagonalizableError("spectral reconstruction residual too large")
    return sd


def is_diagonalizable(a) -> bool:
    try:
        spectral_decompose(a)
    except NotDiagonalizableError:
        return False
    return True
