"""First-order perturbation maps for products and powers of matrix exponentials.

Given a diagonalizable ``A = sum_j a_j P_j`` the six maps

    dcl_A(X)  = sum_jk l_jk P_j X P_k          e^{A+B} ~ e^{dcl_A(B)} e^A
    dcr_A(X)  = sum_jk l_kj P_j X P_k          e^{A+B} ~ e^A e^{dcr_A(B)}
    cml_A(X)  = sum_jk P_j X P_k / l_jk        e^B e^A ~ e^{A + cml_A(B)}
    cmr_A(X)  = sum_jk P_j X P_k / l_kj        e^A e^B ~ e^{A + cmr_A(B)}
    ssp_A(X)  = sum_j P_j X P_j
    sspc_A(X) = sum_{j != k} P_j X P_k

with ``l_jk = (e^{a_j - a_k} - 1) / (a_j - a_k)`` (``1`` on the diagonal) are
stored as explicit ``m**2 x m**2`` matrices acting on row-major flattened
``m x m`` matrices, so composition of maps is a matrix product.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    LinalgError,
    SpectralDecomposition,
    expm,
    fro_norm,
    logm_principal,
    spectral_decompose,
)

#: |l_jk| below this (e^{a_j - a_k} = 1 with a_j != a_k) makes cml/cmr undefined
SINGULAR_TOL = 1e-6
MAP_LABELS = ("dcl", "dcr", "cml", "cmr", "ssp", "sspc", "composed", "id", "zero")


@dataclass(frozen=True)
class SuperMap:
    """Linear map on m x m matrices held as its m**2 x m**2 matrix."""

    matrix: np.ndarray
    label: str = "composed"

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x)
        m = self.dim
        return (self.matrix @ x.reshape(m * m)).reshape(m, m)

    def __matmul__(self, other: "SuperMap") -> "SuperMap":
        return SuperMap(_real_if_close(self.matrix @ other.matrix), "composed")

    def __add__(self, other: "SuperMap") -> "SuperMap":
        return SuperMap(_real_if_close(self.matrix + other.matrix), "composed")

    def __sub__(self, other: "SuperMap") -> "SuperMap":
        return SuperMap(_real_if_close(self.matrix - other.matrix), "composed")

    def __rmul__(self, c) -> "SuperMap":
        return SuperMap(_real_if_close(c * self.matrix), "composed")

    @classmethod
    def identity(cls, m: int) -> "SuperMap":
        return cls(np.eye(m * m), "id")

    @classmethod
    def zero(cls, m: int) -> "SuperMap":
        return cls(np.zeros((m * m, m * m)), "zero")


def _real_if_close(a: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    if np.iscomplexobj(a):
        scale = max(1.0, float(np.abs(a).max(initial=0.0)))
        if np.abs(a.imag).max(initial=0.0) <= tol * scale:
            return np.ascontiguousarray(a.real)
    return a


@dataclass(frozen=True)
class SingularityReport:
    """Eigenvalue pairs violating e^{a_j - a_k} != 1."""

    pairs: tuple[tuple[int, int], ...] = ()
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    threshold: float = SINGULAR_TOL

    @property
    def is_singular(self) -> bool:
        return bool(self.pairs)

    def describe(self) -> str:
        if not self.pairs:
            return "no singular eigenvalue pairs"
        items = ", ".join(
            f"({self.eigenvalues[j]:.6g}, {self.eigenvalues[k]:.6g})" for j, k in self.pairs
        )
        return f"eigenvalue pairs with exp(a_j - a_k) = 1: {items}"


class SingularityError(LinalgError):
    def __init__(self, report: SingularityReport, message: str | None = None):
        self.report = report
        super().__init__(message or f"composition maps undefined: {report.describe()}")


def _decomp(a) -> SpectralDecomposition:
    return a if isinstance(a, SpectralDecomposition) else spectral_decompose(a)


def ell_table(sd: SpectralDecomposition) -> np.ndarray:
    a = np.asarray(sd.eigenvalues)
    diff = a[:, None] - a[None, :]
    out = np.ones_like(diff)
    off = ~np.eye(len(a), dtype=bool)
    out[off] = np.expm1(diff[off]) / diff[off]
    return out


def singularity_report(sd: SpectralDecomposition, threshold: float = SINGULAR_TOL) -> SingularityReport:
    """Pairs of distinct eigenvalues with e^{a_j - a_k} = 1, i.e. |l_jk| < threshold.

    Nearly degenerate pairs have l_jk ~ 1 and are not singular.
    """
    a = np.asarray(sd.eigenvalues)
    gap = np.abs(ell_table(sd))
    pairs = tuple(
        (int(j), int(k)) for j, k in zip(*np.nonzero(gap < threshold)) if j < k
    )
    return SingularityReport(pairs, a.copy(), threshold)


def weighted_map(sd: SpectralDecomposition, weights: np.ndarray, label: str = "composed") -> SuperMap:
    """Matrix of X -> sum_jk w_jk P_j X P_k."""
    p = sd.projectors
    m = sd.dim
    rep = np.einsum("jk,jab,kdc->acbd", weights, p, p, optimize=True).reshape(m * m, m * m)
    return SuperMap(_real_if_close(rep), label)


def dcl_map(a) -> SuperMap:
    sd = _decomp(a)
    return weighted_map(sd, ell_table(sd), "dcl")


def dcr_map(a) -> SuperMap:
    sd = _decomp(a)
    return weighted_map(sd, ell_table(sd).T, "dcr")


def _require_nonsingular(sd: SpectralDecomposition, threshold: float) -> None:
    report = singularity_report(sd, threshold)
    if report.is_singular:
        raise SingularityError(report)


def cml_map(a, threshold: float = SINGULAR_TOL) -> SuperMap:
    sd = _decomp(a)
    _require_nonsingular(sd, threshold)
    return weighted_map(sd, 1.0 / ell_table(sd), "cml")


def cmr_map(a, threshold: float = SINGULAR_TOL) -> SuperMap:
    sd = _decomp(a)
    _require_nonsingular(sd, threshold)
    return weighted_map(sd, 1.0 / ell_table(sd).T, "cmr")


def build_maps(a, threshold: float = SINGULAR_TOL) -> dict[str, SuperMap]:
    """dcl, dcr, cml and cmr of ``a`` (a matrix or its spectral decomposition).

    Raises
    ------
    SingularityError
        If some eigenvalue pair has ``e^{a_j - a_k} = 1``. The exception keeps
        the always-defined ``dcl``/``dcr`` maps in ``partial``.
    """
    sd = _decomp(a)
    ell = ell_table(sd)
    maps = {"dcl": weighted_map(sd, ell, "dcl"), "dcr": weighted_map(sd, ell.T, "dcr")}
    report = singularity_report(sd, threshold)
    if report.is_singular:
        err = SingularityError(report)
        err.partial = maps
        raise err
    maps["cml"] = weighted_map(sd, 1.0 / ell, "cml")
    maps["cmr"] = weighted_map(sd, 1.0 / ell.T, "cmr")
    return maps


def dcl_apply(a, b) -> np.ndarray:
    return dcl_map(a)(b)


def dcr_apply(a, b) -> np.ndarray:
    return dcr_map(a)(b)


def cml_apply(a, b) -> np.ndarray:
    return cml_map(a)(b)


def cmr_apply(a, b) -> np.ndarray:
    return cmr_map(a)(b)


def oracle_dcl_quadrature(a, b, steps: int = 64, side: str = "left") -> np.ndarray:
    """Gauss-Legendre evaluation of int_0^1 e^{sA} B e^{-sA} ds.

    Needs no eigendecomposition, so it also works for defective ``a``.
    ``side="right"`` integrates e^{-sA} B e^{sA}, the dcr counterpart.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    nodes, wts = np.polynomial.legendre.leggauss(steps)
    s_vals = 0.5 * (nodes + 1.0)
    sign = 1.0 if side == "left" else -1.0
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.result_type(a, b, float))
    for s, w in zip(s_vals, 0.5 * wts):
        out = out + w * expm(sign * s * a) @ b @ expm(-sign * s * a)
    return out


def compose_two(a, a_prime, threshold: float = SINGULAR_TOL) -> dict:
    """Generator transforms for the product e^{A+B} e^{A'+B'}.

    ``A'`` acts first. Returns ``C = ln(e^A e^A')`` together with
    ``map_B = cml_C o dcl_A`` and ``map_Bprime = cmr_C o dcr_A'``.
    """
    a = np.asarray(a)
    a_prime = np.asarray(a_prime)
    c = logm_principal(expm(a) @ expm(a_prime))
    maps_c = build_maps(c, threshold)
    return {
        "C": c,
        "map_B": maps_c["cml"] @ dcl_map(a),
        "map_Bprime": maps_c["cmr"] @ dcr_map(a_prime),
    }


def repetition_split(a) -> dict[str, SuperMap]:
    sd = _decomp(a)
    eye = np.eye(len(sd))
    return {"ssp": weighted_map(sd, eye, "ssp"), "sspc": weighted_map(sd, 1.0 - eye, "sspc")}


def has_period(a, k: int, tol: float = 1e-8) -> bool:
    g = expm(np.asarray(a))
    return fro_norm(np.linalg.matrix_power(g, k) - np.eye(g.shape[0])) < tol


def predict_power(a, b, n: int, k: int, tol: float = 1e-8) -> np.ndarray:
    """First-order generator of [e^{A+B}]^n for A whose exponential has period k.

    Returns ``r A + r sspc_A(B) + n ssp_A(B)`` with ``r = n mod k``.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    a = np.asarray(a)
    if not has_period(a, k, tol):
        raise ValueError(f"k={k} is not a period of exp(A)")
    split = repetition_split(a)
    r = n % k
    return r * a + r * split["sspc"](b) + n * split["ssp"](b)


def commutator(x, y) -> np.ndarray:
    return x @ y - y @ x


def bch_truncated(x, y, order: int = 2) -> np.ndarray:
    """Truncated Baker-Campbell-Hausdorff series for ln(e^X e^Y)."""
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    x = np.asarray(x)
    y = np.asarray(y)
    z = x + y
    if order >= 2:
        z = z + 0.5 * commutator(x, y)
    if order >= 3:
        z = z + (commutator(x, commutator(x, y)) + commutator(y, commutator(y, x))) / 12.0
    return z


def bch_sufficient_condition(a, b) -> bool:
    """Known convergence guarantee ||A|| + ||B|| <= ln 2 (Frobenius norms)."""
    return fro_norm(a) + fro_norm(b) <= np.log(2.0)
