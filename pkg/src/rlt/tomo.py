"""Data processing: QPT inversion, generator extraction and the constrained fit.

Each EAC ``a`` repeated ``n_a`` times gives an observation

    Y_a = ln(G_hat_a) - L_ref_a  ~  M_a vec(dL)

with ``L_ref_a`` the principal logarithm of the ideal ``r_a``-fold unit and
``M_a`` the linear model of the amplification maps. When ``r_a L_unit`` is
itself principal, ``L_ref_a = r_a L_unit`` and ``M_a`` is exactly
``r_a f_not_amp + n_a f_amp``. Otherwise the principal log of the data sits on
a shifted branch and ``M_a`` is premultiplied by ``cml_{L_ref} o dcl_{r L_unit}``
so the model stays first-order exact on the principal branch.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from . import perturb, reps
from .eac import AmplificationMaps
from .linalg import expm, fro_norm, logm_principal
from .sim import ShotTable, SPAMModel

log = logging.getLogger(__name__)


class RankDeficientError(ValueError):
    pass


class SolverError(RuntimeError):
    def __init__(self, status: str, message: str | None = None):
        self.status = status
        super().__init__(message or f"solver failed with status {status!r}")


# --------------------------------------------------------------------- QPT


def sensing_matrix(spam: SPAMModel) -> np.ndarray:
    """Rows (prep, povm, outcome); columns row-major vec of the HS matrix."""
    e = spam.effect_vectors()
    r = spam.prep_vectors()
    return np.einsum("uxa,sb->suxab", e, r).reshape(-1, e.shape[-1] * r.shape[-1])


@dataclass(frozen=True)
class QPTEstimate:
    G_hat: np.ndarray
    tp_residual: float
    cp_min_eig: float
    sensing_cond: float
    shots: int | None = None
    seed: int | None = None


def qpt_linear_inversion(data, spam_ideal: SPAMModel) -> QPTEstimate:
    """Least-squares inversion of frequencies against the IDEAL SPAM model.

    ``data`` is a :class:`ShotTable` or an array of probabilities shaped like
    ``spam_ideal.shape``. SPAM errors in the experiment are deliberately not
    modeled here.
    """
    if isinstance(data, ShotTable):
        freqs, shots, seed = data.frequencies(), data.shots, data.seed
    else:
        freqs, shots, seed = np.asarray(data, float), None, None
    a = sensing_matrix(spam_ideal.ideal())
    m = int(round(np.sqrt(a.shape[1])))
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[-1] < 1e-10 * sv[0]:
        raise RankDeficientError("sensing matrix is not informationally complete")
    g = np.linalg.lstsq(a, freqs.reshape(-1), rcond=None)[0].reshape(m, m)
    basis = spam_ideal.basis
    return QPTEstimate(
        g, reps.tp_residual(g, basis), reps.cp_min_eig(g, basis), float(sv[0] / sv[-1]), shots, seed
    )


# ------------------------------------------------------- generator extraction


def reference_generator(l_unit, r: int) -> np.ndarray:
    """Principal logarithm of exp(r L_unit)."""
    l_unit = np.asarray(l_unit)
    if r == 0:
        return np.zeros_like(l_unit)
    return logm_principal(expm(r * l_unit))


def branch_correction(l_unit, r: int) -> np.ndarray:
    """Matrix of cml_{L_ref} o dcl_{r L_unit}; identity when no branch shift occurs."""
    l_unit = np.asarray(l_unit)
    m = l_unit.shape[0]
    ref = reference_generator(l_unit, r)
    if fro_norm(ref - r * l_unit) <= 1e-9 * max(1.0, fro_norm(r * l_unit)):
        return np.eye(m * m)
    return (perturb.cml_map(ref) @ perturb.dcl_map(r * l_unit)).matrix


def extract_lindbladian(est, r: int, l_unit) -> np.ndarray:
    """Y = ln(G_hat) - ln(exp(r L_unit)), both principal.

    Equals ``ln(G_hat) - r L_unit`` whenever ``r L_unit`` has principal
    spectrum. Raises :class:`~rlt.linalg.BranchCutError` when ``G_hat`` has
    an eigenvalue on the negative real axis.
    """
    g = est.G_hat if isinstance(est, QPTEstimate) else np.asarray(est)
    return logm_principal(g) - reference_generator(l_unit, r)


# --------------------------------------------------------------- fit problem


@dataclass(frozen=True)
class EACData:
    maps: AmplificationMaps
    n: int
    Y: np.ndarray | None = None
    name: str = ""


@dataclass
class FitProblem:
    design: np.ndarray  # (sum_a m**2, n_est * m**2)
    observations: np.ndarray  # (sum_a m**2,)
    weights: np.ndarray  # per row
    eac_weights: np.ndarray  # per EAC
    estimated: tuple[int, ...]
    ideal: tuple[np.ndarray, ...]  # L_ideal of each estimated gate
    gate_names: tuple[str, ...]
    basis: reps.MatrixBasis = field(repr=False)
    eac_names: tuple[str, ...] = ()
    block_rows: tuple[int, ...] = ()

    @property
    def m(self) -> int:
        return self.ideal[0].shape[0]

    @property
    def n_params(self) -> int:
        return self.design.shape[1]

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        m2 = self.m**2
        return [x[i * m2:(i + 1) * m2].reshape(self.m, self.m) for i in range(len(self.estimated))]


def default_weights(ns: Sequence[int], variance: Sequence[float] | None = None) -> np.ndarray:
    """1 / (n_a**2 * variance_a): large-n EACs are not favoured by scale alone."""
    ns = np.asarray(ns, float)
    var = np.ones_like(ns) if variance is None else np.asarray(variance, float)
    return 1.0 / (ns**2 * var)


def assemble_design(
    eacs: Sequence[EACData],
    estimated: Sequence[int] | None = None,
    weights: str | Sequence[float] = "inverse_n2",
    basis: reps.MatrixBasis | None = None,
    ideal: Sequence[np.ndarray] | None = None,
) -> FitProblem:
    """Stack per-EAC blocks M_a and observations Y_a into one linear model.

    ``ideal`` holds the ideal Lindbladians of all gates (indexed by label);
    without it the fit has no physicality reference.
    """
    if not eacs:
        raise ValueError("at least one EAC is required")
    names = eacs[0].maps.gate_names
    if any(e.maps.gate_names != names for e in eacs):
        raise ValueError("all EACs must share one gate set")
    m = eacs[0].maps.m
    m2 = m * m
    if estimated is None:
        estimated = sorted({i for e in eacs for i in e.maps.sequence})
    estimated = tuple(int(i) for i in estimated)
    blocks, obs = [], []
    for e in eacs:
        full = e.maps.design_block(e.n)
        r = e.n % e.maps.period
        block = branch_correction(e.maps.L_unit_ideal, r) @ full
        blocks.append(np.hstack([block[:, i * m2:(i + 1) * m2] for i in estimated]))
        obs.append(np.zeros(m2) if e.Y is None else np.asarray(e.Y, float).reshape(m2))
    if isinstance(weights, str):
        if weights == "inverse_n2":
            w = default_weights([e.n for e in eacs])
        elif weights == "uniform":
            w = np.ones(len(eacs))
        else:
            raise ValueError(f"unknown weighting scheme {weights!r}")
    else:
        w = np.asarray(weights, float)
        if w.shape != (len(eacs),):
            raise ValueError("one weight per EAC required")
    if basis is None:
        basis = reps.default_basis(int(round(np.sqrt(m))))
    if ideal is None:
        ideal_est = tuple(np.zeros((m, m)) for _ in estimated)
    else:
        ideal_est = tuple(np.asarray(ideal[i], float) for i in estimated)
    return FitProblem(
        design=np.vstack(blocks),
        observations=np.concatenate(obs),
        weights=np.repeat(w, m2),
        eac_weights=w,
        estimated=estimated,
        ideal=ideal_est,
        gate_names=tuple(names[i] for i in estimated),
        basis=basis,
        eac_names=tuple(e.name for e in eacs),
        block_rows=tuple([m2] * len(eacs)),
    )


# ------------------------------------------------------------------- results


@dataclass
class FitResult:
    deltas: list[np.ndarray]
    objective: float
    residuals: list[float]
    physicality: list[dict]
    rank: int
    n_free: int
    kernel: np.ndarray  # (n_params, k) orthonormal basis of unidentifiable directions
    status: str = "optimal"
    constraint_slack: list[float] = field(default_factory=list)

    @property
    def rank_deficient(self) -> bool:
        return self.kernel.shape[1] > 0


def _tp_parametrization(fp: FitProblem) -> tuple[np.ndarray, np.ndarray]:
    """x = x0 + N z spans all dL with <<I|(L_ideal + dL) = 0."""
    m = fp.m
    vi = reps.vectorize(np.eye(fp.basis.dim), fp.basis).real
    tp_row = np.kron(vi, np.eye(m))  # (m, m*m): vec(X) -> <<I| X
    k = len(fp.estimated)
    t = scipy.linalg.block_diag(*[tp_row] * k)
    rhs = np.concatenate([-(vi @ l) for l in fp.ideal])
    x0 = np.linalg.lstsq(t, rhs, rcond=None)[0]
    null = scipy.linalg.null_space(t)
    return x0, null


def _weighted(fp: FitProblem) -> tuple[np.ndarray, np.ndarray]:
    sw = np.sqrt(fp.weights)
    return fp.design * sw[:, None], fp.observations * sw


def identifiability(fp: FitProblem, rtol: float = 1e-9) -> tuple[int, int, np.ndarray]:
    """(rank, number of free parameters, kernel basis in full parameter coordinates)."""
    _, null = _tp_parametrization(fp)
    a, _ = _weighted(fp)
    az = a @ null
    u, s, vt = np.linalg.svd(az, full_matrices=True)
    tol = rtol * (s[0] if s.size else 1.0)
    rank = int(np.sum(s > tol))
    kern = null @ vt[rank:].T
    return rank, null.shape[1], kern


def _finish(fp: FitProblem, x: np.ndarray, status: str, slack=None) -> FitResult:
    a, b = _weighted(fp)
    rank, nfree, kern = identifiability(fp)
    res = fp.observations - fp.design @ x
    per_eac = []
    start = 0
    for rows in fp.block_rows:
        per_eac.append(float(np.linalg.norm(res[start:start + rows])))
        start += rows
    deltas = fp.split(x)
    phys = [reps.lindblad_physicality(l + d, fp.basis) for l, d in zip(fp.ideal, deltas)]
    return FitResult(
        deltas=deltas,
        objective=float(np.sum((b - a @ x) ** 2)),
        residuals=per_eac,
        physicality=phys,
        rank=rank,
        n_free=nfree,
        kernel=kern,
        status=status,
        constraint_slack=list(slack or []),
    )


def fit_unconstrained(fp: FitProblem) -> FitResult:
    """Weighted least squares on the trace-preserving subspace (no CP constraint).

    Rank deficiency is resolved by the minimum-norm solution and reported
    through ``FitResult.kernel``.
    """
    x0, null = _tp_parametrization(fp)
    a, b = _weighted(fp)
    z = np.linalg.pinv(a @ null, rcond=1e-10) @ (b - a @ x0)
    return _finish(fp, x0 + null @ z, "optimal")


def cj_operator(basis: reps.MatrixBasis) -> np.ndarray:
    """Complex matrix K with vec(V^dag CJ(X) V) = K vec(X), V an isometry onto range(Q)."""
    d = basis.dim
    m = d * d
    omega = reps.omega(d) / np.sqrt(d)
    # orthonormal complement of the maximally entangled vector
    v = scipy.linalg.null_space(omega.conj()[None, :])
    e = basis.elements
    # CJ(E_ab) = B_a (x) conj(B_b)
    cj = np.einsum("aij,bkl->abikjl", e, e.conj()).reshape(m, m, m, m)
    k = np.einsum("ip,abij,jq->pqab", v.conj(), cj, v)
    return k.reshape((m - 1) ** 2, m * m), v


def _solve_sdp(fp: FitProblem, x0: np.ndarray, null: np.ndarray, solver: str | None, tol: float):
    import cvxpy as cp

    m = fp.m
    m2 = m * m
    a, b = _weighted(fp)
    k_op, _ = cj_operator(fp.basis)
    q = m - 1
    az = a @ null
    target = b - a @ x0
    # scale so that the unknowns are O(1)
    base = np.linalg.pinv(az, rcond=1e-10) @ target
    scale = max(float(np.linalg.norm(base)), float(np.linalg.norm(x0)), 1e-12)
    z = cp.Variable(null.shape[1])
    cons = []
    lmi_exprs = []
    for i, l in enumerate(fp.ideal):
        ni = null[i * m2:(i + 1) * m2]
        xi0 = x0[i * m2:(i + 1) * m2] + l.reshape(m2)
        kr, ki = k_op.real, k_op.imag
        re = cp.reshape(kr @ ni @ z + kr @ xi0 / scale, (q, q), order="C")
        im = cp.reshape(ki @ ni @ z + ki @ xi0 / scale, (q, q), order="C")
        block = cp.bmat([[re, -im], [im, re]])
        sym = (block + block.T) / 2
        cons.append(sym >> 0)
        lmi_exprs.append(sym)
    norm_t = max(float(np.linalg.norm(target)), 1e-300)
    objective = cp.Minimize(cp.sum_squares((az @ z) * (scale / norm_t) - target / norm_t))
    prob = cp.Problem(objective, cons)
    tried = [solver] if solver else ["CLARABEL", "SCS"]
    last = "not run"
    for name in tried:
        try:
            opts = {"tol_gap_abs": tol, "tol_gap_rel": tol, "tol_feas": tol} if name == "CLARABEL" else {"eps": tol}
            prob.solve(solver=name, **opts)
        except Exception as exc:  # solver-specific failures
            log.warning("solver %s failed: %s", name, exc)
            last = f"error: {exc}"
            continue
        last = prob.status
        if prob.status in ("optimal", "optimal_inaccurate") and z.value is not None:
            slack = [float(np.linalg.eigvalsh(e.value)[0]) * scale for e in lmi_exprs]
            return x0 + null @ (z.value * scale), prob.status, slack
    raise SolverError(last)


def fit_constrained(fp: FitProblem, solver: str | None = None, tol: float = 1e-10) -> FitResult:
    """Weighted least squares subject to physicality of each L_ideal + dL.

    Trace annihilation is built into the parametrization; conditional complete
    positivity ``Q CJ(L) Q >= 0`` is a linear matrix inequality per gate.
    """
    x0, null = _tp_parametrization(fp)
    x, status, slack = _solve_sdp(fp, x0, null, solver, tol)
    return _finish(fp, x, status, slack)


def identifiable_projector(fp: FitProblem) -> np.ndarray:
    """Orthogonal projector onto identifiable directions within the TP subspace."""
    _, null = _tp_parametrization(fp)
    _, _, kern = identifiability(fp)
    p_tp = null @ null.T
    return p_tp - kern @ kern.T
