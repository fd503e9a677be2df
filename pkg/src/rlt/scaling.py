"""Residual-scaling experiments for the first-order formulas.

Every formula predicts ``exp(...)`` up to a residual that is quadratic in the
perturbation size ``eps``; halving ``eps`` should divide the residual by four.
"""
from __future__ import annotations

from typing import Callable, Iterator, Sequence

import numpy as np

from . import eac, gates, perturb, reps
from .linalg import BranchCutError, expm, fro_norm
from .perturb import SingularityError

EPSILONS = (1e-2, 1e-3)
#: residuals below this are roundoff; the formula is exact and ratios are meaningless
EXACT_TOL = 1e-12


def random_hermitian(rng: np.random.Generator, d: int) -> np.ndarray:
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (x + x.conj().T) / 2


def random_lindbladian(rng: np.random.Generator, d: int, h_norm: float | None = None, max_rate: float = 1e-2) -> np.ndarray:
    """Random Hamiltonian generator (||H||_F = pi d / 4 by default) plus a weak dissipator."""
    basis = reps.default_basis(d)
    h = random_hermitian(rng, d)
    h *= (np.pi * d / 4 if h_norm is None else h_norm) / np.linalg.norm(h)
    jumps = []
    for _ in range(2):
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        jumps.append(np.sqrt(max_rate * rng.random()) * a / np.linalg.norm(a))
    return reps.lindbladian(h, jumps, basis=basis)


def random_nonsingular_lindbladian(rng: np.random.Generator, d: int, margin: float = 0.1, **kw) -> np.ndarray:
    """Random generator with every |l_jk| >= ``margin`` (cml/cmr well conditioned)."""
    while True:
        a = random_lindbladian(rng, d, **kw)
        if not perturb.singularity_report(perturb.spectral_decompose(a), margin).is_singular:
            return a


def unit_direction(rng: np.random.Generator, m: int) -> np.ndarray:
    b = rng.normal(size=(m, m))
    return b / np.linalg.norm(b)


def ratio(residual: Callable[[float], float], eps: float) -> float:
    return residual(eps) / residual(eps / 2)


# --------------------------------------------------------- residual builders


def single_gate_residuals(a: np.ndarray, b0: np.ndarray) -> dict[str, Callable[[float], float]]:
    maps = perturb.build_maps(a)
    ea = expm(a)

    def dcl(e):
        return fro_norm(expm(a + e * b0) - expm(maps["dcl"](e * b0)) @ ea)

    def dcr(e):
        return fro_norm(expm(a + e * b0) - ea @ expm(maps["dcr"](e * b0)))

    def cml(e):
        return fro_norm(expm(e * b0) @ ea - expm(a + maps["cml"](e * b0)))

    def cmr(e):
        return fro_norm(ea @ expm(e * b0) - expm(a + maps["cmr"](e * b0)))

    return {"dcl": dcl, "dcr": dcr, "cml": cml, "cmr": cmr}


def two_gate_residual(a, a_prime, b0, b0_prime) -> Callable[[float], float]:
    out = perturb.compose_two(a, a_prime)
    c, mb, mbp = out["C"], out["map_B"], out["map_Bprime"]

    def res(e):
        lhs = expm(a + e * b0) @ expm(a_prime + e * b0_prime)
        return fro_norm(lhs - expm(c + mb(e * b0) + mbp(e * b0_prime)))

    return res


def repetition_residual(a, b0, n: int, k: int) -> Callable[[float], float]:
    def res(e):
        exact = np.linalg.matrix_power(expm(a + e * b0), n)
        return fro_norm(exact - expm(perturb.predict_power(a, e * b0, n, k)))

    return res


def algorithm1_residual(gs: eac.GateSet, seq, directions: Sequence[np.ndarray]) -> Callable[[float], float]:
    """Residual of G_unit ~ exp[L_unit + sum_i F_i(dL_i)]."""
    labels = eac._labels(gs, seq)
    l_unit = eac.unit_ideal_lindbladian(gs, labels)
    f = eac.algorithm1(gs, labels)

    def res(e):
        g = np.eye(gs.m)
        for i in labels:
            g = expm(gs[i].lindbladian + e * directions[i]) @ g
        gen = l_unit + sum(fi(e * di) for fi, di in zip(f, directions))
        return fro_norm(g - expm(gen))

    return res


def bch_residuals(a, b0) -> dict[str, Callable[[float], float]]:
    """Composition e^{eps B} e^A predicted by cml and by second-order BCH."""
    cml = perturb.cml_map(a)
    ea = expm(a)

    def thm1(e):
        return fro_norm(expm(e * b0) @ ea - expm(a + cml(e * b0)))

    def bch2(e):
        return fro_norm(expm(e * b0) @ ea - expm(perturb.bch_truncated(e * b0, a, 2)))

    return {"cml": thm1, "bch2": bch2}


# ------------------------------------------------------------- gate systems


def gate_system(name: str) -> eac.GateSet:
    """Standard gate sets used by the verification tables."""
    if name == "1q":
        return eac.GateSet.from_lindbladians({g: gates.ideal_lindbladian(g, 1) for g in ("X90", "Y90", "Z90")})
    if name == "2q":
        return eac.GateSet.from_lindbladians(
            {g: gates.ideal_lindbladian(g, 2) for g in ("XI90", "YI90", "ZI90", "ZX90")}
        )
    if name == "qutrit":
        basis = reps.gell_mann_basis(3)
        out = {}
        for label, idx in (("X01_90", (0, 1)), ("X12_90", (1, 2))):
            h = np.zeros((3, 3), complex)
            h[idx[0], idx[1]] = h[idx[1], idx[0]] = np.pi / 4
            out[label] = reps.hamiltonian_lindbladian(h, basis)
        return eac.GateSet.from_lindbladians(out)
    raise ValueError(f"unknown gate system {name!r}")


def applicable_sequences(gs: eac.GateSet, rng: np.random.Generator, count: int, max_len: int = 6) -> Iterator[tuple[int, ...]]:
    """Random unit sequences for which every intermediate composition is nonsingular."""
    found = 0
    tries = 0
    while found < count:
        tries += 1
        if tries > 200 * count:
            raise RuntimeError("could not find enough applicable sequences")
        seq = tuple(int(i) for i in rng.integers(0, len(gs), size=rng.integers(2, max_len + 1)))
        try:
            eac.algorithm1(gs, seq)
            eac.unit_ideal_lindbladian(gs, seq)
        except (SingularityError, BranchCutError):
            continue
        found += 1
        yield seq


# ------------------------------------------------------------------ tables


def _row(formula: str, system: str, seed: int, fn, eps_list, **extra) -> dict:
    """One table row; formulas that are exact (e.g. a one-gate unit) get ``exact`` and no ratios."""
    row = {"formula": formula, "system": system, "seed": seed, **extra}
    row["residual"] = {f"{e:g}": fn(e) for e in eps_list}
    row["exact"] = all(fn(e / 2) < EXACT_TOL for e in eps_list) and all(v < EXACT_TOL for v in row["residual"].values())
    row["ratio"] = {} if row["exact"] else {f"{e:g}": ratio(fn, e) for e in eps_list}
    row["residual_at_zero"] = fn(0.0)
    return row


def scaling_rows(system: str, seeds: int = 20, eps_list=EPSILONS, repetitions=(5, 13, 40)) -> list[dict]:
    """Residual halving ratios for every first-order formula on one gate system."""
    gs = gate_system(system)
    d = gs.d
    m = gs.m
    rows = []
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        a = random_nonsingular_lindbladian(rng, d)
        b0 = unit_direction(rng, m)
        for name, fn in single_gate_residuals(a, b0).items():
            rows.append(_row(name, system, seed, fn, eps_list))
        while True:
            a2 = random_nonsingular_lindbladian(rng, d)
            try:
                fn = two_gate_residual(a, a2, b0, unit_direction(rng, m))
                break
            except (SingularityError, BranchCutError):
                continue
        rows.append(_row("compose_two", system, seed, fn, eps_list))
        gate = gs[seed % len(gs)]
        k = eac.period_of(expm(gate.lindbladian))
        for n in repetitions:
            fn = repetition_residual(gate.lindbladian, b0, n, k)
            rows.append(_row("repetition", system, seed, fn, eps_list, gate=gate.name, n=n))
        seq = next(applicable_sequences(gs, rng, 1))
        dirs = [unit_direction(rng, m) for _ in range(len(gs))]
        fn = algorithm1_residual(gs, seq, dirs)
        rows.append(_row("algorithm1", system, seed, fn, eps_list, unit=[gs[i].name for i in seq]))
    return rows


def bch_rows(seeds: int = 5, eps: float = 1e-3) -> list[dict]:
    """cml versus truncated BCH at gate scale (X90, ZX90) and at ||A|| = 0.1."""
    rows = []
    for system, gate in (("1q", "X90"), ("2q", "ZX90")):
        a = gates.ideal_lindbladian(gate, 1 if system == "1q" else 2)
        for scale_name, a_s in (("gate", a), ("small", a * 0.1 / fro_norm(a))):
            for seed in range(seeds):
                b0 = unit_direction(np.random.default_rng(1000 + seed), a.shape[0])
                res = bch_residuals(a_s, b0)
                rows.append({
                    "gate": gate,
                    "scale": scale_name,
                    "norm_A": fro_norm(a_s),
                    "bch_condition": perturb.bch_sufficient_condition(a_s, eps * b0),
                    "seed": seed,
                    "eps": eps,
                    "cml_residual": res["cml"](eps),
                    "bch2_residual": res["bch2"](eps),
                    "cml_ratio": ratio(res["cml"], eps),
                    "bch2_ratio": ratio(res["bch2"], eps),
                })
    return rows
