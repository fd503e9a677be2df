"""Error-amplification-circuit analysis.

Builds, for a repetition unit of ideal gates, the per-gate linear maps
``F_i`` with

    G_unit = exp[L_unit + sum_i F_i(dL_i)] + O(dL^2)

and splits them into the parts amplified by repetition (``ssp`` of the unit
generator, growing like ``n``) and the parts that are not (``sspc``, growing
like ``n mod k``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import perturb
from .linalg import BranchCutError, expm, fro_norm, logm_principal, spectral_decompose
from .perturb import SingularityError, SingularityReport, SuperMap

K_MAX = 64
PERIOD_TOL = 1e-8


class AperiodicError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    label: int
    name: str
    lindbladian: np.ndarray


@dataclass(frozen=True)
class GateSet:
    """Ideal gates indexed by integer label."""

    gates: tuple[Gate, ...]

    @classmethod
    def from_lindbladians(cls, lindbladians: Mapping[str, np.ndarray]) -> "GateSet":
        return cls(tuple(Gate(i, name, np.asarray(l)) for i, (name, l) in enumerate(lindbladians.items())))

    @property
    def m(self) -> int:
        return self.gates[0].lindbladian.shape[0]

    @property
    def d(self) -> int:
        return int(round(np.sqrt(self.m)))

    @property
    def names(self) -> list[str]:
        return [g.name for g in self.gates]

    def __len__(self) -> int:
        return len(self.gates)

    def __getitem__(self, label: int) -> Gate:
        return self.gates[label]

    def label_of(self, name: str) -> int:
        for g in self.gates:
            if g.name == name:
                return g.label
        raise KeyError(f"unknown gate {name!r}")

    def sequence(self, names: Sequence[str]) -> tuple[int, ...]:
        return tuple(self.label_of(n) for n in names)


def _labels(gs: GateSet, seq: Sequence) -> tuple[int, ...]:
    if len(seq) == 0:
        raise ValueError("unit sequence must contain at least one gate")
    out = tuple(gs.label_of(s) if isinstance(s, str) else int(s) for s in seq)
    for i in out:
        if not 0 <= i < len(gs):
            raise ValueError(f"gate label {i} out of range")
    return out


def period_of(g, k_max: int = K_MAX, tol: float = PERIOD_TOL) -> int:
    """Smallest k <= k_max with ||G^k - I||_F < tol."""
    g = np.asarray(g)
    eye = np.eye(g.shape[0])
    power = eye
    for k in range(1, k_max + 1):
        power = g @ power
        if fro_norm(power - eye) < tol:
            return k
    raise AperiodicError(f"no period <= {k_max} found")


def unit_ideal_product(gs: GateSet, seq: Sequence) -> np.ndarray:
    """G_{i_n} ... G_{i_1}: the first label acts first."""
    g = np.eye(gs.m)
    for i in _labels(gs, seq):
        g = expm(gs[i].lindbladian) @ g
    return g


def unit_ideal_lindbladian(gs: GateSet, seq: Sequence) -> np.ndarray:
    return logm_principal(unit_ideal_product(gs, seq))


class AlgorithmStopped(SingularityError):
    """Composition hit a singular intermediate generator."""

    def __init__(self, report: SingularityReport, prefix: tuple[int, ...], names: list[str], reason: str | None = None):
        self.prefix = prefix
        self.prefix_names = names
        super().__init__(
            report,
            f"intermediate generator after gates {names} is singular "
            f"({reason or report.describe()}); replace 180-degree rotations by pairs of 90-degree rotations",
        )


def algorithm1(gs: GateSet, seq: Sequence, threshold: float = perturb.SINGULAR_TOL) -> list[SuperMap]:
    """Per-gate linearized composition maps F_i for one repetition unit.

    Position ``j`` of the unit is folded in with the two-gate composition rule:
    the accumulated product (generator ``A'``) picks up ``cmr_C o dcr_A'`` and
    the new gate ``A`` contributes ``cml_C o dcl_A``, where ``C = ln(e^A e^A')``
    becomes the accumulated generator for the next position.
    """
    labels = _labels(gs, seq)
    m = gs.m
    f = [SuperMap.zero(m) for _ in range(len(gs))]
    f[labels[0]] = SuperMap.identity(m)
    acc = gs[labels[0]].lindbladian
    for j in range(1, len(labels)):
        a = gs[labels[j]].lindbladian
        prefix = labels[: j + 1]
        try:
            c = logm_principal(expm(a) @ expm(acc))
        except BranchCutError as exc:
            # a product with eigenvalue -1 is a 180-degree rotation: no principal generator
            raise AlgorithmStopped(SingularityReport(), prefix, [gs[i].name for i in prefix], str(exc)) from exc
        sd_c = spectral_decompose(c)
        report = perturb.singularity_report(sd_c, threshold)
        if report.is_singular:
            raise AlgorithmStopped(report, prefix, [gs[i].name for i in prefix])
        maps_c = perturb.build_maps(sd_c, threshold)
        carry = (maps_c["cmr"] @ perturb.dcr_map(acc)).matrix
        f = [SuperMap(perturb._real_if_close(carry @ fi.matrix)) if fi.label != "zero" else fi for fi in f]
        new = maps_c["cml"] @ perturb.dcl_map(a)
        f[labels[j]] = new if f[labels[j]].label == "zero" else f[labels[j]] + new
        acc = c
    return f


@dataclass(frozen=True)
class AmplificationMaps:
    gate_names: tuple[str, ...]
    sequence: tuple[int, ...]
    L_unit_ideal: np.ndarray
    period: int
    F_unit: tuple[SuperMap, ...]
    f_amp: tuple[SuperMap, ...]
    f_not_amp: tuple[SuperMap, ...]
    ssp: SuperMap = field(repr=False)
    sspc: SuperMap = field(repr=False)

    @property
    def m(self) -> int:
        return self.L_unit_ideal.shape[0]

    def used(self) -> list[int]:
        return sorted(set(self.sequence))

    def design_block(self, n: int) -> np.ndarray:
        """Linear map from stacked vec(dL_i) (all gates) to the n-fold generator error."""
        r = n % self.period
        return np.hstack(
            [r * fn.matrix + n * fa.matrix for fn, fa in zip(self.f_not_amp, self.f_amp)]
        )

    def branch_margin(self, n: int) -> float:
        """pi minus the largest |Im| of r * eig(L_unit); small values risk a branch jump."""
        r = n % self.period
        lam = np.linalg.eigvals(self.L_unit_ideal)
        return float(np.pi - r * np.max(np.abs(lam.imag), initial=0.0))


def amp_split(f: Sequence[SuperMap], l_unit, k: int | None = None) -> tuple[list[SuperMap], list[SuperMap]]:
    """(ssp o F_i, sspc o F_i) with ssp/sspc taken w.r.t. the unit generator.

    ``k`` is accepted for symmetry with the period-aware callers; the split
    itself only depends on the spectrum of ``l_unit``.
    """
    split = perturb.repetition_split(spectral_decompose(np.asarray(l_unit)))
    return [split["ssp"] @ fi for fi in f], [split["sspc"] @ fi for fi in f]


class SingularGateError(SingularityError):
    """A gate of the unit has a singular ideal generator (e.g. a 180-degree rotation)."""

    def __init__(self, report: SingularityReport, gate: str):
        self.gate = gate
        super().__init__(
            report,
            f"gate {gate!r} is singular ({report.describe()}); RLT is not applicable to it. "
            f"Implement such 180-degree rotations as two 90-degree rotations (e.g. X = X90 X90)",
        )


def check_applicable(gs: GateSet, seq: Sequence, threshold: float = perturb.SINGULAR_TOL) -> None:
    """Raise :class:`SingularGateError` if any gate of ``seq`` has a singular ideal generator."""
    for i in sorted(set(_labels(gs, seq))):
        report = perturb.singularity_report(spectral_decompose(gs[i].lindbladian), threshold)
        if report.is_singular:
            raise SingularGateError(report, gs[i].name)


def amplification_maps(gs: GateSet, seq: Sequence, k_max: int = K_MAX, tol: float = PERIOD_TOL) -> AmplificationMaps:
    """Period, unit generator, F_i and their amplified / non-amplified parts.

    Raises
    ------
    SingularGateError
        If a gate of the unit is singular.
    AlgorithmStopped
        If an intermediate composition is singular.
    AperiodicError
        If the ideal unit has no period up to ``k_max``.
    """
    labels = _labels(gs, seq)
    check_applicable(gs, labels)
    g_unit = unit_ideal_product(gs, labels)
    k = period_of(g_unit, k_max, tol)
    l_unit = logm_principal(g_unit)
    f = algorithm1(gs, labels)
    split = perturb.repetition_split(spectral_decompose(l_unit))
    f_amp, f_not = amp_split(f, l_unit)
    return AmplificationMaps(
        tuple(gs.names), labels, l_unit, k, tuple(f), tuple(f_amp), tuple(f_not),
        split["ssp"], split["sspc"],
    )


def predict_eac_generator(am: AmplificationMaps, deltas: Sequence, n: int) -> np.ndarray:
    """r L_unit + r sum_j f_not_amp_j(dL_j) + n sum_j f_amp_j(dL_j), r = n mod k."""
    if n < 1:
        raise ValueError("n must be >= 1")
    r = n % am.period
    out = r * am.L_unit_ideal
    for fa, fn, dl in zip(am.f_amp, am.f_not_amp, deltas):
        if dl is None:
            continue
        out = out + r * fn(dl) + n * fa(dl)
    return out
