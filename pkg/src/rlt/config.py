"""Experiment configuration: a versioned JSON document.

Schema (version 1)::

    {
      "schema_version": 1,
      "num_qubits": 1,
      "gates": [
        {"name": "X90"},
        {"name": "G", "hamiltonian": {"X": 0.785}, "jumps": [{"pauli": "Z", "rate": 1e-4}]}
      ],
      "eacs": [{"name": "x", "unit": ["X90"], "n": [4, 8, 16, 40]}],
      "estimate": ["X90"],
      "truth": {"X90": {"hamiltonian": {"X": 1e-3}, "jumps": [{"lowering": 0, "rate": 1e-3}]}},
      "spam": {"depolarizing": 0.0, "rotation": 0.0},
      "shots": "exact",
      "seed": 0,
      "solver": {"name": null, "tol": 1e-10},
      "weights": "inverse_n2",
      "verify": {"systems": ["1q", "2q"], "seeds": 20, "eps": [0.01, 0.001]}
    }

A gate given only by name uses the built-in ideal gate of that name. Hamiltonian
coefficients multiply unnormalized Pauli strings. A jump operator is a Pauli
string (``pauli``), a lowering operator on one qubit (``lowering``) or an
explicit matrix (``matrix``); it is scaled by ``sqrt(rate)``. Explicit matrices
are row-major lists of ``[re, im]`` pairs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import gates, reps
from .eac import GateSet

SCHEMA_VERSION = 1
WEIGHT_SCHEMES = ("inverse_n2", "uniform")
VERIFY_SYSTEMS = ("1q", "2q", "qutrit")


class ConfigError(ValueError):
    pass


def matrix_to_pairs(a) -> list:
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def pairs_to_matrix(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ConfigError("matrices must be row-major lists of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _check_keys(d: Mapping, allowed: set[str], where: str) -> None:
    if not isinstance(d, Mapping):
        raise ConfigError(f"{where} must be an object")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def _as_tuple_matrix(pairs) -> tuple:
    return tuple(tuple(tuple(float(v) for v in z) for z in row) for row in pairs)


@dataclass(frozen=True)
class JumpSpec:
    rate: float
    pauli: str | None = None
    lowering: int | None = None
    matrix: tuple | None = None

    @classmethod
    def from_dict(cls, d: Mapping, where: str) -> "JumpSpec":
        _check_keys(d, {"rate", "pauli", "lowering", "matrix"}, where)
        kinds = [k for k in ("pauli", "lowering", "matrix") if k in d]
        if len(kinds) != 1:
            raise ConfigError(f"{where}: give exactly one of pauli, lowering, matrix")
        rate = float(d.get("rate", 1.0))
        if rate < 0:
            raise ConfigError(f"{where}: rate must be non-negative")
        if "matrix" in d:
            pairs_to_matrix(d["matrix"])
            return cls(rate, matrix=_as_tuple_matrix(d["matrix"]))
        if "lowering" in d:
            return cls(rate, lowering=int(d["lowering"]))
        return cls(rate, pauli=str(d["pauli"]).upper())

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"rate": self.rate}
        if self.pauli is not None:
            out["pauli"] = self.pauli
        elif self.lowering is not None:
            out["lowering"] = self.lowering
        else:
            out["matrix"] = [[list(z) for z in row] for row in self.matrix]
        return out

    def operator(self, num_qubits: int) -> np.ndarray:
        if self.pauli is not None:
            if len(self.pauli) != num_qubits:
                raise ConfigError(f"jump Pauli {self.pauli!r} does not act on {num_qubits} qubits")
            return np.sqrt(self.rate) * reps.pauli_string(self.pauli)
        if self.lowering is not None:
            if not 0 <= self.lowering < num_qubits:
                raise ConfigError(f"lowering qubit {self.lowering} out of range")
            return gates.amplitude_damping_jump(self.rate, num_qubits, self.lowering)
        op = pairs_to_matrix(self.matrix)
        if op.shape != (2**num_qubits,) * 2:
            raise ConfigError(f"jump matrix has shape {op.shape}, expected {(2**num_qubits,) * 2}")
        return np.sqrt(self.rate) * op


def _hamiltonian_dict(d, where: str) -> dict[str, float] | None:
    if d is None:
        return None
    if not isinstance(d, Mapping):
        raise ConfigError(f"{where}: hamiltonian must map Pauli strings to coefficients")
    return {str(k).upper(): float(v) for k, v in d.items()}


def _generator(ham: dict | None, jumps: tuple[JumpSpec, ...], num_qubits: int, where: str) -> np.ndarray:
    basis = reps.pauli_basis(num_qubits)
    h = None
    if ham:
        if any(len(k) != num_qubits for k in ham):
            raise ConfigError(f"{where}: Pauli strings must have length {num_qubits}")
        try:
            h = gates.pauli_hamiltonian(ham)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"{where}: {exc}") from exc
    return reps.lindbladian(h, [j.operator(num_qubits) for j in jumps], basis=basis)


@dataclass(frozen=True)
class GateSpec:
    name: str
    hamiltonian: dict[str, float] | None = None
    jumps: tuple[JumpSpec, ...] = ()

    @classmethod
    def from_dict(cls, d: Mapping, where: str) -> "GateSpec":
        _check_keys(d, {"name", "hamiltonian", "jumps"}, where)
        if "name" not in d:
            raise ConfigError(f"{where}: gate needs a name")
        jumps = tuple(JumpSpec.from_dict(j, f"{where}.jumps[{i}]") for i, j in enumerate(d.get("jumps", [])))
        return cls(str(d["name"]), _hamiltonian_dict(d.get("hamiltonian"), where), jumps)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"name": self.name}
        if self.hamiltonian is not None:
            out["hamiltonian"] = dict(self.hamiltonian)
        if self.jumps:
            out["jumps"] = [j.to_dict() for j in self.jumps]
        return out

    def lindbladian(self, num_qubits: int) -> np.ndarray:
        if self.hamiltonian is None:
            try:
                base = gates.ideal_lindbladian(self.name, num_qubits)
            except ValueError as exc:
                raise ConfigError(f"gate {self.name!r}: {exc}; give a hamiltonian") from exc
        else:
            base = _generator(self.hamiltonian, (), num_qubits, f"gate {self.name!r}")
        if self.jumps:
            base = base + _generator(None, self.jumps, num_qubits, f"gate {self.name!r}")
        return base


@dataclass(frozen=True)
class ErrorSpec:
    hamiltonian: dict[str, float] | None = None
    jumps: tuple[JumpSpec, ...] = ()

    @classmethod
    def from_dict(cls, d: Mapping, where: str) -> "ErrorSpec":
        _check_keys(d, {"hamiltonian", "jumps"}, where)
        jumps = tuple(JumpSpec.from_dict(j, f"{where}.jumps[{i}]") for i, j in enumerate(d.get("jumps", [])))
        return cls(_hamiltonian_dict(d.get("hamiltonian"), where), jumps)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {}
        if self.hamiltonian is not None:
            out["hamiltonian"] = dict(self.hamiltonian)
        if self.jumps:
            out["jumps"] = [j.to_dict() for j in self.jumps]
        return out

    def delta(self, num_qubits: int, where: str = "truth") -> np.ndarray:
        return _generator(self.hamiltonian, self.jumps, num_qubits, where)


@dataclass(frozen=True)
class EACSpec:
    name: str
    unit: tuple[str, ...]
    n: tuple[int, ...]

    @classmethod
    def from_dict(cls, d: Mapping, where: str) -> "EACSpec":
        _check_keys(d, {"name", "unit", "n"}, where)
        try:
            unit = tuple(str(u) for u in d["unit"])
            ns = tuple(int(v) for v in d["n"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: needs a unit list and an n list") from exc
        if not unit:
            raise ConfigError(f"{where}: empty unit")
        if not ns or any(v < 1 for v in ns):
            raise ConfigError(f"{where}: n values must be positive integers")
        return cls(str(d.get("name", "".join(unit))), unit, ns)

    def to_dict(self) -> dict:
        return {"name": self.name, "unit": list(self.unit), "n": list(self.n)}


@dataclass(frozen=True)
class SolverSpec:
    name: str | None = None
    tol: float = 1e-10

    def to_dict(self) -> dict:
        return {"name": self.name, "tol": self.tol}


@dataclass(frozen=True)
class VerifySpec:
    systems: tuple[str, ...] = ("1q", "2q")
    seeds: int = 20
    eps: tuple[float, ...] = (1e-2, 1e-3)

    def to_dict(self) -> dict:
        return {"systems": list(self.systems), "seeds": self.seeds, "eps": list(self.eps)}


@dataclass(frozen=True)
class ExperimentConfig:
    num_qubits: int
    gates: tuple[GateSpec, ...]
    eacs: tuple[EACSpec, ...] = ()
    estimate: tuple[str, ...] = ()
    truth: dict[str, ErrorSpec] = field(default_factory=dict)
    spam_depolarizing: float = 0.0
    spam_rotation: float = 0.0
    shots: int | str = "exact"
    seed: int = 0
    solver: SolverSpec = SolverSpec()
    weights: str | tuple[float, ...] = "inverse_n2"
    verify: VerifySpec = VerifySpec()
    schema_version: int = SCHEMA_VERSION

    # ------------------------------------------------------------ parsing

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        allowed = {
            "schema_version", "num_qubits", "gates", "eacs", "estimate", "truth",
            "spam", "shots", "seed", "solver", "weights", "verify",
        }
        _check_keys(d, allowed, "config")
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
        try:
            nq = int(d["num_qubits"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("num_qubits is required") from exc
        if nq < 1:
            raise ConfigError("num_qubits must be positive")
        gate_list = d.get("gates")
        if not gate_list:
            raise ConfigError("at least one gate is required")
        gs = tuple(GateSpec.from_dict(g, f"gates[{i}]") for i, g in enumerate(gate_list))
        eacs = tuple(EACSpec.from_dict(e, f"eacs[{i}]") for i, e in enumerate(d.get("eacs", [])))
        truth = {
            str(k): ErrorSpec.from_dict(v, f"truth.{k}") for k, v in (d.get("truth") or {}).items()
        }
        spam = d.get("spam") or {}
        _check_keys(spam, {"depolarizing", "rotation"}, "spam")
        shots = d.get("shots", "exact")
        if shots != "exact":
            if isinstance(shots, bool) or not isinstance(shots, int) or shots <= 0:
                raise ConfigError('shots must be a positive integer or "exact"')
        solver = d.get("solver") or {}
        _check_keys(solver, {"name", "tol"}, "solver")
        sv = SolverSpec(solver.get("name"), float(solver.get("tol", 1e-10)))
        weights = d.get("weights", "inverse_n2")
        if not isinstance(weights, str):
            weights = tuple(float(w) for w in weights)
        ver = d.get("verify") or {}
        _check_keys(ver, {"systems", "seeds", "eps"}, "verify")
        vs = VerifySpec(
            tuple(ver.get("systems", VerifySpec.systems)),
            int(ver.get("seeds", VerifySpec.seeds)),
            tuple(float(e) for e in ver.get("eps", VerifySpec.eps)),
        )
        seed = d.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        cfg = cls(
            num_qubits=nq,
            gates=gs,
            eacs=eacs,
            estimate=tuple(str(s) for s in d.get("estimate", [])),
            truth=truth,
            spam_depolarizing=float(spam.get("depolarizing", 0.0)),
            spam_rotation=float(spam.get("rotation", 0.0)),
            shots=shots,
            seed=seed,
            solver=sv,
            weights=weights,
            verify=vs,
        )
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "num_qubits": self.num_qubits,
            "gates": [g.to_dict() for g in self.gates],
            "eacs": [e.to_dict() for e in self.eacs],
            "estimate": list(self.estimate),
            "truth": {k: v.to_dict() for k, v in self.truth.items()},
            "spam": {"depolarizing": self.spam_depolarizing, "rotation": self.spam_rotation},
            "shots": self.shots,
            "seed": self.seed,
            "solver": self.solver.to_dict(),
            "weights": self.weights if isinstance(self.weights, str) else list(self.weights),
            "verify": self.verify.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        return cls.from_json(p.read_text())

    # --------------------------------------------------------- validation

    def validate(self) -> None:
        names = [g.name for g in self.gates]
        if len(set(names)) != len(names):
            raise ConfigError("gate names must be unique")
        known = set(names)
        for e in self.eacs:
            missing = [u for u in e.unit if u not in known]
            if missing:
                raise ConfigError(f"EAC {e.name!r} references unknown gates {missing}")
        if len({e.name for e in self.eacs}) != len(self.eacs):
            raise ConfigError("EAC names must be unique")
        for s in (*self.estimate, *self.truth):
            if s not in known:
                raise ConfigError(f"unknown gate {s!r}")
        if self.spam_depolarizing < 0 or self.spam_depolarizing > 1:
            raise ConfigError("spam.depolarizing must lie in [0, 1]")
        if self.solver.tol <= 0:
            raise ConfigError("solver.tol must be positive")
        if isinstance(self.weights, str):
            if self.weights not in WEIGHT_SCHEMES:
                raise ConfigError(f"weights must be one of {WEIGHT_SCHEMES} or a list")
        else:
            if len(self.weights) != sum(len(e.n) for e in self.eacs) or any(w <= 0 for w in self.weights):
                raise ConfigError("explicit weights need one positive value per (EAC, n) pair")
        if any(s not in VERIFY_SYSTEMS for s in self.verify.systems):
            raise ConfigError(f"verify.systems must be drawn from {VERIFY_SYSTEMS}")
        if self.verify.seeds < 1 or any(e <= 0 for e in self.verify.eps):
            raise ConfigError("verify.seeds and verify.eps must be positive")
        for g in self.gates:
            g.lindbladian(self.num_qubits)
        for k, v in self.truth.items():
            v.delta(self.num_qubits, f"truth.{k}")

    # ---------------------------------------------------------- builders

    def gate_set(self) -> GateSet:
        return GateSet.from_lindbladians({g.name: g.lindbladian(self.num_qubits) for g in self.gates})

    def deltas(self) -> list[np.ndarray | None]:
        """Injected generator errors per gate label (None where none injected)."""
        return [
            self.truth[g.name].delta(self.num_qubits, f"truth.{g.name}") if g.name in self.truth else None
            for g in self.gates
        ]

    def estimated_labels(self) -> list[int]:
        names = [g.name for g in self.gates]
        if self.estimate:
            return [names.index(s) for s in self.estimate]
        used = {u for e in self.eacs for u in e.unit}
        return [i for i, n in enumerate(names) if n in used]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))
