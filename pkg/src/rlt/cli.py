"""Command-line driver: ``rlt {analyze,simulate,fit,verify} --config FILE --out DIR``.

Every report is written as sorted, indented JSON so identical inputs give
byte-identical files. Wall-clock timestamps go to a separate
``metadata_<command>.json``.

Exit codes: 0 success, 2 configuration or input error, 3 RLT not applicable
(singular gate, aperiodic unit, branch cut), 4 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import logging
import sys
import zipfile
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, eac, reps, scaling, sim, tomo
from .config import ConfigError, ExperimentConfig
from .eac import AperiodicError
from .linalg import BranchCutError, LinalgError
from .perturb import SingularityError

log = logging.getLogger("rlt")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_APPLICABLE = 3
EXIT_SOLVER = 4
AMP_TOL = 1e-9


# ------------------------------------------------------------------ output


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")


def write_npz(path: Path, arrays: dict[str, np.ndarray]) -> None:
    """np.savez-compatible archive with fixed member timestamps (reproducible bytes)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arrays[name]), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, buf.getvalue())


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def write_metadata(out: Path, command: str, cfg: ExperimentConfig, argv: Sequence[str]) -> None:
    write_json(
        out / f"metadata_{command}.json",
        {
            "command": command,
            "argv": list(argv),
            "seed": cfg.seed,
            "version": __version__,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        },
    )


def _labels(basis: reps.MatrixBasis) -> list[str]:
    return list(basis.labels)


def _hs_entries(basis: reps.MatrixBasis) -> list[str]:
    lab = _labels(basis)
    return [f"{a}|{b}" for a in lab for b in lab]


def eac_seed(seed: int, eac_index: int, n_index: int) -> int:
    """Independent, reproducible stream for one (EAC, n) pair."""
    return int(np.random.SeedSequence([seed, eac_index, n_index]).generate_state(1)[0])


# ----------------------------------------------------------------- analyze


def _amplification_summary(am: eac.AmplificationMaps, basis: reps.MatrixBasis) -> tuple[dict, list]:
    """Per gate: which elementary HS directions of dL feed f_amp / f_not_amp."""
    entries = _hs_entries(basis)
    per_gate = {}
    csv_rows = []
    for i in am.used():
        name = am.gate_names[i]
        fa = am.f_amp[i].matrix
        fn = am.f_not_amp[i].matrix
        amp = np.linalg.norm(fa, axis=0)
        not_amp = np.linalg.norm(fn, axis=0)
        per_gate[name] = {
            "rank_f_amp": int(np.linalg.matrix_rank(fa, tol=AMP_TOL)),
            "rank_f_not_amp": int(np.linalg.matrix_rank(fn, tol=AMP_TOL)),
            "amplified_directions": [e for e, v in zip(entries, amp) if v > AMP_TOL],
            "not_amplified_only": [e for e, v, w in zip(entries, amp, not_amp) if v <= AMP_TOL < w],
        }
        for e, v, w in zip(entries, amp, not_amp):
            csv_rows.append((name, e, float(v), float(w)))
    return per_gate, csv_rows


def cmd_analyze(cfg: ExperimentConfig, out: Path) -> dict:
    gs = cfg.gate_set()
    basis = reps.pauli_basis(cfg.num_qubits)
    report = {"command": "analyze", "num_qubits": cfg.num_qubits, "basis": _labels(basis), "eacs": {}}
    csv_rows = []
    for spec in cfg.eacs:
        am = eac.amplification_maps(gs, spec.unit)
        summary, rows = _amplification_summary(am, basis)
        csv_rows.extend((spec.name, *r) for r in rows)
        report["eacs"][spec.name] = {
            "unit": list(spec.unit),
            "period": am.period,
            "L_unit_ideal": am.L_unit_ideal,
            "n": list(spec.n),
            "branch_margin": {str(n): am.branch_margin(n) for n in spec.n},
            "f_not_amp_is_zero": bool(all(np.abs(f.matrix).max(initial=0.0) <= AMP_TOL for f in am.f_not_amp)),
            "gates": summary,
        }
        arrays = {"L_unit_ideal": am.L_unit_ideal}
        for i in am.used():
            g = am.gate_names[i]
            arrays[f"F_{g}"] = am.F_unit[i].matrix
            arrays[f"f_amp_{g}"] = am.f_amp[i].matrix
            arrays[f"f_not_amp_{g}"] = am.f_not_amp[i].matrix
        write_npz(out / "maps" / f"{spec.name}.npz", arrays)
    write_json(out / "analysis.json", report)
    write_csv(out / "amplification.csv", ("eac", "gate", "direction", "amp_norm", "not_amp_norm"), csv_rows)
    return report


# ---------------------------------------------------------------- simulate


def data_path(root: Path, eac_name: str, n: int) -> Path:
    return root / f"{eac_name}_n{n}.json"


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> dict:
    if cfg.num_qubits not in (1, 2):
        raise ConfigError("simulation supports 1 or 2 qubits")
    gs = cfg.gate_set()
    deltas = cfg.deltas()
    spam_ideal = sim.qpt_circuit_set(cfg.num_qubits)
    spam = sim.with_spam_error(spam_ideal, cfg.spam_depolarizing, cfg.spam_rotation)
    try:
        sim.noisy_unit(gs, list(range(len(gs))), deltas)
    except sim.NonCPTPError as exc:
        raise ConfigError(f"injected error is not physical: {exc}") from exc
    files = []
    for a, spec in enumerate(cfg.eacs):
        for j, n in enumerate(spec.n):
            probs = sim.exact_probabilities(gs, spec.unit, deltas, spam, n)
            record = {"eac": spec.name, "unit": list(spec.unit), "n": n, "shape": list(spam.shape)}
            if cfg.shots == "exact":
                record.update(kind="probabilities", shots=None, seed=None, data=probs)
            else:
                table = sim.sample_counts(probs, cfg.shots, eac_seed(cfg.seed, a, j))
                record.update(kind="counts", shots=table.shots, seed=table.seed, data=table.counts)
            path = data_path(out / "data", spec.name, n)
            write_json(path, record)
            files.append(str(path.relative_to(out)))
    report = {"command": "simulate", "files": files, "shots": cfg.shots}
    write_json(out / "simulation.json", report)
    return report


# --------------------------------------------------------------------- fit


def load_data(path: Path, spam: sim.SPAMModel):
    if not path.is_file():
        raise ConfigError(f"missing data file: {path}")
    rec = json.loads(path.read_text())
    arr = np.asarray(rec["data"], float)
    if arr.shape != spam.shape:
        raise ConfigError(f"{path}: data shape {arr.shape} does not match circuit set {spam.shape}")
    if rec["kind"] == "counts":
        return sim.ShotTable(arr.astype(np.int64), int(rec["shots"]), int(rec["seed"]))
    return arr


def _kernel_listing(fp: tomo.FitProblem, kernel: np.ndarray, basis: reps.MatrixBasis, tol: float = 1e-6) -> list:
    entries = _hs_entries(basis)
    names = [f"{g}:{e}" for g in fp.gate_names for e in entries]
    out = []
    for col in kernel.T:
        big = np.flatnonzero(np.abs(col) > tol)
        out.append({names[k]: float(col[k]) for k in big})
    return out


def cmd_fit(cfg: ExperimentConfig, out: Path, data_dir: Path | None = None) -> dict:
    if not cfg.eacs:
        raise ConfigError("fit needs at least one EAC")
    data_dir = data_dir or out / "data"
    gs = cfg.gate_set()
    basis = reps.pauli_basis(cfg.num_qubits)
    spam_ideal = sim.qpt_circuit_set(cfg.num_qubits)
    eacs = []
    qpt_diag = {}
    for spec in cfg.eacs:
        am = eac.amplification_maps(gs, spec.unit)
        for n in spec.n:
            data = load_data(data_path(data_dir, spec.name, n), spam_ideal)
            est = tomo.qpt_linear_inversion(data, spam_ideal)
            y = tomo.extract_lindbladian(est, n % am.period, am.L_unit_ideal)
            key = f"{spec.name}_n{n}"
            qpt_diag[key] = {"tp_residual": est.tp_residual, "cp_min_eig": est.cp_min_eig}
            eacs.append(tomo.EACData(am, n, y, key))
    estimated = cfg.estimated_labels()
    fp = tomo.assemble_design(
        eacs,
        estimated=estimated,
        weights=cfg.weights,
        basis=basis,
        ideal=[g.lindbladian for g in gs.gates],
    )
    result = tomo.fit_constrained(fp, solver=cfg.solver.name, tol=cfg.solver.tol)
    report = {
        "command": "fit",
        "basis": _labels(basis),
        "status": result.status,
        "objective": result.objective,
        "residuals": dict(zip(fp.eac_names, result.residuals)),
        "physicality": dict(zip(fp.gate_names, result.physicality)),
        "constraint_slack": dict(zip(fp.gate_names, result.constraint_slack)),
        "deltas": dict(zip(fp.gate_names, result.deltas)),
        "rank": result.rank,
        "n_free": result.n_free,
        "unidentifiable_directions": _kernel_listing(fp, result.kernel, basis),
        "qpt": qpt_diag,
    }
    truth = cfg.deltas()
    if any(truth[i] is not None for i in estimated):
        proj = tomo.identifiable_projector(fp)
        true_x = np.concatenate(
            [np.zeros(fp.m**2) if truth[i] is None else np.real(truth[i]).ravel() for i in estimated]
        )
        fit_x = np.concatenate([d.ravel() for d in result.deltas])
        err = fit_x - true_x
        m2 = fp.m**2
        report["recovery"] = {
            name: {
                "true": true_x[k * m2:(k + 1) * m2].reshape(fp.m, fp.m),
                "error_fro": float(np.linalg.norm(err[k * m2:(k + 1) * m2])),
                "identifiable_error_fro": float(np.linalg.norm((proj @ err)[k * m2:(k + 1) * m2])),
            }
            for k, name in enumerate(fp.gate_names)
        }
    write_json(out / "fit.json", report)
    return report


# ------------------------------------------------------------------ verify


def _config_rows(cfg: ExperimentConfig) -> list[dict]:
    """Algorithm-1 residual ratios on the configured gate set and units."""
    gs = cfg.gate_set()
    rows = []
    for a, spec in enumerate(cfg.eacs):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, a]))
        try:
            eac.check_applicable(gs, spec.unit)
            fn = scaling.algorithm1_residual(
                gs, spec.unit, [scaling.unit_direction(rng, gs.m) for _ in range(len(gs))]
            )
        except (SingularityError, BranchCutError) as exc:
            rows.append({"formula": "algorithm1", "system": "config", "unit": list(spec.unit), "error": str(exc)})
            continue
        rows.append(scaling._row("algorithm1", "config", cfg.seed, fn, cfg.verify.eps, unit=list(spec.unit)))
    return rows


def cmd_verify(cfg: ExperimentConfig, out: Path, lo: float = 3.5, hi: float = 4.5) -> dict:
    rows = []
    for system in cfg.verify.systems:
        rows.extend(scaling.scaling_rows(system, seeds=cfg.verify.seeds, eps_list=cfg.verify.eps))
    rows.extend(_config_rows(cfg))
    bch = scaling.bch_rows()
    ratios = [v for r in rows for v in r.get("ratio", {}).values()]
    report = {
        "command": "verify",
        "rows": rows,
        "bch": bch,
        "summary": {
            "rows": len(rows),
            "min_ratio": min(ratios) if ratios else None,
            "max_ratio": max(ratios) if ratios else None,
            "all_within": bool(all(lo <= v <= hi for v in ratios)),
            "bounds": [lo, hi],
            "max_residual_at_zero": max((r.get("residual_at_zero", 0.0) for r in rows), default=0.0),
        },
    }
    write_json(out / "verify.json", report)
    csv_rows = []
    for r in rows:
        for e, v in r.get("ratio", {}).items():
            csv_rows.append((r["formula"], r["system"], r["seed"], e, r["residual"][e], v))
    write_csv(out / "verify.csv", ("formula", "system", "seed", "eps", "residual", "ratio"), csv_rows)
    return report


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rlt", description="Robust Lindbladian tomography pipeline")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("analyze", "build amplification maps for every configured EAC"),
        ("simulate", "simulate QPT data for every (EAC, n)"),
        ("fit", "estimate generator errors from QPT data"),
        ("verify", "residual-scaling checks of the first-order formulas"),
    ):
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", required=True, type=Path, help="experiment config (JSON)")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "fit":
            p.add_argument("--data", type=Path, default=None, help="data directory (default OUT/data)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            cfg = cfg.with_seed(args.seed)
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "analyze":
            cmd_analyze(cfg, out)
        elif args.command == "simulate":
            cmd_simulate(cfg, out)
        elif args.command == "fit":
            cmd_fit(cfg, out, args.data)
        else:
            cmd_verify(cfg, out)
        write_metadata(out, args.command, cfg, argv)
    except (ConfigError, tomo.RankDeficientError) as exc:
        print(f"rlt: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularityError, AperiodicError, BranchCutError, LinalgError) as exc:
        print(f"rlt: not applicable: {exc}", file=sys.stderr)
        return EXIT_NOT_APPLICABLE
    except tomo.SolverError as exc:
        print(f"rlt: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK
