import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from rlt import cli

ROOT = Path(__file__).resolve().parents[1]


def write_cfg(tmp_path, **over) -> Path:
    d = {
        "schema_version": 1,
        "num_qubits": 1,
        "gates": [{"name": "X90"}, {"name": "Y90"}],
        "eacs": [
            {"name": "x", "unit": ["X90"], "n": [4, 8, 16, 40]},
            {"name": "y", "unit": ["Y90"], "n": [4, 8, 16, 40]},
            {"name": "xy", "unit": ["X90", "Y90"], "n": [4, 8, 16, 40]},
        ],
        "truth": {
            "X90": {"hamiltonian": {"X": 5e-4, "Z": 3e-4}, "jumps": [{"lowering": 0, "rate": 4e-4}]},
            "Y90": {"hamiltonian": {"Y": -4e-4}, "jumps": [{"pauli": "Z", "rate": 2e-4}]},
        },
        "seed": 3,
        "verify": {"systems": ["1q"], "seeds": 2, "eps": [0.01, 0.001]},
    }
    d.update(over)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(d))
    return p


def run(cfg, out, command, *extra):
    return cli.main([command, "--config", str(cfg), "--out", str(out), *extra])


def test_analyze_singular_gate(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path,
        gates=[{"name": "X"}, {"name": "Y90"}],
        eacs=[{"name": "bad", "unit": ["X", "Y90"], "n": [4]}],
        truth={},
    )
    assert run(cfg, tmp_path / "out", "analyze") == cli.EXIT_NOT_APPLICABLE
    err = capsys.readouterr().err
    assert "'X'" in err and "singular" in err and "90-degree" in err


def test_analyze_identity_unit(tmp_path):
    cfg = write_cfg(tmp_path, gates=[{"name": "I"}], eacs=[{"name": "idle", "unit": ["I"], "n": [1, 2]}], truth={})
    out = tmp_path / "out"
    assert run(cfg, out, "analyze") == 0
    rep = json.loads((out / "analysis.json").read_text())["eacs"]["idle"]
    assert rep["period"] == 1
    assert rep["f_not_amp_is_zero"]
    maps = np.load(out / "maps" / "idle.npz")
    np.testing.assert_array_equal(maps["f_not_amp_I"], 0)


def test_analyze_x90_period_and_csv(tmp_path):
    out = tmp_path / "out"
    assert run(write_cfg(tmp_path), out, "analyze") == 0
    rep = json.loads((out / "analysis.json").read_text())
    assert rep["eacs"]["x"]["period"] == 4
    assert rep["eacs"]["xy"]["period"] == 3
    assert "X|X" in rep["eacs"]["x"]["gates"]["X90"]["amplified_directions"]
    lines = (out / "amplification.csv").read_text().splitlines()
    assert lines[0] == "eac,gate,direction,amp_norm,not_amp_norm"
    assert len(lines) == 1 + 16 * 4
    assert (out / "metadata_analyze.json").exists()


def test_simulate_is_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, shots=10000)
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(cfg, a, "simulate") == 0
    assert run(cfg, b, "simulate") == 0
    for f in sorted((a / "data").iterdir()):
        assert f.read_bytes() == (b / "data" / f.name).read_bytes()
    rec = json.loads((a / "data" / "x_n4.json").read_text())
    assert rec["kind"] == "counts" and rec["shots"] == 10000
    assert np.asarray(rec["data"]).sum(axis=-1).tolist() == [[10000] * 3] * 4
    c = tmp_path / "c"
    assert run(cfg, c, "simulate", "--seed", "4") == 0
    assert (c / "data" / "x_n4.json").read_bytes() != (a / "data" / "x_n4.json").read_bytes()


def test_simulate_exact_sentinel_and_damping(tmp_path):
    gamma = 1e-3
    cfg = write_cfg(
        tmp_path,
        gates=[{"name": "I"}],
        eacs=[{"name": "idle", "unit": ["I"], "n": [1, 100, 1000]}],
        truth={"I": {"jumps": [{"lowering": 0, "rate": gamma}]}},
    )
    out = tmp_path / "out"
    assert run(cfg, out, "simulate") == 0
    for n in (1, 100, 1000):
        rec = json.loads((out / "data" / f"idle_n{n}.json").read_text())
        assert rec["kind"] == "probabilities"
        # preparation |1>, Z measurement, outcome 0
        assert rec["data"][1][2][0] == pytest.approx(1 - np.exp(-gamma * n), abs=1e-12)


def test_simulate_rejects_unphysical_truth(tmp_path):
    cfg = write_cfg(tmp_path, truth={"X90": {"jumps": [{"pauli": "Z", "rate": -1.0}]}})
    assert run(cfg, tmp_path / "out", "simulate") == cli.EXIT_CONFIG


def test_closed_loop_fit(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert run(cfg, out, "simulate") == 0
    assert run(cfg, out, "fit") == 0
    rep = json.loads((out / "fit.json").read_text())
    assert rep["status"] == "optimal"
    for gate in ("X90", "Y90"):
        assert rep["recovery"][gate]["identifiable_error_fro"] < 1e-5
        assert rep["physicality"][gate]["cp_min_eig_restricted"] >= -1e-8
    assert rep["rank"] < rep["n_free"]
    assert len(rep["unidentifiable_directions"]) == rep["n_free"] - rep["rank"]


def test_fit_missing_data(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert run(cfg, tmp_path / "out", "fit") == cli.EXIT_CONFIG
    assert "missing data file" in capsys.readouterr().err


def test_fit_single_eac_lists_unidentifiable(tmp_path):
    cfg = write_cfg(tmp_path, eacs=[{"name": "x", "unit": ["X90"], "n": [4, 8]}], truth={})
    out = tmp_path / "out"
    assert run(cfg, out, "simulate") == 0
    assert run(cfg, out, "fit") == 0
    rep = json.loads((out / "fit.json").read_text())
    assert rep["unidentifiable_directions"]
    assert all(k.startswith("X90:") for d in rep["unidentifiable_directions"] for k in d)


def test_fit_solver_failure_exit_code(tmp_path):
    cfg = write_cfg(tmp_path, solver={"name": "NO_SUCH_SOLVER", "tol": 1e-8})
    out = tmp_path / "out"
    assert run(cfg, out, "simulate") == 0
    assert run(cfg, out, "fit") == cli.EXIT_SOLVER


def test_verify_report(tmp_path):
    out = tmp_path / "out"
    assert run(write_cfg(tmp_path), out, "verify") == 0
    rep = json.loads((out / "verify.json").read_text())
    assert rep["summary"]["all_within"]
    assert rep["summary"]["max_residual_at_zero"] < 1e-12
    gate_rows = [r for r in rep["bch"] if r["scale"] == "gate"]
    assert {r["gate"] for r in gate_rows} == {"X90", "ZX90"}
    assert not any(r["bch_condition"] for r in gate_rows)
    # one-gate units are exact: flagged, not ratio-tested
    cfg_rows = [r for r in rep["rows"] if r["system"] == "config"]
    assert [r["exact"] for r in cfg_rows] == [True, True, False]


def test_config_errors(tmp_path):
    assert cli.main(["analyze", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    cfg = write_cfg(tmp_path)
    assert run(cfg, tmp_path / "o", "analyze", "--seed", "-3") == cli.EXIT_CONFIG


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path)
    proc = subprocess.run(
        [sys.executable, "-m", "rlt", "analyze", "--config", str(cfg), "--out", str(tmp_path / "out")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    help_text = subprocess.run([sys.executable, "-m", "rlt", "--help"], capture_output=True, text=True).stdout
    for cmd in ("analyze", "simulate", "fit", "verify"):
        assert cmd in help_text


@pytest.mark.parametrize("name", ["x90_y90.json", "zx90.json", "singular_x.json"])
def test_shipped_configs_parse(name):
    from rlt.config import ExperimentConfig

    ExperimentConfig.load(ROOT / "configs" / name)
