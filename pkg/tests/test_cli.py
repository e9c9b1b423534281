import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from aaqc import cli
from aaqc.errors import ConfigError
from aaqc.numerics import TWO_PI


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    lines = path.read_text().splitlines()
    comments = [l for l in lines if l.startswith("#")]
    rows = list(csv.DictReader(l for l in lines if not l.startswith("#")))
    return comments, rows


def test_spectrum_two_level(tmp_path, capsys):
    out = tmp_path / "spec.csv"
    code, _, _ = run(capsys, "spectrum", "--out", str(out), "--set", "model=two_level",
                     "--set", "n_samples=41")
    assert code == 0
    comments, rows = read_csv(out)
    assert comments[0] == f"# schema={cli.SCHEMA_VERSION}"
    assert json.loads(comments[1].split("=", 1)[1])["model"] == "two_level"
    assert set(rows[0]) == {"s", "curve_id", "theta_lifted", "theta_mod2pi", "overlap_with_v"}
    summary = json.loads((tmp_path / "spec.csv.summary.json").read_text())["summary"]
    assert abs(summary["anholonomy_shift"] - TWO_PI / 3) < 1e-9


def test_spectrum_fair_gap(tmp_path, capsys):
    out = tmp_path / "fair.csv"
    assert run(capsys, "spectrum", "--out", str(out), "--set", "model=grover_fair")[0] == 0
    summary = json.loads((tmp_path / "fair.csv.summary.json").read_text())["summary"]
    assert summary["min_gap"] > 0
    assert 0 < summary["s_at_min"] < TWO_PI


def test_degenerate_kick_exits_2(capsys):
    code, _, err = run(capsys, "spectrum", "--set", "model=two_level", "--set", "b=0")
    assert code == 2
    assert json.loads(err)["error"] == "DegenerateChoice"


def test_unknown_key_exits_2(capsys):
    code, _, err = run(capsys, "spectrum", "--set", "bogus=1")
    assert code == 2
    assert json.loads(err)["error"] == "ConfigError"


def test_config_file_and_override(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"model": "two_level", "E2": 1.0}))
    cfg = cli.resolve_config("spectrum", str(path), ["E2=2.5"])
    assert cfg["model"] == "two_level" and cfg["E2"] == 2.5
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        cli.resolve_config("spectrum", str(path), [])


def test_numerical_failure_exits_3(capsys):
    code, _, err = run(capsys, "gap-scan", "--set", "N_values=[100]", "--set", "E_P=2.0",
                       "--set", "alpha=-1.0")
    assert code == 3
    assert json.loads(err)["error"] == "CrossingNotFound"


def test_output_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out, threads in ((a, "1"), (b, "3")):
        assert run(capsys, "gap-scan", "--out", str(out), "--threads", threads,
                   "--set", "N_values=[100, 1000, 10000]")[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_gap_scan_slope(tmp_path, capsys):
    out = tmp_path / "gap.csv"
    assert run(capsys, "gap-scan", "--out", str(out))[0] == 0
    _, rows = read_csv(out)
    footer = rows[-1]
    assert footer["N"] == "fit_slope"
    assert abs(float(footer["min_gap"]) + 0.5) <= 0.05
    assert [int(r["N"]) for r in rows[:-1]] == [100, 1000, 10000, 100000, 1000000]


def test_passage(capsys):
    code, out, _ = run(capsys, "passage", "--set", "L_values=[16, 256]", "--set", "epsilon=0.2")
    assert code == 0
    data = json.loads(out)
    assert {r["schedule_type"] for r in data["table"]} == {"linear", "roland_cerf"}
    assert all(0 <= r["error"] <= 1 for r in data["table"])
    rt = data["running_time"]
    assert data["ratio_roland_cerf_to_linear"] == rt["roland_cerf"] / rt["linear"]


def test_clock_demo(capsys):
    code, out, _ = run(capsys, "clock-demo", "--set", "delta_L_max=4", "--set",
                       'circuit={"n": 2, "gates": [{"gate": "H", "targets": [0]},'
                       ' {"gate": "CNOT", "targets": [0, 1]}]}')
    assert code == 0
    data = json.loads(out)
    assert data["passage_error"] < 0.05
    assert abs(data["post_selection_probability"] - 1 / 3) < 0.02
    assert data["fidelity"] > 0.99
    assert [r["L"] for r in data["delta_vs_L"]] == [1, 2, 3, 4]


def test_clock_demo_single_x(capsys):
    code, out, _ = run(capsys, "clock-demo", "--set", "delta_L_max=1")
    assert code == 0
    assert abs(json.loads(out)["post_selection_probability"] - 0.5) <= 0.02


def test_discretize(tmp_path, capsys):
    out = tmp_path / "lz.csv"
    assert run(capsys, "discretize", "--out", str(out), "--set", "L_values=[64, 256, 1024]")[0] == 0
    _, rows = read_csv(out)
    dist = [float(r["distance_to_reference"]) for r in rows]
    assert dist == sorted(dist, reverse=True)
    assert all(0 <= float(r["ground_fidelity"]) <= 1 for r in rows)


def test_custom_matrix(tmp_path, capsys):
    path = tmp_path / "m.json"
    h = np.stack([np.diag([0.0, 1.0]), np.zeros((2, 2))], axis=-1)
    r = 2 ** -0.5
    path.write_text(json.dumps({"H0": h.tolist(), "v": [[r, 0], [0, r]], "T": 1.0}))
    out = tmp_path / "c.csv"
    assert run(capsys, "spectrum", "--out", str(out), "--set", "model=custom",
               "--set", f"matrix_file={path}", "--set", "n_samples=21")[0] == 0
    summary = json.loads((tmp_path / "c.csv.summary.json").read_text())["summary"]
    assert abs(summary["anholonomy_shift"] - 1.0) < 1e-9
    # plain real entries are rejected rather than misread as pairs
    path.write_text(json.dumps({"H0": np.diag([0.0, 1.0]).tolist(), "v": [r, r]}))
    code, _, err = run(capsys, "spectrum", "--set", "model=custom", "--set", f"matrix_file={path}")
    assert code == 2 and json.loads(err)["error"] == "ConfigError"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "aaqc.cli", "spectrum", "--set", "model=two_level",
                           "--set", "b=0"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["exit_status"] == 2
