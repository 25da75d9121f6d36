import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from precession import cli
from precession.errors import NumericalInconsistency
from precession.protocol import pos_curve
from precession.spin import load_state


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert "precession 0.1.0" in capsys.readouterr().out


def test_table1(capsys):
    code, out, _ = run(["table1", "--format", "json"], capsys)
    assert code == 0
    rows = {r["label"]: r for r in json.loads(out)}
    assert round(rows["P8_7"]["classical_bound"], 3) == 0.571
    assert round(rows["P8_7"]["max_score"], 3) == 0.656
    assert round(rows["P4_3"]["classical_bound"], 3) == 0.667
    assert round(rows["P4_3"]["max_score"], 3) == 0.750
    assert abs(rows["P8_5u"]["max_score"] - 0.683) <= 0.002
    assert len(rows["P8_5u"]["angles_rad"]) == 5


def test_sweep_csv(capsys, tmp_path):
    out = tmp_path / "sweep.csv"
    code, _, _ = run(["sweep", "--state", "cat", "--points", "720", "--out", str(out)], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert rows[0] == ["phi", "pos_expectation"]
    phis = np.array([float(p) for p, _ in rows[1:]])
    vals = np.array([float(v) for _, v in rows[1:]])
    assert len(vals) == 720
    # the cat curve only has a 7-fold harmonic, so a K=7 sample mean equals the curve value
    i = int(np.argmax(vals))
    assert vals[i] == pytest.approx(0.65625, abs=1e-9)
    psi = cli.resolve_state(cli.RunConfig("sweep", state="cat"))[0]
    mean = np.mean(pos_curve(psi, phis[i] + 2 * np.pi * np.arange(7) / 7))
    assert mean == pytest.approx(0.65625, abs=1e-9)
    code, js, _ = run(["sweep", "--state", "cat", "--k", "7", "--format", "json"], capsys)
    assert json.loads(js)["best_score"] == pytest.approx(0.65625, abs=1e-9)


def test_score_subspace_spin_half(capsys):
    code, out, _ = run(["score", "--state", "cat", "--subspace", "3..4", "--k", "3"], capsys)
    assert code == 0
    assert json.loads(out)["score"] == pytest.approx(0.5, abs=1e-10)


def test_score_table_row_embedded(capsys):
    code, out, _ = run(["sweep", "--state", "table1:P6_5", "--d", "8", "--k", "5", "--format", "json"], capsys)
    assert code == 0
    assert json.loads(out)["best_score"] == pytest.approx(0.688, abs=5e-4)


def test_mc_classical(capsys):
    code, out, _ = run(["mc-classical", "--k", "7", "--samples", "100000"], capsys)
    assert code == 0
    res = json.loads(out)
    assert res["max_score"] == "4/7" and res["classical_bound"] == "4/7"


def test_optimize_round_trip(capsys, tmp_path):
    state_file = tmp_path / "opt.json"
    code, _, _ = run(["optimize", "--d", "8", "--k", "5", "--starts", "16", "--out", str(state_file)], capsys)
    assert code == 0
    rec = json.loads(state_file.read_text())
    load_state(state_file)
    code, out, _ = run(["score", "--state", str(state_file), "--k", "5", "--uneven", "--starts", "16"], capsys)
    assert code == 0
    assert json.loads(out)["score"] == pytest.approx(rec["score"], abs=1e-6)
    code, out, _ = run(["wigner", "--state", str(state_file), "--n-theta", "5", "--n-phi", "6"], capsys)
    assert code == 0 and out.startswith("theta,phi,w")
    code, out, _ = run(["pulse", "--state", str(state_file)], capsys)
    assert code == 0 and json.loads(out)[0]["type"] == "givens"


def test_pulse_summary(capsys, tmp_path):
    seq = tmp_path / "seq.json"
    code, out, _ = run(["pulse", "--state", "table1:P8_3", "--out", str(seq)], capsys)
    assert code == 0
    summary = json.loads(out)
    assert summary["fidelity"] > 1 - 1e-12 and summary["fidelity_time_domain"] > 1 - 1e-9
    assert len(json.loads(seq.read_text())) == 7


def test_shots(capsys, tmp_path):
    out = tmp_path / "shots.csv"
    args = ["shots", "--state", "cat", "--k", "7", "--shots", "1000", "--seed", "4", "--format", "csv"]
    assert run(args + ["--out", str(out)], capsys)[0] == 0
    assert out.read_text().splitlines()[0] == "angle_index,outcome_m,count"
    code, js, _ = run(["score", "--state", "cat", "--k", "7", "--shots", "1000", "--seed", "4"], capsys)
    est = json.loads(js)
    assert est["ci_low"] <= est["point"] <= est["ci_high"]


@pytest.mark.parametrize("argv", [
    ["sweep", "--state", "cat", "--points", "50"],
    ["shots", "--state", "table1:P8_3", "--k", "3", "--shots", "200", "--seed", "9"],
    ["mc-classical", "--k", "5", "--samples", "2000", "--seed", "3"],
    ["wigner", "--state", "coherent", "--n-theta", "7", "--n-phi", "9"],
])
def test_byte_identical(capsys, tmp_path, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(argv + ["--out", str(a)], capsys)[0] == 0
    assert run(argv + ["--out", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("argv", [
    ["score", "--state", "cat", "--k", "4"],
    ["score", "--state", "cat"],
    ["score", "--state", "no-such-file.json", "--k", "3"],
    ["sweep", "--state", "cat", "--subspace", "2..4"],
    ["sweep", "--state", "cat", "--subspace", "two"],
    ["shots", "--state", "cat", "--k", "3"],
    ["pulse", "--state", "table1:P9_9"],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(argv, capsys)
    assert code == 2
    assert set(json.loads(err)) == {"error", "message"}


def test_parser_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2
    assert json.loads(capsys.readouterr().err)["error"] == "usage"


def test_numerical_failure_exit_3(capsys, monkeypatch):
    def boom(cfg):
        raise NumericalInconsistency("imaginary residue")

    monkeypatch.setitem(cli.DISPATCH, "sweep", boom)
    code, _, err = run(["sweep", "--state", "cat"], capsys)
    assert code == 3
    assert json.loads(err) == {"error": "NumericalInconsistency", "message": "imaginary residue"}


def test_atomic_write_leaves_no_temp(tmp_path):
    target = tmp_path / "sub" / "x.txt"
    cli.write_output("hello\n", str(target))
    cli.write_output("again\n", str(target))
    assert target.read_text() == "again\n"
    assert sorted(p.name for p in target.parent.iterdir()) == ["x.txt"]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "precession", "mc-classical", "--k", "3", "--samples", "10"],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["K"] == 3


@pytest.mark.parametrize("sub, K, expected", [(None, 7, 0.65625), ("1..6", 5, 0.6875), ("2..5", 3, 0.75)])
def test_named_cat_is_aligned(capsys, sub, K, expected):
    argv = ["score", "--state", "cat", "--k", str(K)] + (["--subspace", sub] if sub else [])
    code, out, _ = run(argv, capsys)
    assert code == 0
    assert json.loads(out)["score"] == pytest.approx(expected, abs=1e-10)
