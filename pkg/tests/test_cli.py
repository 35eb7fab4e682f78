import json
import math
from pathlib import Path

import numpy as np
import pytest

import identikit
from identikit.cli import main

OPERON_FILE = Path(identikit.__file__).parent / "data" / "operon_input.json"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_respond_nine_state(capsys):
    code, out, _ = run(capsys, "respond", "--model", "nine-state", "--x", "1", "--experiment", "2")
    assert code == 0
    doc = json.loads(out)
    exact = math.cos(1) + 2 * math.sin(1) + 4 * math.e * math.sin(2)
    assert doc["result"]["value"][0] == pytest.approx(exact, abs=1e-6)
    assert doc["version"] == identikit.__version__ and "argv" in doc["config"]


def test_unknown_model_exit_1(capsys):
    code, _, err = run(capsys, "respond", "--model", "nope", "--x", "1", "--experiment", "2")
    assert code == 1 and "unknown model" in err


def test_usage_error_prints_synopsis(capsys):
    code, _, err = run(capsys, "respond", "--model", "nine-state")
    assert code == 1 and "usage:" in err


def test_numerical_failure_exit_2(capsys):
    code, _, err = run(capsys, "respond", "--model", "operon-input", "--x", "1,1,2,0.4,0.8",
                       "--experiment", "100,1")
    assert code == 2 and "numerical failure" in err
    code, out, _ = run(capsys, "respond", "--model", "operon-input", "--x", "1,1,2,0.4,0.8",
                       "--experiment", "100,1", "--adaptive")
    assert code == 0 and json.loads(out)["result"]["value"][0] == pytest.approx(math.exp(-0.4), abs=1e-3)


def test_mc_theorem_reproducible(tmp_path, capsys):
    out = tmp_path / "report.json"
    args = ["mc-theorem", "--model", "operon-input", "--q", "11", "--pairs", "50", "--seed", "7",
            "--out", str(out)]
    assert main(args) == 0
    first = out.read_bytes()
    doc = json.loads(first)
    assert "separation_fraction" in doc["result"] and doc["seed"] == 7
    assert main(doc["config"]["argv"]) == 0
    assert out.read_bytes() == first


def test_list_and_parse_check(capsys):
    code, out, _ = run(capsys, "list-models")
    assert code == 0 and "operon-input" in out and "nine-state" in out
    code, out, _ = run(capsys, "parse-check", str(OPERON_FILE))
    assert code == 0 and "parameters=5" in out


def test_parse_check_bad_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x", "states": [')
    code, _, err = run(capsys, "parse-check", str(bad))
    assert code == 1 and "invalid JSON" in err


def test_simulate_csv(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    code, _, _ = run(capsys, "simulate", "--model", str(OPERON_FILE), "--x", "1,1,2,0.4,0.8",
                     "--experiment", "1,2", "--steps", "10", "--out", str(out))
    lines = out.read_text().splitlines()
    assert code == 0 and lines[0] == "t,M,E" and len(lines) == 12


def _write_set(tmp_path, pts):
    p = tmp_path / "set.json"
    p.write_text(json.dumps({"experiments": pts}))
    return str(p)


def test_rank_and_distinguish(tmp_path, capsys):
    s = _write_set(tmp_path, [[1.0, 0.5], [2.0, 1.5], [0.3, 3.0], [1.5, 4.0], [2.5, 2.0]])
    code, out, _ = run(capsys, "rank", "--model", "operon-input", "--x", "1,1,2,0.4,0.8", "--set", s)
    doc = json.loads(out)
    assert code == 0 and doc["result"]["rank"] == 5 and len(doc["result"]["singular_values"]) == 5
    code, out, _ = run(capsys, "distinguish", "--model", "nine-state", "--x1", "1", "--x2", "2", "--set",
                       _write_set(tmp_path, [[0.0]]))
    assert code == 0 and json.loads(out)["result"]["distinguished"] is True


def test_rank_max_local_set(capsys):
    code, out, _ = run(capsys, "rank-max", "--model", "nine-state", "--x", "1", "--seed", "2")
    assert code == 0 and json.loads(out)["result"]["rho"] == 1
    code, out, _ = run(capsys, "local-set", "--model", "nine-state", "--x", "1", "--pairs", "10")
    assert code == 0 and json.loads(out)["result"]["passed"] is True


def test_secant_and_lower_bound(tmp_path, capsys):
    for target in ("3,4", "0.2,-0.5,0.8", "0.1,0.2,0.3,0.4,0.5"):
        code, out, _ = run(capsys, "secant-chord", "--target", target)
        assert code == 0 and json.loads(out)["result"]["chord"]["residual"] < 1e-7
    out = tmp_path / "pair.json"
    code, _, _ = run(capsys, "lower-bound", "--r", "1", "--inputs", "0.3,1.7", "--out", str(out))
    assert code == 0 and json.loads(out.read_text())["result"]["set_gap"] < 1e-7
    code, _, _ = run(capsys, "secant-chord", "--target", "1,2,3,4")
    assert code == 1


def test_fit_command(tmp_path, capsys):
    s = _write_set(tmp_path, [[-1.0], [0.5], [1.5]])
    ys = [math.cos(1.2) + l * math.sin(1.2) + l * l * math.exp(1.2) * math.sin(2.4) for l in (-1.0, 0.5, 1.5)]
    d = tmp_path / "data.json"
    d.write_text(json.dumps({"measurements": ys}))
    code, out, _ = run(capsys, "fit", "--model", "nine-state", "--set", s, "--data", str(d), "--starts", "3")
    res = json.loads(out)["result"]
    assert code == 0 and abs(res["x_hat"][0] - 1.2) < 1e-5


def test_distinguish_ref(capsys):
    code, out, _ = run(capsys, "distinguish-ref", "--model", "nine-state", "--x0", "1", "--q", "2",
                       "--trials", "10", "--seed", "1")
    assert code == 0 and json.loads(out)["result"]["separation_fraction"] == 1.0
