import json
import subprocess
import sys

import numpy as np
import pytest

from homsense.cli import main
from homsense.numkit import matrix_to_json


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


@pytest.fixture
def files(tmp_path):
    return {
        "anti": write(tmp_path / "anti.json", [[1.0], [-1.0]]),
        "A2": write(tmp_path / "A2.json", [[1.0], [2.0]]),
        "y2": write(tmp_path / "y2.json", [1.0, 2.0]),
        "eps": write(tmp_path / "eps.json", [0.05, -0.02]),
        "A34": write(tmp_path / "A34.json", matrix_to_json(np.random.default_rng(0).standard_normal((2, 4)))),
        "line": write(tmp_path / "line.json", [[1.0]]),
        "bad": write(tmp_path / "bad.json", ["a", "b"]),
    }


def test_certify_exit_codes(capsys, files):
    code, out, _ = run(capsys, "certify", "--subspace", files["anti"], "--family", "perm:2")
    assert code == 2 and out["verdict"] == "violated" and out["witness"] is not None
    code, out, _ = run(capsys, "certify", "--subspace", files["anti"], "--family", "perm:2", "--pm")
    assert code == 0 and out["verdict"] == "holds"


def test_certify_sparse(capsys, files):
    code, out, _ = run(capsys, "certify", "--sparse", "1", "--sensing", files["A34"], "--family", "perm:2")
    assert code == 0 and out["verdict"] == "holds"


def test_certify_with_sensing_matrix(capsys, files):
    code, out, _ = run(capsys, "certify", "--subspace", files["line"], "--sensing", files["A2"], "--family", "perm:2")
    assert code == 0


def test_errors_exit_one(capsys, files):
    code, _, err = run(capsys, "certify", "--subspace", files["bad"], "--family", "perm:2")
    assert code == 1 and "InputError" in err
    code, _, err = run(capsys, "certify", "--subspace", files["anti"], "--family", "perm:3")
    assert code == 1
    code, _, _ = run(capsys, "certify", "--subspace", "/nonexistent.json", "--family", "perm:2")
    assert code == 1


def test_dimU_pair_and_all(capsys):
    code, out, _ = run(capsys, "dimU", "--family", "perm:3", "--pair", "0,3", "--n", "2")
    assert code == 0 and out["dimU"] == 1 and out["bound_checks"]["bound"] == 1
    assert out["pair"] == [0, 3] and "spectrum" in out
    code, out, _ = run(capsys, "dimU", "--family", "sign:4", "--all", "--n", "2", "--pm")
    assert code == 0 and out["all_within"] and out["all_agree"]
    code, out, _ = run(capsys, "dimU", "--map1", "sign:1,1", "--map2", "sign:1,-1", "--n", "2")
    assert out["dimU"] == 1 and out["dimU_pm"] == -1
    assert code == 2
    code, out, _ = run(capsys, "dimU", "--map1", "sign:1,1", "--map2", "sign:1,-1", "--n", "2", "--pm")
    assert code == 0


def test_witness_command(capsys):
    code, out, _ = run(capsys, "--seed", "4", "witness", "--map1", "id:4", "--map2", "perm:1,2,3,0", "--d", "2")
    assert code == 0 and out["certified"] and out["V_star"]["ncols"] == 2
    again = run(capsys, "witness", "--map1", "id:4", "--map2", "perm:1,2,3,0", "--d", "2", "--seed", "4")[1]
    assert again == out
    code, _, err = run(capsys, "witness", "--map1", "sel:3:0,1", "--map2", "sel:3:1,2", "--d", "2")
    assert code == 1 and "PreconditionError" in err


def test_recover_commands(capsys, files):
    code, out, _ = run(capsys, "recover", "--y", files["y2"], "--sensing", files["A2"], "--family", "perm:2")
    assert code == 0 and out["x_hat"] == pytest.approx([1.0])
    code, out, _ = run(capsys, "recover", "--y", files["y2"], "--sensing", files["A2"], "--family", "perm:2",
                       "--noise-report", files["eps"])
    assert out["condition_holds"] and out["equality_holds"]
    code, out, _ = run(capsys, "recover", "--y", files["y2"], "--sensing", files["A34"], "--family", "perm:2",
                       "--sparse", "1")
    assert code == 0 and len(out["support"]) == 1


def test_sweep_and_replay(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('experiment = "hsp_sweep"\ntrials = 5\nseed = 1\n[grid]\nfamily = ["perm"]\nn = [2]\nm = [3, 4]\n')
    code, out, _ = run(capsys, "--threads", "1", "sweep", "--config", str(cfg), "--output", str(tmp_path / "o"))
    assert code == 0
    assert [c["success"] for c in out["cells"]] == ["0/5", "5/5"]
    assert (tmp_path / "o" / "hsp_sweep.csv").exists()
    code, row, _ = run(capsys, "sweep", "--config", str(cfg), "--replay", "0,2")
    assert code == 2 and row["success"] is False and row["seed"] == "1:0:2"


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "homsense.cli", "dimU", "--map1", "id:2", "--map2", "perm:1,0"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["dimU"] == 1
