import json
import shutil

import numpy as np
import pytest

from advdual.cli import main
from advdual.io import load_result, save_result


INSTANCE = "instances/twopoint.json"


@pytest.fixture()
def inst(tmp_path):
    path = str(tmp_path / "twopoint.json")
    shutil.copy(INSTANCE, path)
    return path


def test_solve_exit_zero(inst, tmp_path, capsys):
    out = str(tmp_path / "res.json")
    assert main(["solve", inst, "--out", out]) == 0
    text = capsys.readouterr().out
    assert "exp" in text and f"result written to {out}" in text
    result = load_result(out)
    assert result["certificates"]["exponential"]["gap"] <= 1e-4
    assert len(result["f"]) == 3


def test_solve_all_losses(inst, tmp_path, capsys):
    out = str(tmp_path / "res.json")
    assert main(["solve", inst, "--loss", "all", "--out", out]) == 0
    text = capsys.readouterr().out
    assert "DIAGNOSTIC" in text
    result = load_result(out)
    kinds = set(result["certificates"])
    assert {"exponential", "logistic", "hinge", "zero_one_dual"} <= kinds


def test_solve_deterministic_bytes(inst, tmp_path):
    a, b = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    main(["solve", inst, "--out", a, "--seed", "5"])
    main(["solve", inst, "--out", b, "--seed", "5"])
    ra, rb = open(a).read(), open(b).read()
    # runtime differs between runs; everything else must match byte-for-byte
    da, db = json.loads(ra), json.loads(rb)
    da["provenance"].pop("runtime_ms")
    db["provenance"].pop("runtime_ms")
    assert da == db


def test_verify_ok(inst, tmp_path, capsys):
    out = str(tmp_path / "res.json")
    main(["solve", inst, "--out", out])
    capsys.readouterr()
    assert main(["verify", inst, out]) == 0
    assert "FAILED" not in capsys.readouterr().out


def test_verify_tampered_result(inst, tmp_path, capsys):
    out = str(tmp_path / "res.json")
    main(["solve", inst, "--out", out])
    data = load_result(out)
    data["eta_hat"][2] = 0.9  # no longer matches the stored certificates
    save_result(out, data)
    capsys.readouterr()
    assert main(["verify", inst, out]) == 4
    assert "FAILED" in capsys.readouterr().out


def test_verify_tampered_certificate(inst, tmp_path, capsys):
    out = str(tmp_path / "res.json")
    main(["solve", inst, "--out", out])
    data = load_result(out)
    data["certificates"]["exponential"]["gap"] = 0.25
    save_result(out, data)
    capsys.readouterr()
    assert main(["verify", inst, out]) == 4


def test_verify_wrong_instance(inst, tmp_path, capsys):
    out = str(tmp_path / "res.json")
    main(["solve", inst, "--out", out])
    other = str(tmp_path / "other.json")
    data = json.load(open(inst))
    data["epsilon"] = 0.2
    json.dump(data, open(other, "w"))
    capsys.readouterr()
    assert main(["verify", other, out]) == 4


def test_sweep_csv_and_svg(inst, tmp_path, capsys):
    stem = str(tmp_path / "sw")
    code = main(["sweep", inst, "--eps", "0,0.3,0.6", "--format", "both",
                 "--out", stem])
    assert code == 0
    lines = open(stem + ".csv").read().splitlines()
    assert lines[0] == "eps,loss,primal,dual,gap,iters,runtime_ms"
    # all four losses at three epsilon values
    assert len(lines) == 1 + 3 * 4
    assert "<svg" in open(stem + ".svg").read()


def test_sweep_duplicate_eps_warns(inst, tmp_path, capsys):
    stem = str(tmp_path / "sw")
    assert main(["sweep", inst, "--eps", "0.3,0.3", "--out", stem,
                 "--loss", "exp"]) == 0
    assert "duplicate" in capsys.readouterr().err


def test_sweep_bad_eps(inst, capsys):
    assert main(["sweep", inst, "--eps", "0.1,zebra"]) == 2
    assert main(["sweep", inst, "--eps", ","]) == 2


def test_winf(inst, capsys):
    assert main(["winf", inst]) == 0
    out = capsys.readouterr().out
    assert out.startswith("winf=")
    assert float(out.split("=")[1]) == pytest.approx(1.0)


def test_attack_triples(inst, capsys):
    assert main(["attack", inst]) == 0
    out = capsys.readouterr().out
    assert "class0 0 -> 2 mass 0.5" in out
    assert "class1 1 -> 2 mass 0.5" in out


def test_oracle(inst, capsys):
    assert main(["oracle", inst, "--loss", "exp"]) == 0
    out = capsys.readouterr().out
    assert "exp" in out


def test_missing_instance_file(capsys):
    assert main(["solve", "no/such/file.json"]) == 2


def test_broken_json(tmp_path, capsys):
    path = str(tmp_path / "broken.json")
    open(path, "w").write("{nope")
    assert main(["solve", path]) == 2
