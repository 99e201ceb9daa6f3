import json
import subprocess
import sys

import pytest

from spherelab.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def result(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 0, err
    return json.loads(out)["result"]


@pytest.fixture
def grid_file(tmp_path):
    path = tmp_path / "f.json"
    path.write_text(json.dumps({"d": 4, "records": [[0, 0, 0, 0, 1.0], [1, 2, 0, -1, 0.5]]}))
    return str(path)


@pytest.fixture
def seq_file(tmp_path):
    path = tmp_path / "lam.txt"
    path.write_text("\n".join(str(t) for t in (1, 2, 3, 5, 8, 13, 21)) + "\n")
    return str(path)


def test_count(capsys):
    assert result(["count", "--d", "4", "--lambda", "1"], capsys)["count"] == 8


def test_count_table(capsys):
    res = result(["count", "--d", "4", "--max-lambda", "5"], capsys)
    assert res["counts"] == [1, 8, 24, 32, 24, 48]


def test_enumerate(capsys):
    res = result(["enumerate", "--d", "4", "--lambda", "2"], capsys)
    assert res["count"] == 24 and len(res["points"]) == 24
    assert res["points"] == sorted(res["points"])


def test_eta_declared_naturals(capsys):
    res = result(["eta", "--d", "5", "--family", "naturals", "--declared"], capsys)
    assert res["eta"] == "5/3"
    assert all(v["provenance"] == "declared" for v in res["per_prime"].values())


def test_probe_delta_mass(capsys, seq_file):
    res = result(["probe-delta", "--d", "5", "--p", "1", "--seq", seq_file], capsys)
    assert res["values"] == [7.0]
    assert res["details"]["agree"] is True


def test_report_envelope(capsys):
    code, out, _ = run(["count", "--d", "5", "--lambda", "3"], capsys)
    doc = json.loads(out)
    assert set(doc) == {"tool", "version", "command", "config", "result"}
    assert doc["config"]["d"] == 5 and "threads" not in doc["config"]


def test_generate_analyze_round_trip(capsys, tmp_path):
    path = tmp_path / "gen.json"
    assert main(["generate", "--family", "padic_cover", "--family-prime", "3", "--stages", "2",
                 "--seed", "5", "-o", str(path)]) == 0
    direct = result(["analyze", "--family", "padic_cover", "--family-prime", "3", "--stages", "2",
                     "--seed", "5", "--prime", "3", "--prime", "2"], capsys)
    reread = result(["analyze", "--seq", str(path), "--prime", "3", "--prime", "2"], capsys)
    assert direct["profiles"] == reread["profiles"]


def test_average_and_maximal(capsys, grid_file):
    avg = result(["average", "--grid", grid_file, "--lambda", "1"], capsys)
    assert sum(r[-1] for r in avg["grid"]["records"]) == pytest.approx(1.5)
    mx = result(["maximal", "--grid", grid_file, "--lambdas", "1,2"], capsys)
    assert len(mx["grid"]["records"]) > 0


def test_csv(capsys):
    code, out, _ = run(["count", "--d", "4", "--max-lambda", "3", "--format", "csv"], capsys)
    assert code == 0
    assert out.splitlines() == ["lambda,count", "0,1", "1,8", "2,24", "3,32"]


def test_output_file(tmp_path, capsys):
    path = tmp_path / "out.json"
    assert main(["count", "--d", "4", "--lambda", "2", "-o", str(path)]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(path.read_text())["result"]["count"] == 24


@pytest.mark.parametrize("argv,error", [
    (["count", "--d", "3", "--lambda", "1"], "InvalidConfig"),
    (["count", "--d", "4"], "InvalidConfig"),
    (["enumerate", "--d", "6", "--lambda", "500", "--cap-points", "10"], "CapExceeded"),
    (["probe-delta", "--d", "5", "--p", "2"], "InvalidConfig"),
    (["probe-delta", "--d", "5", "--p", "2", "--seq", "/nonexistent/file"], "ParseError"),
    (["probe-padic", "--d", "5", "--prime", "4", "--level", "1", "--q", "1", "--family", "naturals"],
     "NotPrime"),
    (["count", "--d", "5", "--max-lambda", "10000", "--cap-sieve", "10"], "BudgetExceeded"),
])
def test_errors(argv, error, capsys):
    code, out, err = run(argv, capsys)
    assert code != 0 and out == ""
    assert json.loads(err)["error"] == error


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "spherelab", "count", "--d", "4", "--lambda", "3"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["result"]["count"] == 32
