import json
import subprocess
import sys

import pytest

from cyclescope.cli import main

RUN = [sys.executable, "-m", "cyclescope.cli"]


def run_cli(args, **kw):
    return subprocess.run(RUN + args, capture_output=True, text=True, **kw)


@pytest.fixture()
def harv_model(tmp_path):
    path = tmp_path / "harv.json"
    rc = main(["model", "--preset", "harvesting", "--param", "h=0.1",
               "--out", str(path)])
    assert rc == 0
    return str(path)


def test_model_round_trip(harv_model, tmp_path):
    doc = json.load(open(harv_model))
    assert doc["thresholds"]["h_star"] == pytest.approx(0.25)
    # parse -> serialize -> parse is identical
    from cyclescope import PiecewiseEquation
    eq = PiecewiseEquation.from_dict(doc["equation"])
    assert eq.to_dict() == doc["equation"]


def test_analyze_harvesting(harv_model, capsys):
    rc = main(["analyze", harv_model])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    nc = [c for c in out["cycles"] if c["kind"] == "non-constant"]
    assert len(nc) == 2
    assert {c["stability"] for c in nc} == {"stable", "unstable"}


def test_analyze_annulus(tmp_path, capsys):
    doc = {"period": 1.0, "breakpoints": [0.0, 0.5, 1.0],
           "pieces": [{"num": [0.0, 1.0], "den": [1.0], "domain": ["-inf", "inf"]},
                      {"num": [0.0, -1.0], "den": [1.0], "domain": ["-inf", "inf"]}],
           "state_interval": [-5.0, 5.0]}
    path = tmp_path / "annulus.json"
    path.write_text(json.dumps(doc))
    rc = main(["analyze", str(path)])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["note"] == "periodic annulus"


def test_analyze_invalid_model_exit_2(tmp_path, capsys):
    doc = {"period": 1.0, "breakpoints": [0.0, 0.7, 0.5],
           "pieces": [{"num": [1.0], "den": [1.0], "domain": ["-inf", "inf"]},
                      {"num": [1.0], "den": [1.0], "domain": ["-inf", "inf"]}],
           "state_interval": [-1.0, 1.0]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    rc = main(["analyze", str(path)])
    capsys.readouterr()
    assert rc == 2


def test_malformed_file_exit_2(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    rc = main(["analyze", str(path)])
    capsys.readouterr()
    assert rc == 2


def test_poincare_routes(harv_model, capsys):
    rc = main(["poincare", harv_model, "--x0", "0.5"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["in_V"]
    assert out["discrete"]["P1"] == pytest.approx(out["integral"]["P1"], rel=1e-6)


def test_verify_exit_codes(harv_model, capsys):
    rc = main(["verify", harv_model, "--samples", "20"])
    out = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert out["max_disagreement"] <= 1e-5


def test_sweep_deterministic_and_parallel(capsys):
    args = ["sweep", "--preset", "harvesting", "--varying", "h",
            "--start", "0.05", "--stop", "0.6", "--steps", "6",
            "--format", "csv"]
    rc = main(args)
    assert rc == 0
    first = capsys.readouterr().out
    rc = main(args + ["--jobs", "2"])
    assert rc == 0
    second = capsys.readouterr().out
    assert first == second
    counts = [int(line.split(",")[1]) for line in first.strip().splitlines()[1:]]
    assert counts[0] == 2 and counts[-1] == 0


def test_sweep_zero_length_range(capsys):
    rc = main(["sweep", "--preset", "harvesting", "--varying", "h",
               "--start", "0.1", "--stop", "0.1", "--steps", "5",
               "--format", "csv"])
    assert rc == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert len(rows) == 2  # header + single row


def test_cycles_subcommand(harv_model, capsys):
    rc = main(["cycles", harv_model])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert [iv["sign_changes"] for iv in out["partition"]["intervals"]] \
        == [1, 0, 1, 0]


def test_entry_point_runs():
    proc = run_cli(["model", "--preset", "abel", "--param", "a1=1",
                    "--param", "c2=1"])
    assert proc.returncode == 0
    doc = json.loads(proc.stdout)
    assert doc["thresholds"]["B"] == -1
