import csv
import json

import numpy as np
import pytest

from logitgame import (CCPTable, SelectionRule, build_family, fixture_path, frequency_ccp,
                       load_game_spec, population_ccp, projection_intervals, read_ccp,
                       read_dataset, simulate_dataset, write_ccp)
from logitgame.cli import RESULT_HEADER, run_command

ENTRY_CCP = str(fixture_path("entry2_ccp.csv"))


def _results(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_member_rejects_zero(tmp_path, capsys):
    code = run_command(["member", "--theta", "0,0,0,0", "--ccp", ENTRY_CCP, "--out", str(tmp_path)])
    assert code == 2
    out = capsys.readouterr().out
    assert "Q = 0.195567" in out
    rows = _results(tmp_path / "results.csv")
    assert float(rows[0]["lower"]) == pytest.approx(0.19556678354397526, abs=1e-12)


def test_member_accepts_truth(tmp_path):
    spec = load_game_spec(fixture_path("entry2.spec"))
    phi = population_ccp(spec, [0, 0, -0.5, -0.5], SelectionRule())
    write_ccp(tmp_path / "c.csv", CCPTable.population(phi), spec)
    code = run_command(["member", "--theta", "0,0,-0.5,-0.5", "--ccp", str(tmp_path / "c.csv"),
                        "--family", "sharp", "--out", str(tmp_path)])
    assert code == 0


def test_project_all_coords(tmp_path):
    code = run_command(["project", "--family", "sharp", "--all-coords", "--ccp", ENTRY_CCP,
                        "--out", str(tmp_path)])
    assert code == 0
    rows = _results(tmp_path / "results.csv")
    assert list(rows[0]) == RESULT_HEADER
    assert [r["coordinate"] for r in rows] == ["beta1", "beta2", "delta1", "delta2"]
    got = np.array([[float(r["lower"]), float(r["upper"])] for r in rows])
    spec = load_game_spec(fixture_path("entry2.spec"))
    ref, _ = projection_intervals(spec, read_ccp(ENTRY_CCP, spec), build_family(spec, "sharp"))
    assert np.allclose(got, ref, atol=1e-9)
    # reference intervals for the sharp set at the rounded CCP
    assert np.allclose(got[0], [-0.214, 0.193], atol=0.01)
    assert all(r["status"] == "optimal" for r in rows)


def test_simulate_zero_markets(tmp_path):
    assert run_command(["simulate", "--n", "0", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "data.csv").read_text() == "market_id,x_bin,y_1,y_2\n"


def test_round_trip_through_csv(tmp_path):
    args = ["--n", "5000", "--theta0", "0,0,-0.5,-0.5", "--seed", "7"]
    assert run_command(["simulate", *args, "--out", str(tmp_path / "a")]) == 0
    assert run_command(["ccp", "--data", str(tmp_path / "a" / "data.csv"),
                        "--out", str(tmp_path / "b")]) == 0
    spec = load_game_spec(fixture_path("entry2.spec"))
    mem = frequency_ccp(simulate_dataset(spec, [0, 0, -0.5, -0.5], SelectionRule(), 5000,
                                         seed=7), spec)
    disk = frequency_ccp(read_dataset(tmp_path / "a" / "data.csv", spec), spec)
    back = read_ccp(tmp_path / "b" / "ccp.csv", spec)
    assert np.array_equal(mem.probs, disk.probs) and np.array_equal(mem.probs, back.probs)


def test_identical_runs_identical_files(tmp_path, monkeypatch):
    argv = ["project", "--coord", "delta1", "--ccp", ENTRY_CCP, "--seed", "3", "--out", "res"]
    for d in ("one", "two"):
        (tmp_path / d).mkdir()
        monkeypatch.chdir(tmp_path / d)
        assert run_command(argv) == 0
    for f in ("results.csv", "manifest.json"):
        assert (tmp_path / "one" / "res" / f).read_bytes() == \
            (tmp_path / "two" / "res" / f).read_bytes()
    manifest = json.loads((tmp_path / "one" / "res" / "manifest.json").read_text())
    assert manifest["seeds"] == {"seed": 3} and len(manifest["config_hash"]) == 64
    assert {"python", "numpy", "scipy"} <= set(manifest["versions"])


def test_confidence_projection(tmp_path):
    assert run_command(["simulate", "--n", "2000", "--theta0", "0,0,-0.5,-0.5",
                        "--out", str(tmp_path)]) == 0
    code = run_command(["confproject", "--data", str(tmp_path / "data.csv"), "--coord", "delta1",
                        "--bound", "delta1=:0", "--bound", "delta2=:0", "--out", str(tmp_path)])
    assert code == 0
    row = _results(tmp_path / "results.csv")[0]
    assert row["quantity"] == "confidence-set" and float(row["upper"]) == pytest.approx(0, abs=1e-6)
    assert float(row["lower"]) < -0.95


def test_point_search(tmp_path):
    assert run_command(["point", "--ccp", ENTRY_CCP, "--family", "sharp2",
                        "--out", str(tmp_path)]) == 0


def test_empty_set_exit_code(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("x_bin,y_1,y_2,phi,n_x\nx0,out,out,0.97,inf\nx0,out,enter,0.01,inf\n"
                    "x0,enter,out,0.01,inf\nx0,enter,enter,0.01,inf\n")
    bounds = [f"--bound=beta{i}=-1:1" for i in (1, 2)] + [f"--bound=delta{i}=-1:1" for i in (1, 2)]
    assert run_command(["project", "--coord", "beta1", "--ccp", str(path), *bounds,
                        "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("argv", [["project", "--bogus"], ["frobnicate"], [],
                                  ["project", "--all-coords"],
                                  ["member", "--ccp", ENTRY_CCP],
                                  ["project", "--ccp", ENTRY_CCP, "--family", "sharpest"]])
def test_usage_errors(argv, tmp_path):
    assert run_command(argv + ["--out", str(tmp_path)] if argv else argv) == 64


def test_runtime_errors(tmp_path):
    assert run_command(["project", "--all-coords", "--ccp", str(tmp_path / "no.csv")]) == 1
    bad = tmp_path / "bad.spec"
    bad.write_text("[players]\nnames = [\n")
    assert run_command(["project", "--all-coords", "--ccp", ENTRY_CCP, "--spec", str(bad),
                        "--out", str(tmp_path)]) == 1


def test_bench_command(tmp_path):
    assert run_command(["bench", "--bins", "1,3", "--draws", "1000", "--grid-size", "10",
                        "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "bench.csv").read_text().splitlines()
    assert lines[0] == "K,abj_seconds,sharp_seconds,ct_eval_seconds,ct_seconds"
    assert len(lines) == 3
