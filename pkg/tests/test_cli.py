import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from bandforge import io
from bandforge.cli import main

DATA = Path(__file__).parent / "data"
sys.path.insert(0, str(Path(__file__).parent.parent / "scripts"))
from make_golden import BAND_ARGS, DENSITY_ARGS  # noqa: E402


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def error_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert err[-1].startswith("bandforge: error code=")
    return err[-1]


def test_minimal_csv_smoke(tmp_path):
    src = write(tmp_path, "d.csv", "x,y\n0,1\n1,3\n2,2\n")
    out = tmp_path / "band.csv"
    assert main(["band", src, "--bandwidth", "5", "--boot", "19", "--seed", "1", "--grid", "5", "--out", str(out)]) == 0
    cols = io.read_columns(out, ("x", "ghat", "lower", "upper"))
    assert cols["x"].size >= 3
    assert np.all(cols["lower"] <= cols["upper"])


@pytest.mark.parametrize("text", ["x,x\n0,1\n1,2\n2,3\n", "x,y\n0,1\n1,abc\n2,3\n", "x,y\n0,1\n1,nan\n2,3\n",
                                  "x,y\n0,1\n1,2\n", "a,b\n0,1\n1,2\n2,3\n"])
def test_malformed_input_exit_2(tmp_path, capsys, text):
    src = write(tmp_path, "d.csv", text)
    assert main(["band", src, "--bandwidth", "5", "--seed", "0", "--out", str(tmp_path / "o.csv")]) == 2
    assert "code=2 kind=input" in error_line(capsys)


def test_missing_file_exit_2(tmp_path, capsys):
    assert main(["band", str(tmp_path / "nope.csv"), "--seed", "0"]) == 2
    error_line(capsys)


def test_degenerate_fit_exit_3(capsys):
    assert main(["band", str(DATA / "g3_sample.csv"), "--bandwidth", "0.001", "--boot", "9", "--seed", "0",
                 "--out", "-"]) == 3
    assert "code=3" in error_line(capsys)


@pytest.mark.parametrize("flags", [["--alpha0", "2"], ["--xi", "0.9"], ["--boot", "0"], ["--bogus"],
                                   ["--bandwidth", "-1"], ["--region", "1", "0"], ["--method", "naive", "--hetero"],
                                   ["--threads", "0"]])
def test_config_errors_exit_4(capsys, flags):
    assert main(["band", str(DATA / "g3_sample.csv"), "--seed", "0", *flags]) == 4
    assert "code=4" in error_line(capsys)


def test_missing_seed_is_printed(tmp_path, capsys):
    src = write(tmp_path, "d.csv", "x,y\n0,1\n1,3\n2,2\n")
    assert main(["band", src, "--bandwidth", "5", "--boot", "9", "--out", str(tmp_path / "o.csv")]) == 0
    assert capsys.readouterr().err.startswith("bandforge: seed=")


def test_golden_band(tmp_path):
    out = tmp_path / "band.csv"
    assert main(["band", str(DATA / "g3_sample.csv"), *BAND_ARGS, "--out", str(out)]) == 0
    assert out.read_bytes() == (DATA / "g3_band.csv").read_bytes()


def test_golden_density_band(tmp_path):
    out = tmp_path / "band.csv"
    assert main(["density-band", str(DATA / "normal_sample.csv"), *DENSITY_ARGS, "--out", str(out)]) == 0
    assert out.read_bytes() == (DATA / "normal_density_band.csv").read_bytes()


@pytest.mark.parametrize("method", ["calibrated", "percentile"])
def test_repeat_and_thread_invariance(tmp_path, method):
    outs = []
    for k, threads in enumerate(["1", "1", "4"]):
        out = tmp_path / f"b{k}.csv"
        args = ["band", str(DATA / "g3_sample.csv"), "--seed", "3", "--boot", "49", "--boot2", "9",
                "--method", method, "--threads", threads, "--out", str(out)]
        assert main(args) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_hetero_runs(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["band", str(DATA / "g3_sample.csv"), "--seed", "3", "--boot", "49", "--hetero",
                 "--out", str(out)]) == 0


def test_round_trip_17_digits(tmp_path):
    vals = np.array([0.1, 1 / 3, -2.718281828459045e-300, 1e300, np.nextafter(1.0, 2.0)])
    p = tmp_path / "t.csv"
    io.write_table(p, ["x", "y", "z"], [vals, -vals, vals * 7])
    back = io.read_columns(p, ("x", "y", "z"))
    np.testing.assert_array_equal(back["x"], vals)
    np.testing.assert_array_equal(back["z"], vals * 7)


def test_manifest_fields(tmp_path):
    man = tmp_path / "m.json"
    assert main(["band", str(DATA / "g3_sample.csv"), "--seed", "3", "--boot", "19", "--out", str(tmp_path / "b.csv"),
                 "--manifest", str(man)]) == 0
    m = json.loads(man.read_text())
    assert m["schema"] == io.MANIFEST_SCHEMA
    assert m["command"] == "band" and m["seed"] == 3
    assert m["config"]["boot"] == 19
    for key in ("version", "python", "numpy", "wall_time_s"):
        assert key in m
    assert set(m["timings_s"]) >= {"bandwidth", "fit", "bands"}


def test_density_malformed_and_cv(tmp_path, capsys):
    src = write(tmp_path, "d.csv", "x\n0.1\nfoo\n0.3\n")
    assert main(["density-band", src, "--seed", "0"]) == 2
    assert main(["density-band", str(DATA / "normal_sample.csv"), "--bandwidth", "cv", "--seed", "0"]) == 4


def test_simulate_empty_methods(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", json.dumps({"methods": []}))
    assert main(["simulate", cfg, "--outdir", str(tmp_path)]) == 4
    assert "field methods" in error_line(capsys)


def test_simulate_unknown_field(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", json.dumps({"n_sim": 5}))
    assert main(["simulate", cfg, "--outdir", str(tmp_path)]) == 4
    assert "field n_sim" in error_line(capsys)


def test_simulate_tiny_config(tmp_path):
    cfg = write(tmp_path, "c.json", json.dumps({
        "g_index": [1, 3], "n": 40, "n_sims": 5, "B": 99, "seed": 2,
        "methods": ["ours", "naive", {"name": "undersmooth", "factors": [0.9]}],
    }))
    t0 = time.perf_counter()
    assert main(["simulate", cfg, "--outdir", str(tmp_path / "out")]) == 0
    assert time.perf_counter() - t0 < 10
    lines = (tmp_path / "out" / "results.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert header[:7] == ["sigma", "g_index", "method", "factor_or_xi", "covered_proportion",
                          "avg_abs_cov_error", "avg_width"]
    rows = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
    assert {r["g_index"] for r in rows} == {"1", "3"}
    assert {r["method"] for r in rows} == {"ours", "naive", "undersmooth"}
    res = json.loads((tmp_path / "out" / "results.json").read_text())
    assert res["schema"] == io.RESULTS_SCHEMA
    assert len(res["results"]) == len(rows)
    assert json.loads((tmp_path / "out" / "manifest.json").read_text())["command"] == "simulate"
