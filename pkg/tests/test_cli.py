import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from sparsett.cli import EXIT_CONFIG, EXIT_INPUT, EXIT_OK, main
from sparsett.postprocess import repair_column

SMALL = ["--set", "grid.n_support=160", "--set", "grid.m_locations=60",
         "--set", "dictionary.scales=[1,2,3]", "--set", "kernel.bandwidth=1.5"]


def run(*args):
    return main([*args])


@pytest.fixture
def synth_csv(tmp_path):
    path = tmp_path / "synth.csv"
    assert run("synth", "--out", str(path), "--seed", "3", "--set", "synth.n=300") == EXIT_OK
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_synth_reproducible(tmp_path, synth_csv):
    other = tmp_path / "again.csv"
    run("synth", "--out", str(other), "--seed", "3", "--set", "synth.n=300")
    assert other.read_bytes() == synth_csv.read_bytes()
    rows = read_rows(synth_csv)
    assert len(rows) == 300
    assert list(rows[0]) == ["timestamp_iso8601", "travel_time_s"]
    assert rows[1]["timestamp_iso8601"] == "2020-01-01T16:00:05"


def test_synth_traffic(tmp_path):
    path = tmp_path / "t.csv"
    assert run("synth", "--out", str(path), "--set", "synth.kind=traffic", "--set", "synth.n=50") == EXIT_OK
    values = [float(r["travel_time_s"]) for r in read_rows(path)]
    assert min(values) >= 36.0


def test_fit_outputs(tmp_path, synth_csv):
    out = tmp_path / "fit"
    assert run("fit", "--input", str(synth_csv), "--out", str(out), *SMALL) == EXIT_OK
    model = json.loads((out / "model.json").read_text())
    assert set(model) == {"grid", "components", "repair", "metrics", "provenance"}
    weights = [c["weight"] for c in model["components"]]
    rep = model["repair"]
    total = math.fsum(weights) + (rep["weight"] if rep else 0.0)
    assert total == pytest.approx(1.0, abs=1e-12)
    assert model["metrics"]["n_components"] == len(weights)
    rows = read_rows(out / "density.csv")
    assert list(rows[0]) == ["t_s", "parzen", "fitted"]
    assert math.fsum(float(r["parzen"]) for r in rows) == pytest.approx(1.0, abs=1e-9)
    # the flat repair component puts most of its mass past the grid
    on_grid = 0.0 if rep is None else rep["weight"] * repair_column(160, 1.0, rep["sigma_s"]).sum()
    off_grid = 0.0 if rep is None else rep["weight"] - on_grid
    assert math.fsum(float(r["fitted"]) for r in rows) + off_grid == pytest.approx(1.0, abs=1e-9)
    sweep_rows = read_rows(out / "sweep.csv")
    assert list(sweep_rows[0]) == ["w", "rmse", "s_w", "S2w", "objective", "iterations", "converged"]
    ws = [float(r["w"]) for r in sweep_rows]
    assert ws == sorted(ws, reverse=True)


def test_fit_per_link(tmp_path):
    path = tmp_path / "links.csv"
    rng = np.random.default_rng(0)
    with path.open("w") as fh:
        fh.write("travel_time_s,link_id\n")
        for link, mu in (("a", 30), ("b", 60)):
            for v in rng.normal(mu, 5, 100):
                fh.write(f"{v},{link}\n")
    out = tmp_path / "fit"
    assert run("fit", "--input", str(path), "--out", str(out), *SMALL, "--set", "fit.w=0.002") == EXIT_OK
    assert (out / "model_a.json").exists() and (out / "model_b.json").exists()


def test_stream_compare_cold(tmp_path, synth_csv):
    out = tmp_path / "stream"
    code = run("stream", "--input", str(synth_csv), "--out", str(out), *SMALL,
               "--set", "stream.window=50", "--set", "fit.w=0.002", "--compare-cold")
    assert code == EXIT_OK
    report = json.loads((out / "stream_report.json").read_text())
    assert report["refits"] == 300 - 50 + 1
    assert 0 < report["iteration_ratio"] < 1
    assert report["wall_ratio"] > 0
    lines = (out / "snapshots.jsonl").read_text().splitlines()
    assert len(lines) == report["refits"]
    assert (out / "density.csv").exists()


def test_stream_unsorted(tmp_path):
    path = tmp_path / "u.csv"
    path.write_text("timestamp_iso8601,travel_time_s\n2020-01-01T00:00:10,30\n2020-01-01T00:00:00,31\n"
                    "2020-01-01T00:00:20,33\n")
    out = tmp_path / "s"
    args = ["stream", "--input", str(path), "--out", str(out), *SMALL, "--set", "fit.w=0.002",
            "--set", "stream.mode=sequential"]
    assert run(*args) == EXIT_INPUT
    assert run(*args, "--sort") == EXIT_OK


def test_em(tmp_path, synth_csv):
    out = tmp_path / "em"
    assert run("em", "--input", str(synth_csv), "--out", str(out), *SMALL, "--set", "em.restarts=2") == EXIT_OK
    body = json.loads((out / "em_model.json").read_text())
    assert body["kernel"] == "gaussian" and len(body["components"]) <= 2
    assert (out / "em_density.csv").exists()


def test_sweep_target(tmp_path, synth_csv):
    out = tmp_path / "sw"
    assert run("sweep", "--input", str(synth_csv), "--out", str(out), *SMALL,
               "--set", "sweep.target_sparsity=3") == EXIT_OK
    rows = read_rows(out / "sweep.csv")
    assert any(int(r["s_w"]) == 3 for r in rows)


def test_dict_cache(tmp_path, synth_csv):
    cache = tmp_path / "d.npz"
    assert run("dict-cache", "--out", str(cache), *SMALL) == EXIT_OK
    out = tmp_path / "fit"
    cached = [*SMALL, "--set", f"dictionary.cache={cache}", "--set", "fit.w=0.002"]
    assert run("fit", "--input", str(synth_csv), "--out", str(out), *cached) == EXIT_OK
    # a cache built for another grid is refused
    assert run("fit", "--input", str(synth_csv), "--out", str(out), *cached,
               "--set", "dictionary.scales=[1,2]") == EXIT_CONFIG


def test_exit_codes(tmp_path, synth_csv, capsys):
    out = tmp_path / "x"
    assert run("fit", "--input", str(synth_csv), "--out", str(out), "--set", "grid.bogus=1") == EXIT_CONFIG
    empty = tmp_path / "empty.csv"
    empty.write_text("travel_time_s\n")
    assert run("fit", "--input", str(empty), "--out", str(out), *SMALL) == EXIT_INPUT
    assert not out.exists()
    bad = tmp_path / "bad.csv"
    bad.write_text("travel_time_s\nabc\n")
    assert run("fit", "--input", str(bad), "--out", str(out), *SMALL) == EXIT_INPUT
    assert run("fit", "--out", str(out)) == EXIT_INPUT
    assert run("fit", "--input", str(tmp_path / "nope.csv"), "--out", str(out)) == EXIT_INPUT
    assert run("fit", "--input", str(synth_csv), "--out", str(out), "--set", "grid.n_support=320",
               "--set", "grid.m_locations=300") == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "config error" in err and "input error" in err


def test_print_config(capsys):
    assert run("fit", "--print-config", "--seed", "9") == EXIT_OK
    assert "seed: 9" in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "sparsett", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "stream" in res.stdout
