import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from polyargmax.cli import main
from polyargmax.io import ingest, write_jsonl


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_argmax_sweep_csv_schema(capsys):
    code, out, _ = run(["argmax-sweep", "--gen", "peaked:3,1", "--n", "64", "--count", "20",
                        "--grid", "3-4:7-9/2:15"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["T"] for r in rows] == ["3", "3", "4", "4"]
    assert set(rows[0]) == {"T", "p", "c", "n", "count", "recovery", "mean_top_mass", "max_top_mass"}
    assert all(float(r["recovery"]) == 1.0 for r in rows)


def test_sweep_json_has_best_per_T(capsys):
    code, out, _ = run(["argmax-sweep", "--gen", "peaked:3,1", "--n", "32", "--count", "10",
                        "--format", "json"], capsys)
    data = json.loads(out)
    assert code == 0 and [b["T"] for b in data["best"]] == [4, 5]


def test_empty_grid_exits_2(capsys):
    code, _, err = run(["argmax-sweep", "--gen", "normal:0,1", "--n", "8", "--count", "2", "--grid", ""], capsys)
    assert code == 2 and "empty grid" in err


def test_bad_generator_and_missing_file_exit_2(tmp_path, capsys):
    assert run(["argmax-sweep", "--gen", "gamma:1"], capsys)[0] == 2
    assert run(["argmax-sweep", "--input", str(tmp_path / "missing.lgt1")], capsys)[0] == 2


def test_truncated_input_exits_2(tmp_path, capsys):
    path = tmp_path / "x.lgt1"
    assert run(["synth", "--gen", "normal:0,1", "--n", "8", "--count", "2", "--out", str(path)], capsys)[0] == 0
    path.write_bytes(path.read_bytes()[:-3])
    code, _, err = run(["converge-trace", "--input", str(path)], capsys)
    assert code == 2 and "truncated" in err


def test_synth_round_trips_through_ingest(tmp_path, capsys):
    for fmt in ("lgt1", "jsonl"):
        path = tmp_path / f"s.{fmt}"
        run(["synth", "--gen", "peaked:3,2", "--n", "16", "--count", "4", "--seed", "5",
             "--format", fmt, "--out", str(path)], capsys)
        got = np.stack(ingest(path))
        assert got.shape == (4, 16)


def test_nucleus_gate(tmp_path, capsys):
    path = tmp_path / "gate.jsonl"
    write_jsonl(path, [np.array([0.3, 0.1, 0.0])])
    args = ["nucleus-violation", "--input", str(path), "--nucleus-mass", "0.5", "--draws", "200"]
    code, out, err = run(args, capsys)
    assert code == 3 and "beta-cut" in err
    assert run(args + ["--no-gate"], capsys)[0] == 0


def test_nucleus_single_draw_smoke(capsys):
    code, out, _ = run(["nucleus-violation", "--gen", "peaked:5,1", "--n", "32", "--count", "3",
                        "--draws", "1"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and list(rows[0]) == ["prompt_id", "method", "draws", "violations", "rate"]


def test_output_bytes_are_deterministic(tmp_path, capsys):
    outs = []
    for i in range(2):
        path = tmp_path / f"o{i}.csv"
        run(["converge-trace", "--gen", "normal:170,10", "--n", "50", "--count", "3", "--seed", "4",
             "--out", str(path)], capsys)
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] and outs[0]


def test_grad_check_rows(capsys):
    code, out, _ = run(["grad-check", "--gen", "normal:0,1", "--n", "12", "--count", "3"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and all(float(r["rel_error"]) < 1e-4 for r in rows)


def test_he_bench_json(capsys):
    code, out, _ = run(["he-bench", "--gen", "peaked:3,2", "--n", "16", "--count", "3",
                        "--grid", "3:3:7"], capsys)
    rows = {r["algorithm"]: r for r in json.loads(out)["rows"]}
    assert code == 0 and set(rows) == {"cutmaxHE", "tournament", "league"}
    assert all(r["accuracy"] == 1.0 and r["wall_clock_normative"] is False for r in rows.values())


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "polyargmax", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "argmax-sweep" in proc.stdout
