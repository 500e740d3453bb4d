import json
import math

import numpy as np
import pytest

from ifpca import cli
from ifpca.screen import build_null_table, load_null_table, save_null_table


@pytest.fixture
def blob_csv(tmp_path):
    """Well-separated 2-class matrix plus its labels, written as flat files."""
    rng = np.random.default_rng(0)
    x = rng.standard_normal((40, 6)) * 0.2
    x[20:] += 5.0
    path = tmp_path / "x.csv"
    np.savetxt(path, x, delimiter=",")
    y = np.repeat([1, 2], 20)
    ypath = tmp_path / "y.txt"
    np.savetxt(ypath, y, fmt="%d")
    return str(path), str(ypath)


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cluster_kmeans_on_blobs(blob_csv, capsys, tmp_path):
    xpath, ypath = blob_csv
    out_labels = str(tmp_path / "labels.txt")
    code, out, _ = run(["cluster", "--input", xpath, "--k", "2",
                        "--method", "kmeans", "--labels", ypath,
                        "--out", out_labels], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["error_rate"] == 0.0
    saved = np.loadtxt(out_labels, dtype=int)
    assert np.array_equal(saved, report["labels"])


def test_cluster_header_and_transpose(blob_csv, capsys, tmp_path):
    xpath, _ = blob_csv
    x = np.loadtxt(xpath, delimiter=",")
    tpath = tmp_path / "xt.csv"
    with open(tpath, "w") as f:
        f.write(",".join(f"s{i}" for i in range(x.shape[0])) + "\n")
        np.savetxt(f, x.T, delimiter=",")
    a = run(["cluster", "--input", xpath, "--k", "2", "--method", "kmeans"],
            capsys)
    b = run(["cluster", "--input", str(tpath), "--k", "2", "--method", "kmeans",
             "--transpose"], capsys)
    assert a[0] == b[0] == 0
    assert json.loads(a[1])["labels"] == json.loads(b[1])["labels"]


def test_cluster_missing_k_is_usage_error(blob_csv, capsys):
    xpath, _ = blob_csv
    code, _, _ = run(["cluster", "--input", xpath], capsys)
    assert code == 2


def test_cluster_empty_selection_exit_code(blob_csv, capsys):
    xpath, _ = blob_csv
    code, _, err = run(["cluster", "--input", xpath, "--k", "2",
                        "--threshold", "fixed:999", "--norm", "none"], capsys)
    assert code == 5
    assert "error:" in err


def test_cluster_missing_file_exit_code(capsys):
    code, _, _ = run(["cluster", "--input", "/nonexistent.csv", "--k", "2"],
                     capsys)
    assert code == 3


def test_cluster_with_stored_null_table(blob_csv, capsys, tmp_path):
    xpath, ypath = blob_csv
    table = build_null_table(40, 5000, seed=1)
    npath = str(tmp_path / "null.txt")
    save_null_table(table, npath)
    # every column carries signal, so the HC eligibility floor excludes all
    # indices; --hc-fallback drops the floor
    code, out, _ = run(["cluster", "--input", xpath, "--k", "2",
                        "--norm", "none", "--null-table", npath,
                        "--labels", ypath, "--hc-fallback"], capsys)
    assert code == 0
    assert json.loads(out)["error_rate"] <= 0.1


def test_nulltable_round_trip(tmp_path, capsys):
    out = str(tmp_path / "null.bin")
    code, _, _ = run(["nulltable", "--n", "30", "--reps", "2000",
                      "--seed", "4", "--out", out], capsys)
    assert code == 0
    table = load_null_table(out)
    direct = build_null_table(30, 2000, seed=4)
    np.testing.assert_array_equal(table.values, direct.values)
    assert table.n == 30 and table.seed == 4


def test_simulate_tiny_config_deterministic(tmp_path, capsys):
    cfg = {"k": 2, "p": 150, "theta": 0.8, "vartheta": 0.25, "r": 2.0,
           "rep": 2, "delta": [1 / 3, 2 / 3], "gamma": [0.5, 0.0, 0.5],
           "g_mubar": {"kind": "normal", "params": [0.0, 1.0]},
           "g_mu": {"kind": "uniform", "params": [1.0, 0.2]},
           "g_sigma": {"kind": "pointmass", "params": [1.0]}}
    cpath = tmp_path / "cfg.json"
    cpath.write_text(json.dumps(cfg))
    argv = ["simulate", "--config", str(cpath), "--reps", "2",
            "--methods", "ifpca-fixed,kmeans", "--seed", "3",
            "--null-reps", "2000"]
    a = run(argv, capsys)
    b = run(argv, capsys)
    assert a[0] == 0
    assert a[1] == b[1]
    lines = a[1].strip().split("\n")
    assert lines[0] == "experiment,setting,method,mean_error,sd_error,reps"
    assert len(lines) == 3
    for line in lines[1:]:
        mean = float(line.split(",")[-3])
        assert 0.0 <= mean <= 0.5


def test_simulate_zero_reps_is_usage_error(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text("{}")
    code, _, _ = run(["simulate", "--config", str(cfg_path), "--reps", "0"],
                     capsys)
    assert code == 2


def test_tailcheck_null_output(capsys):
    code, out, _ = run(["tailcheck", "--n", "50", "--reps", "5000",
                        "--grid", "0,1.2"], capsys)
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "t,empirical_survival,theory_lower,theory_upper,ratio"
    row0 = lines[1].split(",")
    assert float(row0[1]) == 1.0  # every score exceeds t = 0
    row = lines[2].split(",")
    # closed form at t = 1.2: exp(-t^2 / (2 a0^2)) / (sqrt(2) a0)
    np.testing.assert_allclose(float(row[2]), 8.4780812e-04, rtol=1e-5)
    assert math.isclose(float(row[3]), 2 * float(row[2]), rel_tol=1e-6)


def test_tailcheck_alt_bound(capsys):
    code, out, _ = run(["tailcheck", "--n", "100", "--reps", "2000",
                        "--grid", "0.5",
                        "--alt", "delta=0.5,0.5;m=0.8,-0.8"], capsys)
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "t,empirical_miss,bound"
    t, miss, bound = (float(v) for v in lines[1].split(","))
    assert 0.0 <= miss <= 1.0
    assert bound > 0.0


def test_tailcheck_negative_grid_is_usage_error(capsys):
    code, _, _ = run(["tailcheck", "--n", "50", "--reps", "100",
                      "--grid", "-1"], capsys)
    assert code == 2
