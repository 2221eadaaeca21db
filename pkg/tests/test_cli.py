import json
import os
from pathlib import Path

import numpy as np
import pytest

from fastzrp import cli


def run_cli(argv, cwd=None):
    old = os.getcwd()
    if cwd is not None:
        os.chdir(cwd)
    try:
        return cli.main(argv)
    finally:
        os.chdir(old)


def read_rows(path):
    rows = []
    with open(path) as f:
        for line in f:
            if line.startswith("#"):
                continue
            rows.append(line.rstrip("\n").split(","))
    return rows[0], rows[1:]


def test_parse_valid_flags():
    cfg = cli.parse_config(
        ["tails", "--A", "2", "--Theta", "1", "--gamma", "1",
         "--L", "8192", "--rho", "1", "--seed", "7"]
    )
    assert cfg.mode == "tails"
    assert cfg.prefactor == 1.0 and cfg.gamma == 1.0
    assert cfg.model_spec(size=8192).theta == pytest.approx(8192.0)


def test_parse_conflicting_density():
    with pytest.raises(cli.UsageError, match="ConflictingDensitySpec"):
        cli.parse_config(["exact", "--theta", "10", "--L", "8", "--rho", "1", "--N", "100"])


def test_parse_rejects_nonpositive_gamma():
    with pytest.raises(cli.UsageError):
        cli.parse_config(["exact", "--Theta", "1", "--gamma", "0", "--L", "8", "--N", "8"])


def test_stochastic_mode_needs_seed():
    with pytest.raises(cli.UsageError, match="seed"):
        cli.parse_config(["simulate", "--theta", "10", "--L", "8", "--rho", "1"])


def test_config_file_roundtrip(tmp_path):
    cfgfile = tmp_path / "run.json"
    cfgfile.write_text(json.dumps({"theta": 32, "L": 16, "N": 16}))
    cfg = cli.parse_config(["exact", "--config", str(cfgfile), "--out", str(tmp_path / "o")])
    assert cfg.theta == 32.0 and cfg.L == 16 and cfg.N == 16
    # explicit flags win over the file
    cfg = cli.parse_config(["exact", "--config", str(cfgfile), "--N", "8", "--out", "o"])
    assert cfg.N == 8


def test_config_file_unknown_key(tmp_path):
    cfgfile = tmp_path / "bad.json"
    cfgfile.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(cli.UsageError, match="bogus"):
        cli.parse_config(["exact", "--config", str(cfgfile)])


def test_exact_mode_outputs(tmp_path):
    assert run_cli(["exact", "--A", "2", "--theta", "32", "--L", "32", "--N", "32",
                    "--out", str(tmp_path)]) == 0
    header, rows = read_rows(tmp_path / "marginals.csv")
    assert header == ["n", "probability"]
    probs = np.array([float(r[1]) for r in rows])
    assert np.all((probs >= 0) & (probs <= 1))
    assert probs.sum() == pytest.approx(1.0, abs=1e-10)
    header, rows = read_rows(tmp_path / "size_biased.csv")
    pmf = np.array([float(r[1]) for r in rows])
    assert pmf.sum() == pytest.approx(1.0, abs=1e-10)
    # first currents row is Z(L,0)/Z(L,1) = 1/L for unit bulk weights
    header, rows = read_rows(tmp_path / "currents.csv")
    assert float(rows[0][2]) == pytest.approx(1.0 / 32.0)


def test_byte_identical_reruns(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        d.mkdir()
        assert run_cli(["tails", "--A", "2", "--theta", "16", "--L", "16", "--rho", "1",
                        "--seed", "11", "--samples", "10", "--out", "run"], cwd=d) == 0
    assert (a / "run/sb_tail.csv").read_bytes() == (b / "run/sb_tail.csv").read_bytes()
    assert (a / "run/cluster_tail.csv").read_bytes() == (b / "run/cluster_tail.csv").read_bytes()


def test_tail_columns_are_valid(tmp_path):
    assert run_cli(["tails", "--A", "2", "--theta", "64", "--L", "64", "--rho", "1",
                    "--seed", "5", "--samples", "25", "--out", str(tmp_path)]) == 0
    for name in ("sb_tail.csv", "cluster_tail.csv"):
        _, rows = read_rows(tmp_path / name)
        vals = np.array([float(r[1]) for r in rows])
        assert np.all((vals >= 0) & (vals <= 1))
        assert np.all(np.diff(vals) <= 1e-12)


def test_compare_exit_codes(tmp_path):
    assert run_cli(["tails", "--A", "2", "--theta", "64", "--L", "64", "--rho", "1",
                    "--seed", "5", "--samples", "25", "--out", str(tmp_path)]) == 0
    tail = str(tmp_path / "cluster_tail.csv")
    assert run_cli(["compare", "--empirical", tail, "--reference", "exp",
                    "--threshold", "0.5"]) == 0
    assert run_cli(["compare", "--empirical", tail, "--reference", "exp",
                    "--threshold", "0.0001"]) == cli.EXIT_CHECK


def test_compare_gamma21_uses_metadata(tmp_path):
    assert run_cli(["tails", "--A", "2", "--theta", "256", "--L", "256", "--rho", "1",
                    "--seed", "6", "--samples", "40", "--out", str(tmp_path)]) == 0
    assert run_cli(["compare", "--empirical", str(tmp_path / "sb_tail.csv"),
                    "--reference", "gamma21", "--threshold", "0.9"]) == 0


def test_unknown_reference(tmp_path):
    assert run_cli(["compare", "--empirical", "x.csv", "--reference", "nope"]) == cli.EXIT_USAGE


def test_resource_limit_exit(tmp_path):
    code = run_cli(["exact", "--A", "2", "--theta", "16", "--L", "65536", "--rho", "1",
                    "--out", str(tmp_path), "--mem-budget-mb", "0.0001"])
    assert code == cli.EXIT_RESOURCE


def test_simulate_outputs(tmp_path):
    assert run_cli(["simulate", "--A", "2", "--theta", "32", "--L", "16", "--rho", "1",
                    "--seed", "4", "--samples", "20", "--burnin", "2000",
                    "--replicas", "2", "--out", str(tmp_path)]) == 0
    _, rows = read_rows(tmp_path / "profiles.csv")
    byrep = {}
    for r in rows:
        byrep.setdefault(r[0], []).append(int(r[2]))
    for vals in byrep.values():
        assert vals[-1] == 16  # integrated profile ends at N
        assert all(b >= a for a, b in zip(vals, vals[1:]))
    _, rows = read_rows(tmp_path / "summary.csv")
    assert len(rows) == 2 * 20


def test_worker_pool_matches_serial(tmp_path):
    args = ["tails", "--A", "2", "--theta", "16", "--L", "16", "--rho", "1",
            "--seed", "11", "--samples", "8", "--out", "run"]
    a, b = tmp_path / "serial", tmp_path / "pooled"
    a.mkdir(), b.mkdir()
    assert run_cli(args, cwd=a) == 0
    old = os.environ.get("ZRP_THREADS")
    os.environ["ZRP_THREADS"] = "2"
    try:
        assert run_cli(args, cwd=b) == 0
    finally:
        if old is None:
            os.environ.pop("ZRP_THREADS", None)
        else:
            os.environ["ZRP_THREADS"] = old
    assert (a / "run/sb_tail.csv").read_bytes() == (b / "run/sb_tail.csv").read_bytes()


def test_sample_mode_summary(tmp_path):
    assert run_cli(["sample", "--A", "2", "--theta", "100", "--L", "32", "--rho", "1",
                    "--seed", "8", "--samples", "15", "--dump-configs",
                    "--out", str(tmp_path)]) == 0
    _, rows = read_rows(tmp_path / "summary.csv")
    assert len(rows) == 15
    _, crows = read_rows(tmp_path / "configs.csv")
    assert len(crows) == 15 * 32
    by_sample = {}
    for r in crows:
        by_sample.setdefault(r[0], 0)
        by_sample[r[0]] += int(r[2])
    assert set(by_sample.values()) == {32}


def test_recipe_fig1(tmp_path):
    assert run_cli(["recipe", "fig1", "--seed", "1", "--out", str(tmp_path), "--plot"]) == 0
    assert (tmp_path / "fig1/density_vs_fugacity.csv").exists()
    assert (tmp_path / "fig1/currents_vs_density.csv").exists()
    assert (tmp_path / "fig1/fig1.png").exists()
    _, rows = read_rows(tmp_path / "fig1/currents_vs_density.csv")
    # canonical and grand-canonical currents agree within 0.05 at every grid point
    for r in rows:
        rho, f64, c64 = float(r[0]), float(r[1]), float(r[4])
        assert abs(f64 - c64) < 0.06
