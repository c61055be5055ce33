import json
import os
import subprocess
import sys

import numpy as np
import pytest

from wgbragg import cli


def read_csv(path):
    """Parse our delimited output: '# key: json' metadata, header, float rows."""
    meta = {}
    rows = []
    names = None
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                if ": " in line:
                    key, _, val = line[2:].partition(": ")
                    try:
                        meta[key] = json.loads(val)
                    except json.JSONDecodeError:
                        meta[key] = val
                continue
            if names is None:
                names = line.split(",")
            elif line:
                rows.append([float(v) for v in line.split(",")])
    return meta, names, np.array(rows)


def test_bragg_reports_both_orders(capsys):
    assert cli.main(["bragg", "--n", "144"]) == 0
    out = capsys.readouterr().out
    assert "m=1" in out and "m=2" in out
    assert "regime=" in out


def test_spectrum_schema_and_metadata(tmp_path):
    out = tmp_path / "spectrum.csv"
    rc = cli.main(["spectrum", "--n", "60", "--theta", "gb", "--delta-grid",
                   "-2:2:21", "--out", str(out)])
    assert rc == 0
    meta, names, rows = read_csv(out)
    assert names == ["delta", "rate_r"]
    assert rows.shape == (21, 2)
    assert meta["subcommand"] == "spectrum"
    assert meta["config"]["n"] == 60
    assert meta["gamma_tilde_0"] == pytest.approx(4 * 0.01**2 * 0.0707)
    assert "theta_radians" in meta


def test_csv_floats_round_trip_exactly(tmp_path):
    from wgbragg.closed_form import rate_geometric_sum
    from wgbragg.model import make_params

    out = tmp_path / "spectrum.csv"
    cli.main(["spectrum", "--n", "37", "--theta", "0.91", "--delta-grid",
              "-1:1:9", "--out", str(out)])
    meta, _, rows = read_csv(out)
    p = make_params(n_sites=37)
    expect = rate_geometric_sum(37, 0.91, rows[:, 0], p)
    # 17 significant digits reproduce the binary doubles exactly
    assert np.array_equal(rows[:, 1], np.asarray(expect))


def test_json_matches_csv(tmp_path):
    a_csv = tmp_path / "a.csv"
    a_json = tmp_path / "a.json"
    args = ["spectrum", "--n", "25", "--delta-grid", "-1:1:7"]
    cli.main(args + ["--out", str(a_csv)])
    cli.main(args + ["--format", "json", "--out", str(a_json)])
    _, names, rows = read_csv(a_csv)
    doc = json.loads(a_json.read_text())
    for k, name in enumerate(names):
        assert np.array_equal(rows[:, k], np.array(doc["columns"][name]))


def test_config_round_trip_reproduces_run(tmp_path):
    direct = tmp_path / "direct.csv"
    as_json = tmp_path / "run.json"
    redo = tmp_path / "redo.csv"
    args = ["spectrum", "--n", "30", "--beta", "0.2", "--d", "1",
            "--theta", "gb-0.01", "--delta-grid", "-2:2:11"]
    assert cli.main(args + ["--out", str(direct)]) == 0
    assert cli.main(args + ["--format", "json", "--out", str(as_json)]) == 0
    assert cli.main(["spectrum", "--config", str(as_json), "--out", str(redo)]) == 0
    assert direct.read_bytes() == redo.read_bytes()


def test_flag_overrides_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 12, "delta_grid": "-1:1:5",
                               "gamma_r": 0.15, "gamma_l": 0.05,
                               "gamma_u": 0.8}))
    out = tmp_path / "o.csv"
    rc = cli.main(["spectrum", "--config", str(cfg), "--tier", "linear",
                   "--gamma-u", "0.80", "--out", str(out)])
    assert rc == 0
    meta, _, _ = read_csv(out)
    assert meta["config"]["gamma_r"] == 0.15
    # an override that breaks normalization is rejected on revalidation
    rc = cli.main(["spectrum", "--config", str(cfg), "--tier", "linear",
                   "--gamma-u", "0.5"])
    assert rc == 1


def test_coupling_forms_must_not_mix():
    assert cli.main(["spectrum", "--beta", "0.1", "--gamma-r", "0.05"]) == 1
    assert cli.main(["spectrum", "--gamma-r", "0.1"]) == 1  # incomplete form


def test_unknown_flag_fails_with_usage(capsys):
    assert cli.main(["spectrum", "--bogus"]) == 1
    err = capsys.readouterr().err
    assert "usage:" in err


def test_bad_config_json_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"a": 1.0,,}')
    assert cli.main(["spectrum", "--config", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "line 1" in err and "column" in err


def test_angle_out_of_reach_is_numerical_error(tmp_path, capsys):
    out = tmp_path / "never.csv"
    rc = cli.main(["spectrum", "--n", "20", "--neff", "1.0", "--m", "2",
                   "--theta", "mb", "--delta", "-0.2", "--beta", "0.4",
                   "--d", "1", "--out", str(out)])
    assert rc == 2
    assert not out.exists()  # no partial file on failure


def test_theta_tokens(tmp_path):
    from wgbragg.closed_form import geometric_bragg_angle
    from wgbragg.model import make_params

    out = tmp_path / "t.csv"
    cli.main(["spectrum", "--n", "10", "--theta", "gb+0.004",
              "--delta-grid", "0:1:3", "--out", str(out)])
    meta, _, _ = read_csv(out)
    expect = geometric_bragg_angle(2, make_params(n_sites=10)) + 0.004
    assert meta["theta_radians"] == pytest.approx(expect, abs=1e-15)
    assert cli.main(["spectrum", "--theta", "gbx"]) == 1


def test_map_writes_overlay(tmp_path):
    out = tmp_path / "m.csv"
    rc = cli.main(["map", "--n", "30", "--theta-grid", "0.6:0.7:5",
                   "--delta-grid", "-1:1:3", "--out", str(out)])
    assert rc == 0
    meta, names, rows = read_csv(out)
    assert names == ["theta", "delta", "rate_r"]
    assert rows.shape == (15, 3)
    assert "theta_gb" in meta
    ov = tmp_path / "m_overlay.csv"
    assert ov.exists()
    _, ov_names, ov_rows = read_csv(ov)
    assert ov_names == ["delta", "theta_mb"]
    assert ov_rows.shape[0] == 3


def test_scaling_schema_and_fit(tmp_path):
    out = tmp_path / "s.csv"
    rc = cli.main(["scaling", "--policy", "mb", "--n", "50:250:5",
                   "--out", str(out)])
    assert rc == 0
    meta, names, rows = read_csv(out)
    assert names == ["n", "delta_max", "rate_max", "boundary_flag"]
    assert rows.shape == (5, 4)
    assert 0.4 < meta["fit_delta_max"]["exponent"] < 0.7
    assert np.all(rows[:, 3] == 0.0)


def test_scaling_fixed_needs_theta():
    assert cli.main(["scaling", "--policy", "fixed", "--n", "10:40:4"]) == 1


def test_voids_single_run_deterministic(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    args = ["voids", "--eta", "0.5", "--n", "40", "--configs", "40",
            "--seed", "7"]
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    meta, names, rows = read_csv(a)
    assert names == ["beta_or_n", "mean_rate", "std_rate", "robustness_r"]
    assert rows[0, 0] == pytest.approx(0.0707)
    assert 0.8 < rows[0, 3] <= 1.0


def test_voids_n_sweep_requires_theta(tmp_path):
    assert cli.main(["voids", "--sweep", "n", "--n-grid", "20:24:5"]) == 1
    out = tmp_path / "vn.csv"
    rc = cli.main(["voids", "--sweep", "n", "--n-grid", "20:24:5",
                   "--theta", "gb+0.004", "--delta", "-2", "--configs", "8",
                   "--out", str(out)])
    assert rc == 0
    _, names, rows = read_csv(out)
    assert rows.shape == (5, 4)
    assert list(rows[:, 0]) == [20.0, 21.0, 22.0, 23.0, 24.0]


def test_oracle_check_passes(capsys):
    assert cli.main(["oracle-check", "--n", "2", "--draws", "6"]) == 0
    out = capsys.readouterr().out
    assert "max relative difference" in out
    assert cli.main(["oracle-check", "--n", "5"]) == 2


def test_bad_grid_strings():
    assert cli.main(["spectrum", "--delta-grid", "1:2"]) == 1
    assert cli.main(["spectrum", "--delta-grid", "2:1:5"]) == 1
    assert cli.main(["spectrum", "--delta-grid", "0:1:0"]) == 1


def test_stdout_when_no_out_path(capsys):
    assert cli.main(["spectrum", "--n", "5", "--delta-grid", "0:1:3"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# wgbragg")
    assert "delta,rate_r" in out


def test_console_script_runs():
    env = dict(os.environ, WGBRAGG_THREADS="1")
    proc = subprocess.run([sys.executable, "-m", "wgbragg.cli", "bragg",
                           "--n", "20"], capture_output=True, text=True,
                          env=env)
    assert proc.returncode == 0
    assert "m=2" in proc.stdout
