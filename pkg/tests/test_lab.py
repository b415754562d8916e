import json
import math

import numpy as np
import pytest

from flatlattice import cli, lab, spectral


SMALL_SCAN = """
experiment = "exponent_scan"
seed = 7

[body]
kind = "disk"

[grid]
R_min = 16
R_max = 256
count = 8
p = [1, 2]
M = 16
"""


def test_parse_config_defaults():
    cfg = lab.parse_config(SMALL_SCAN)
    assert cfg.experiment == "exponent_scan" and cfg.seed == 7
    assert cfg.p == [1.0, 2.0] and cfg.M == 16
    grid = cfg.R_grid()
    assert grid[0] == 16 and grid[-1] == 256
    assert all(a < b for a, b in zip(grid, grid[1:]))
    assert all(r == round(r) for r in grid)
    assert cfg.tol("slope") == lab.DEFAULT_TOLERANCE["slope"]


@pytest.mark.parametrize("text,needle", [
    ('experiment = "exponent_scan"\n', "seed"),
    ('experiment = "nope"\nseed = 1\n', "experiment"),
    ('experiment = "exponent_scan"\nseed = 1\nbogus = 3\n', "bogus"),
    ('experiment = "exponent_scan"\nseed = 1\n[grid]\nM = 8\n', "grid.M"),
    ('experiment = "exponent_scan"\nseed = 1\n[grid]\nR_min = 100\nR_max = 10\n', "R_min"),
    ('experiment = "exponent_scan"\nseed = 1\n[grid]\nR_max = 1e9\n', "row budget"),
    ('experiment = "exponent_scan"\nseed = 1\n[grid]\nwidth = 3\n', "width"),
    ('experiment = "exponent_scan"\nseed = 1\n[body]\nkind = "gen_ellipse"\n', "gamma"),
    ('experiment = "exponent_scan"\nseed = 1\n[grid]\np = [0.5]\n', "grid.p"),
    ('experiment = "exponent_scan"\nseed = = 1\n', "line 2"),
])
def test_config_errors_are_named(text, needle):
    with pytest.raises(lab.ConfigError) as exc:
        lab.parse_config(text)
    assert needle in str(exc.value)


def test_build_body_rotations():
    b = lab.build_body({"kind": "gen_ellipse", "gamma": 4, "tan": [1, 2]})
    assert all(f.m0 is not None for f in b.flat_points)
    b = lab.build_body({"kind": "gen_ellipse", "gamma": 4, "theta": 0.3})
    assert all(f.m0 is None for f in b.flat_points)
    assert lab.body_gamma(lab.build_body({"kind": "disk"})) == 2.0


def test_csv_round_trip_exact():
    rows = [lab._row("x", "disk", 2.0, 64.0, 2.0, math.pi / 7, 1e-17 / 3, 256, 7),
            lab._row("x", "disk", 2.0, 128.0, math.inf, 0.1 + 0.2, 0.0, 256, 7)]
    back = lab.read_csv_rows(lab.rows_to_csv(rows))
    assert back == rows
    assert lab.rows_to_csv(back) == lab.rows_to_csv(rows)


def test_csv_errors_have_line_numbers():
    head = ",".join(lab.CSV_COLUMNS) + "\n"
    with pytest.raises(ValueError, match="line 2: expected 9 columns"):
        lab.read_csv_rows(head + "a,b,c\n")
    with pytest.raises(ValueError, match="line 3"):
        lab.read_csv_rows(head + "a,disk,2,64,2,1.0,0,256,7\n" + "a,disk,2,64,2,oops,0,256,7\n")
    with pytest.raises(ValueError, match="header"):
        lab.read_csv_rows("wrong,header\n1,2\n")


def test_fit_scaling_exact_power_law():
    R = np.geomspace(10, 1000, 10)
    rows = [lab._row("pw", "disk", 2.0, r, 2.0, 3.0 * r ** 0.625, 0.0, 16, 1) for r in R]
    fit = lab.fit_scaling(lab.rows_to_csv(rows))
    assert fit.exponent == pytest.approx(0.625, abs=1e-12)
    ref = spectral.decay_fit((R, 3.0 * R ** 0.625))
    assert fit.exponent == pytest.approx(ref.exponent, abs=1e-14)


def test_fit_scaling_window_deterministic():
    R = np.geomspace(10, 1000, 20)
    v = R ** 0.5 * (1 + 0.05 * np.sin(R))
    rows = [lab._row("pw", "disk", 2.0, r, 2.0, y, 0.0, 16, 1) for r, y in zip(R, v)]
    text = lab.rows_to_csv(rows)
    a = lab.fit_scaling(text, window=(20, 500))
    b = lab.fit_scaling(text, window=(20, 500))
    full = lab.fit_scaling(text)
    assert a == b and a.n < full.n and a.exponent != full.exponent
    with pytest.raises(ValueError):
        lab.fit_scaling(text, window=(20, 40))


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = lab.parse_config(SMALL_SCAN)
    cfg.output = str(out / "scan")
    return cfg, lab.run_experiment(cfg)


def test_run_writes_refittable_artifacts(small_run):
    cfg, rep = small_run
    csv_path = cfg.output + ".csv"
    data = json.load(open(cfg.output + ".json"))
    assert data["config"]["seed"] == 7
    assert len(data["rows"]) == len(rep.rows) == 2 * len(cfg.R_grid())
    for p in (1.0, 2.0):
        key = f"exponent_scan/p={p:g}"
        fit = lab.fit_scaling(csv_path, experiment="exponent_scan", p=p)
        assert fit.exponent == rep.fits[key]["exponent"]
        assert fit.intercept == rep.fits[key]["intercept"]
    assert set(rep.timings) >= {"sweeps", "total"}
    assert {c["name"] for c in rep.checks} == {"exponent_scan/p=1", "exponent_scan/p=2"}


def test_run_byte_identical_across_threads(small_run, tmp_path):
    cfg, rep = small_run
    again = lab.parse_config(SMALL_SCAN + "\n")
    again.threads = 3
    again.output = str(tmp_path / "scan3")
    lab.run_experiment(again)
    assert open(again.output + ".csv").read() == open(cfg.output + ".csv").read()


def test_identity_suite_passes():
    rep = lab.run_experiment({"experiment": "identity_suite", "seed": 1})
    assert rep.passed and len(rep.checks) >= 10


def test_fourier_decay_small():
    rep = lab.run_experiment({"experiment": "fourier_decay", "seed": 1,
                              "body": {"kind": "gen_ellipse", "gamma": 4},
                              "fourier": {"s_min": 16, "s_max": 512, "samples": 64}})
    names = {c["name"] for c in rep.checks}
    assert "two-term remainder exponent" in names and "normal exponent sharp" in names
    assert rep.passed


def test_mainterm_residual_small():
    rep = lab.run_experiment({"experiment": "mainterm_residual", "seed": 1,
                              "body": {"kind": "gen_ellipse", "gamma": 4},
                              "grid": {"R_min": 64, "R_max": 1024, "count": 8, "M": 32}})
    series = {r["experiment"] for r in rep.rows}
    assert series == {"mainterm_residual/norm", "mainterm_residual/residual"}
    assert rep.fits["mainterm_residual/oracle_l2"]["value"] == pytest.approx(0.27168, abs=1e-5)


def test_rotation_and_diophantine_small():
    rep = lab.run_experiment({"experiment": "rotation_scan", "seed": 1,
                              "body": {"kind": "gen_ellipse", "gamma": 4},
                              "grid": {"R_min": 16, "R_max": 128, "count": 8},
                              "rotation": {"angles": 8, "M": 16}})
    assert len(rep.rows) == 8
    rep = lab.run_experiment({"experiment": "diophantine_compare", "seed": 1,
                              "body": {"kind": "gen_ellipse", "gamma": 4},
                              "grid": {"R_min": 16, "R_max": 128, "count": 8, "M": 16}})
    assert rep.fits["diophantine_compare/normal_quality"]["min_value"] > 0.3
    assert len(rep.checks) == 3


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_cli_count(capsys):
    assert cli.main(["count", "--body", "disk", "--R", "2"]) == 0
    out = capsys.readouterr().out.split()
    assert out[:2] == ["count", "13"]
    assert float(out[3]) == pytest.approx(13 - 4 * math.pi, abs=1e-12)


def test_cli_lpnorm_and_fourier(capsys):
    assert cli.main(["lpnorm", "--body", "gen_ellipse", "--gamma", "4", "--R", "64",
                     "--p", "2", "--samples", "16", "--seed", "3", "--main-term"]) == 0
    vals = dict(line.split() for line in capsys.readouterr().out.strip().splitlines())
    assert float(vals["value"]) > 0
    assert cli.main(["fourier", "--body", "disk", "--zeta", "8", "0"]) == 0
    vals = dict(line.split() for line in capsys.readouterr().out.strip().splitlines())
    assert float(vals["abs"]) == pytest.approx(abs(spectral.disk_chi_hat(8.0)), rel=1e-6)


def test_cli_usage_errors(capsys):
    assert cli.main(["count", "--R", "-1"]) == 1
    assert cli.main(["lpnorm", "--R", "10", "--p", "0.5"]) == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["bogus"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["count"])
    assert exc.value.code == 1


def test_cli_run_and_refit(tmp_path, capsys):
    cfg = tmp_path / "scan.toml"
    cfg.write_text(SMALL_SCAN)
    code = cli.main(["run", str(cfg), "--out", str(tmp_path / "o")])
    assert code in (0, 2)
    assert cli.main(["refit", str(tmp_path / "o.csv"), "--experiment", "exponent_scan",
                     "--p", "2"]) == 0
    assert "exponent" in capsys.readouterr().out
    assert cli.main(["run", str(tmp_path / "missing.toml")]) == 1


def test_cli_run_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setenv("FLATLATTICE_THREADS", "1")
    # an impossible tolerance forces an acceptance failure
    cfg = tmp_path / "strict.toml"
    cfg.write_text(SMALL_SCAN + "\n[tolerance]\nslope = 0.0\n")
    assert cli.main(["run", str(cfg)]) == 2
    cfg.write_text(SMALL_SCAN)
    assert cli.main(["--threads", "2", "run", str(cfg), "--samples", "8"]) == 1
