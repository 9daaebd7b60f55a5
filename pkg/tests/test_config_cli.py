import csv
import subprocess
import sys
from importlib import resources

import numpy as np
import pytest

from kawahara_lab.cli import main, parse_vary
from kawahara_lab.config import ConfigError, load_scenario, parse_scenario
from kawahara_lab.errors import ConfigurationError
from kawahara_lab.model import AlignmentWarning
from kawahara_lab.theory import p6j_constants

SMALL = """
[model]
L = 3.0
h = 1.0
mu1 = 2.0
mu2 = 1.0
xi = {xi}
variant = mu
a_kind = indicator
a_amplitude = 1.0
a_support = 0.0, 1.5

[numerics]
n = 30
dt = {dt}
t_final = 2.0

[initial]
function = sin-mode
power = 3
amplitude = 0.2
history = constant

[checks]
run = dissipation, observability
observability_T = 1.0
{extra}
"""


def scenario_file(tmp_path, xi=1.5, dt=0.01, extra=""):
    path = tmp_path / "s.cfg"
    path.write_text(SMALL.format(xi=xi, dt=dt, extra=extra))
    return path


def test_parse_small():
    sc = parse_scenario(SMALL.format(xi=1.5, dt=0.01, extra=""))
    assert sc.params.n == 30 and sc.variant.tag == "mu" and sc.variant.nonlinearity_on
    assert sc.checks == ("dissipation", "observability")
    assert sc.seed == 42


def test_missing_keys_reported_together():
    with pytest.raises(ConfigError) as ei:
        parse_scenario("[model]\nL = 1\n[numerics]\nn = 10\n[initial]\nfunction = zero\n")
    msg = str(ei.value)
    assert "h" in msg and "dt" in msg and "t_final" in msg


def test_error_names_line():
    text = SMALL.format(xi=1.5, dt=0.01, extra="").replace("n = 30", "n = thirty")
    with pytest.raises(ConfigError) as ei:
        parse_scenario(text, "x.cfg")
    assert ei.value.line is not None and str(ei.value).startswith(f"x.cfg:{ei.value.line}:")


def test_unknown_key_and_check():
    with pytest.raises(ConfigError):
        parse_scenario(SMALL.format(xi=1.5, dt=0.01, extra="colour = red"))
    with pytest.raises(ConfigError):
        parse_scenario(SMALL.format(xi=1.5, dt=0.01, extra="").replace("observability_T", "run = magic\n#"))


def test_dt_adjusted_with_warning():
    with pytest.warns(AlignmentWarning):
        sc = parse_scenario(SMALL.format(xi=1.5, dt=0.03, extra=""))
    assert sc.params.delay_steps == 34


def test_half_radius_scaling():
    sc = load_scenario(resources.files("kawahara_lab") / "scenarios" / "mu_decay.cfg")
    u0, z0 = sc.initial_data()
    from kawahara_lab.functionals import h_norm
    lc = p6j_constants(3.0, 1.0, 2.0, 1.0, 1.5)
    assert h_norm(u0, z0, sc.params) == pytest.approx(0.5 * lc.r_max, rel=1e-12)


def test_simulate_writes_artifacts(tmp_path, capsys):
    cfg = scenario_file(tmp_path)
    out = tmp_path / "out"
    assert main(["simulate", str(cfg), "--out", str(out)]) == 0
    for name in ("trace.csv", "snapshots.csv", "energy_log.dat", "constants.txt", "checks.csv"):
        assert (out / name).exists()
    rows = list(csv.reader(open(out / "checks.csv")))
    assert rows[0][:5] == ["name", "worst_violation", "t_worst", "slack", "status"]
    assert [r[4] for r in rows[1:]] == ["pass", "pass"]
    assert "C0 = 0.25" in (out / "constants.txt").read_text()
    first = (out / "trace.csv").read_bytes()
    main(["simulate", str(cfg), "--out", str(out)])
    assert (out / "trace.csv").read_bytes() == first


def test_fit_decay_and_observability_commands(tmp_path, capsys):
    cfg = scenario_file(tmp_path)
    out = tmp_path / "out"
    main(["simulate", str(cfg), "--out", str(out)])
    capsys.readouterr()
    assert main(["fit-decay", str(out / "trace.csv"), "--which", "mu"]) == 0
    assert capsys.readouterr().out.startswith("gamma_emp = ")
    assert main(["observability", str(out / "trace.csv"), "--T", "1.0", "--C0", "0.25"]) == 0
    text = capsys.readouterr().out
    assert "status = ok" in text and "nu = " in text


def test_expect_violate_exit_zero(tmp_path):
    cfg = scenario_file(tmp_path, xi=3.5, extra="expect = violate\nslack = -1.0")
    assert main(["simulate", str(cfg), "--out", str(tmp_path / "o")]) == 0
    cfg = scenario_file(tmp_path, xi=3.5, extra="slack = -1.0")
    assert main(["simulate", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_blow_up_exit_code(tmp_path):
    cfg = scenario_file(tmp_path, extra="").read_text().replace("amplitude = 0.2", "amplitude = 1e7")
    (tmp_path / "b.cfg").write_text(cfg.replace("dt = 0.01", "dt = 0.1"))
    with pytest.warns(UserWarning):
        assert main(["simulate", str(tmp_path / "b.cfg"), "--out", str(tmp_path / "o")]) == 3


def test_bad_config_exit_two(tmp_path, capsys):
    (tmp_path / "bad.cfg").write_text("[model]\nL = 1\n")
    assert main(["simulate", str(tmp_path / "bad.cfg")]) == 2
    assert "error:" in capsys.readouterr().err


def test_check_theory_prints_c0(capsys):
    assert main(["check-theory", "--L", "1", "--h", "1", "--mu1", "2", "--mu2", "1", "--xi", "1.5"]) == 0
    out = capsys.readouterr().out
    assert "C0 = 0.25\n" in out and "r_max = 4.348018224536" in out


def test_spectrum_command(tmp_path, capsys):
    cfg = scenario_file(tmp_path)
    assert main(["spectrum", str(cfg), "--m-rho", "10", "--n", "20", "--out", str(tmp_path / "sp.csv")]) == 0
    assert float(capsys.readouterr().out.split()[2]) < 0
    assert len(open(tmp_path / "sp.csv").readlines()) == 1 + 20 * 11


def test_unknown_subcommand_exit_two():
    r = subprocess.run([sys.executable, "-m", "kawahara_lab", "frobnicate"], capture_output=True, text=True)
    assert r.returncode == 2 and "usage" in r.stderr


def test_parse_vary():
    name, vals = parse_vary("L:0.5:5.4:20")
    assert name == "L" and vals.size == 20 and vals[-1] == 5.4
    for bad in ("L:1:2", "n:1:2:3", "L:1:2:0"):
        with pytest.raises(ConfigurationError):
            parse_vary(bad)


def test_sweep_200_rows(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--vary", "L:0.5:5.4:20", "--vary", "xi:1.1:2.9:10", "--workers", "2",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 200
    row = next(r for r in rows if float(r["L"]) == 0.5 and float(r["xi"]) == 1.5)
    assert float(row["C0"]) == 0.25
    assert all(float(r["gamma"]) > 0 and float(r["delta"]) >= 0 for r in rows)


def test_sweep_with_simulation(tmp_path):
    cfg = scenario_file(tmp_path)
    out = tmp_path / "sw.csv"
    assert main(["sweep", "--base", str(cfg), "--simulate", "--vary", "xi:1.2:1.8:2", "--workers", "1",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert [r["status"] for r in rows] == ["ok", "ok"] and all(r["checks_passed"] == "true" for r in rows)


def test_bundled_scenario_passes(tmp_path, capsys):
    path = resources.files("kawahara_lab") / "scenarios" / "mu_decay.cfg"
    assert main(["simulate", str(path), "--out", str(tmp_path / "mu")]) == 0
    rows = list(csv.reader(open(tmp_path / "mu" / "checks.csv")))
    assert len(rows) == 8 and all(r[4] == "pass" for r in rows[1:])
