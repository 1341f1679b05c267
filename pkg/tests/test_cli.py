import csv
import io
import subprocess
import sys

import pytest

from deriloss.cli import RunConfig, cmd_verify, main, read_config_file, table5_rows
from deriloss.errors import ConfigError


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def regime_of(tmp_path, capsys, omega, theta):
    assert run(tmp_path, "classify", "--omega", omega, "--theta", theta) == 0
    out = capsys.readouterr().out
    return next(line for line in out.splitlines() if line.startswith("regime")).split()[1]


def test_classify_examples(tmp_path, capsys):
    assert regime_of(tmp_path, capsys, "holder:0.5", "power:1:1") == "Finite"
    assert regime_of(tmp_path, capsys, "linear", "bounded:1") == "NoLoss"
    # m ~ 1.5 (log lambda)^(2/3), so m / log lambda -> 0
    assert regime_of(tmp_path, capsys, "loglip", "power:3:1") == "ArbitrarilySmall"
    assert regime_of(tmp_path, capsys, "logpower:3", "power:3:1") == "Infinite"


def test_classify_csv(tmp_path, capsys):
    assert run(tmp_path, "classify", "--lambda-points", "30") == 0
    rows = list(csv.reader(io.StringIO((tmp_path / "classify.csv").read_text())))
    assert rows[0] == ["lambda", "m", "s_star", "first_term", "second_term", "branch", "m_over_loglambda"]
    assert len(rows) == 31
    assert not list(tmp_path.glob(".*.tmp"))


def test_table5_rows():
    rows = {r.name: r for r in table5_rows(1.0, 1.0, 2.0)}
    assert len(rows) == 8
    for k in range(1, 5):
        assert rows[f"table5-row{k}"].finite
    for k in range(2, 5):
        assert not rows[f"table5-row{k} weakened"].finite
    # (log g)^2 / 2 ~ 8 log(lambda) for exp(4 sqrt|log|) with or without one extra log factor
    assert rows["table5-row1 weakened"].finite


def test_construct_and_hypothesis_exit(tmp_path, capsys):
    assert run(tmp_path, "construct", "--lambda", "1e4", "--points", "300", "--samples", "20000") == 0
    for name in ("coefficient.csv", "membership.txt", "guarantee.txt"):
        assert (tmp_path / name).stat().st_size > 0
    assert run(tmp_path, "construct", "--lambda", "10") == 3


def test_verify_pass_and_self_test_fail(tmp_path, capsys):
    assert run(tmp_path, "verify") == 0
    assert (tmp_path / "verify.txt").read_text().endswith("RESULT PASS\n")
    assert run(tmp_path, "verify", "--self-test") == 1
    assert (tmp_path / "verify-selftest.txt").read_text().endswith("RESULT FAIL\n")


def test_verify_bounded_pair(tmp_path, capsys):
    assert run(tmp_path, "verify", "--omega", "linear", "--theta", "bounded:1") == 0


def test_verify_is_deterministic(tmp_path):
    cfg = RunConfig(out=str(tmp_path))
    cmd_verify(cfg, emit=lambda s: None)
    first = (tmp_path / "verify.txt").read_bytes()
    cmd_verify(cfg, emit=lambda s: None)
    assert (tmp_path / "verify.txt").read_bytes() == first


def test_config_errors(tmp_path, capsys):
    assert run(tmp_path, "classify", "--mu1", "3", "--mu2", "2") == 2
    assert run(tmp_path, "classify", "--omega", "bogus") == 2
    assert run(tmp_path, "classify", "--lambda-min", "10", "--lambda-max", "1") == 2
    assert run(tmp_path, "classify", "--config", str(tmp_path / "missing.cfg")) == 2
    assert main(["nonsense"]) == 2


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# demo\nomega = linear\ntheta = bounded:1\nlambda-points = 30\n")
    assert read_config_file(str(cfg_file))["lambda_points"] == 30
    assert regime_of(tmp_path, capsys, "linear", "bounded:1") == "NoLoss"
    assert run(tmp_path, "classify", "--config", str(cfg_file)) == 0
    assert "NoLoss" in capsys.readouterr().out
    assert run(tmp_path, "classify", "--config", str(cfg_file), "--omega", "holder:0.5",
               "--theta", "power:1:1") == 0
    assert "Finite" in capsys.readouterr().out
    cfg_file.write_text("colour = red\n")
    with pytest.raises(ConfigError):
        read_config_file(str(cfg_file))


def test_plot_is_deterministic(tmp_path, capsys):
    assert run(tmp_path, "classify") == 0
    csv_path = tmp_path / "classify.csv"
    assert run(tmp_path, "plot", str(csv_path)) == 0
    svg = (tmp_path / "classify.svg").read_bytes()
    assert svg.startswith(b"<svg") or svg.startswith(b"<?xml")
    assert b"log" in svg
    assert run(tmp_path, "plot", str(csv_path), "-o", str(tmp_path / "again.svg")) == 0
    assert (tmp_path / "again.svg").read_bytes() == svg


def test_plot_input_errors(tmp_path, capsys):
    assert run(tmp_path, "plot", str(tmp_path / "nope.csv")) == 2
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert run(tmp_path, "plot", str(empty)) == 2


def test_spectral_command(tmp_path, capsys):
    assert run(tmp_path, "spectral", "--pair", "finite", "--n-max", "30") == 0
    head = (tmp_path / "spectral-finite.csv").read_text().splitlines()[0]
    assert head.startswith("n,lambda_n,phi_n,a_n")
    assert run(tmp_path, "spectral", "--pair", "finite", "--n-max", "3", "--t0", "0") == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "deriloss", "classify", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "Finite" in proc.stdout
