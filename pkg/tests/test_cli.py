import csv
from pathlib import Path

import numpy as np
import pytest

import besovkit.acceptance as acceptance
from besovkit import __version__
from besovkit.bsgf import write_grid_function
from besovkit.cli import COMMANDS, main
from besovkit.grid import Grid, GridFunction

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
QUICK = ["besov-norm", "check-ap", "embed-check", "multiplier-check", "solve-elliptic", "solve-parabolic",
         "solve-system", "sweep-resolvent"]

SMALL_SYSTEM = """\
[grid]
sizes = 64
periods = pi

[system]
d = 4
sigma = 0.5
modulation = 0.1
coupling.0 = tridiag:0.2

[sweep]
lambdas = 1, 100
probes = 1
"""


def _run(tmp_path, *argv):
    out = tmp_path / "out"
    return main([*argv, "--out", str(out)]), out


def _manifest(out):
    head = (out / "manifest.txt").read_text().split("[config]")[0]
    return dict(line.split(" = ", 1) for line in head.splitlines()
                if " = " in line and not line.startswith(("note", "warning")))


def test_every_command_has_a_shipped_config():
    assert {p.stem for p in CONFIGS.glob("*.cfg")} == set(COMMANDS)


@pytest.mark.parametrize("command", QUICK)
def test_shipped_config_runs(tmp_path, command):
    status, out = _run(tmp_path, command, "--config", str(CONFIGS / f"{command}.cfg"))
    assert status == 0
    man = _manifest(out)
    assert man["command"] == command and man["status"] == "0"
    files = man["files"].split(",")
    assert files and all((out / f).exists() for f in files)
    for f in (f for f in files if f.endswith(".csv")):
        with open(out / f, newline="") as fh:
            header = next(csv.reader(fh))
        assert all("[" in h and h.endswith("]") for h in header), header


def test_sweep_system_small(tmp_path):
    cfg = tmp_path / "sys.cfg"
    cfg.write_text(SMALL_SYSTEM)
    status, out = _run(tmp_path, "sweep-system", "--config", str(cfg))
    assert status == 0
    assert "system_resolvent.csv" in _manifest(out)["files"]


@pytest.mark.parametrize("command", ["besov-norm", "multiplier-check", "solve-parabolic"])
def test_output_is_byte_identical(tmp_path, command):
    cfg = str(CONFIGS / f"{command}.cfg")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([command, "--config", cfg, "--out", str(a)]) == 0
    assert main([command, "--config", cfg, "--out", str(b)]) == 0
    names = _manifest(a)["files"].split(",")
    paths = [p.relative_to(a) for name in names for p in ([a / name] if (a / name).is_file()
                                                          else sorted((a / name).rglob("*")))]
    assert paths
    for rel in paths:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_seed_flag_overrides_config(tmp_path):
    cfg = str(CONFIGS / "besov-norm.cfg")
    status, out = _run(tmp_path, "besov-norm", "--config", cfg, "--seed", "7")
    assert status == 0 and _manifest(out)["seed"] == "7"


@pytest.mark.parametrize("argv", [
    [],
    ["no-such-command"],
    ["besov-norm", "--seed", "-1"],
    ["besov-norm", "--threads", "0"],
    ["acceptance", "--only", "x"],
    ["besov-norm", "--bogus"],
])
def test_usage_errors_exit_2(tmp_path, argv, capsys):
    assert main(argv + ["--out", str(tmp_path)] if argv else argv) == 2
    assert capsys.readouterr().err


def test_config_error_exits_3(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[besov]\nq = 0.5\n")
    status, _ = _run(tmp_path, "besov-norm", "--config", str(cfg))
    assert status == 3
    err = capsys.readouterr().err
    assert "besov.q" in err and "line 2" in err


def test_missing_config_exits_3(tmp_path):
    status, _ = _run(tmp_path, "besov-norm", "--config", str(tmp_path / "absent.cfg"))
    assert status == 3


def test_corrupt_input_exits_4(tmp_path, capsys):
    bad = tmp_path / "bad.bsgf"
    bad.write_bytes(b"NOPE" + bytes(60))
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[input]\nfile = bad.bsgf\n")
    status, _ = _run(tmp_path, "besov-norm", "--config", str(cfg))
    assert status == 4
    assert "magic" in capsys.readouterr().err.lower()


def test_white_noise_input_is_a_numerical_failure(tmp_path, capsys):
    g = Grid((64,), (2 * np.pi,))
    noise = np.random.default_rng(0).standard_normal(64)
    write_grid_function(GridFunction(g, noise), tmp_path / "noise.bsgf")
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[input]\nfile = noise.bsgf\n")
    status, _ = _run(tmp_path, "besov-norm", "--config", str(cfg))
    assert status == 1
    assert "OutOfBand" in capsys.readouterr().err


def test_failing_criterion_exits_1(tmp_path, monkeypatch):
    bad = lambda seed, threads: [acceptance.Check("always", False, "0")]  # noqa: E731
    monkeypatch.setattr(acceptance, "CRITERIA", ((99, "forced failure", bad),))
    status, out = _run(tmp_path, "acceptance")
    assert status == 1
    assert _manifest(out)["status"] == "1"
    rows = list(csv.reader(open(out / "acceptance.csv", newline="")))
    assert rows[1][:3] == ["99", "forced failure", "false"]


def test_only_selects_criteria(tmp_path, monkeypatch, capsys):
    ok = lambda seed, threads: [acceptance.Check("fine", True, "1")]  # noqa: E731
    monkeypatch.setattr(acceptance, "CRITERIA", ((1, "a", ok), (2, "b", ok)))
    status, _ = _run(tmp_path, "acceptance", "--only", "2")
    assert status == 0
    out = capsys.readouterr().out
    assert "[PASS]  2 b" in out and " 1 a" not in out


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out
