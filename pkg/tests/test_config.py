import math

import pytest
from hypothesis import given, strategies as st

from besovkit.config import SCHEMA, parse_config, parse_config_text, resolve_path
from besovkit.errors import ConfigError


def test_empty_text_gives_defaults():
    cfg = parse_config_text("")
    assert cfg.values == {k: d for k, (_, d) in SCHEMA.items()}
    assert not cfg.explicit and not cfg.warnings


def test_sections_prefix_keys():
    cfg = parse_config_text("seed = 4\n[besov]\ns = 1.5\nq = inf\n[grid]\nsizes = 32, 64\nperiods = 2pi\n")
    assert cfg["seed"] == 4 and cfg["besov.s"] == 1.5 and math.isinf(cfg["besov.q"])
    assert cfg["grid.sizes"] == (32, 64)
    assert cfg["grid.periods"] == pytest.approx((2 * math.pi, 2 * math.pi))
    assert cfg.explicit == {"seed", "besov.s", "besov.q", "grid.sizes", "grid.periods"}


def test_range_error_names_key_and_line():
    with pytest.raises(ConfigError) as exc:
        parse_config_text("[besov]\n\nq = 0.5\n")
    (issue,) = exc.value.issues
    assert issue.key == "besov.q" and issue.line == 3
    assert "besov.q" in str(exc.value) and ">= 1" in str(exc.value)
    assert exc.value.exit_code == 3


def test_every_issue_is_reported():
    text = "[besov]\nq = 0.5\nr = abc\n[grid]\nsizes = 12\nbogus = 1\n[time]\nphi = 0.1\n"
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text)
    keys = [i.key for i in exc.value.issues]
    assert keys == ["besov.q", "besov.r", "grid.sizes", "grid.bogus", "time.phi"]


def test_duplicate_key_warns_and_last_wins():
    cfg = parse_config_text("[besov]\ns = 1\ns = 2\n")
    assert cfg["besov.s"] == 2.0
    assert len(cfg.warnings) == 1 and "duplicate key besov.s" in cfg.warnings[0]


def test_comments_and_blank_lines():
    cfg = parse_config_text("# header\n\n; other\nseed = 3  # trailing\n")
    assert cfg["seed"] == 3


def test_malformed_line():
    with pytest.raises(ConfigError, match="expected 'key = value'"):
        parse_config_text("just words\n")


def test_pattern_keys():
    cfg = parse_config_text("[symbol]\ncoeff.2_0 = 1\ncoeff.0_2 = 1, 0.5\n[grid]\nsizes = 16,16\n"
                            "[system]\ncoupling.1_0 = tridiag:0.5\n", check_files=False)
    assert cfg.coefficients == {(2, 0): 1 + 0j, (0, 2): 1 + 0.5j}
    assert cfg.couplings == {(1, 0): "tridiag:0.5"}


def test_pattern_key_dimension_checked():
    with pytest.raises(ConfigError, match="multi-index length"):
        parse_config_text("[symbol]\ncoeff.2 = 1\n[grid]\nsizes = 16,16\n")


def test_period_count_must_match():
    with pytest.raises(ConfigError, match="one period per axis"):
        parse_config_text("[grid]\nsizes = 16,16,16\nperiods = 1,2\n")


def test_missing_file_reported(tmp_path):
    with pytest.raises(ConfigError, match="file not found"):
        parse_config_text("[input]\nfile = nope.bsgf\n", tmp_path)
    assert parse_config_text("[input]\nfile = nope.bsgf\n", tmp_path, check_files=False)["input.file"] == "nope.bsgf"


def test_relative_paths_follow_the_config_file(tmp_path):
    (tmp_path / "sub").mkdir()
    (tmp_path / "sub" / "f.bsgf").write_bytes(b"")
    cfg_path = tmp_path / "sub" / "run.cfg"
    cfg_path.write_text("[input]\nfile = f.bsgf\n")
    cfg = parse_config(cfg_path)
    assert cfg.path(cfg["input.file"]) == tmp_path / "sub" / "f.bsgf"


def test_packaged_data_resolves():
    assert resolve_path("package:operator_3x3.bsgf", None).is_file()


def test_unreadable_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "missing.cfg")


def test_echo_is_canonical():
    a = parse_config_text("seed = 1\n[besov]\ns = 0.5\n[grid]\nsizes = 32\n")
    b = parse_config_text("seed = 1\n[grid]\nsizes = 32\n[besov]\ns = 0.50\n")
    assert a.echo() == b.echo()
    lines = a.echo().splitlines()
    assert lines == sorted(lines)


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_float_values_round_trip_through_echo(s):
    cfg = parse_config_text(f"[besov]\ns = {s!r}\n")
    assert cfg["besov.s"] == s
    assert f"besov.s = {s!r}" in cfg.echo()


@given(st.floats(0.0, 0.999, exclude_max=True))
def test_subunit_exponents_always_rejected(q):
    with pytest.raises(ConfigError):
        parse_config_text(f"[besov]\nq = {q!r}\n")
