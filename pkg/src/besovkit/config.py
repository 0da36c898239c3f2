"""Sectioned ``key = value`` run configuration.

Grammar, one entry per line::

    # comment (also ';')
    [section]
    key = value          # trailing comments after ' #'

Inside ``[section]`` a key ``k`` is stored as ``section.k``; keys before
the first header, or written with dots, are taken as is.  Multi-index
keys use underscores or commas, e.g. ``symbol.coeff.2_0``.  Duplicate keys
keep the last value and record a warning.  All problems are collected and
raised together in one :class:`ConfigError`, each naming its key and line.

Paths are resolved against the config file's directory; the prefix
``package:`` refers to the data shipped with the package.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError

__all__ = ["ConfigIssue", "RunConfig", "parse_config", "parse_config_text", "resolve_path", "SCHEMA"]


@dataclass(frozen=True)
class ConfigIssue:
    key: str
    line: int
    message: str

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line else ""
        return f"{where}{self.key}: {self.message}"


# -- value parsers -------------------------------------------------------------


def _float(text: str) -> float:
    t = text.strip().lower().replace(" ", "")
    if t in ("inf", "infinity", "+inf"):
        return math.inf
    m = re.fullmatch(r"([-+]?[0-9.eE+-]*)\*?pi", t)
    if m:
        coef = m.group(1)
        return (float(coef) if coef not in ("", "+", "-") else float(coef + "1")) * math.pi
    try:
        return float(t)
    except ValueError:
        raise ValueError(f"not a number: {text!r}") from None


def _int(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ValueError(f"not an integer: {text!r}") from None


def _list(parse):
    def inner(text):
        items = [s for s in re.split(r"[,\s]+", text.strip()) if s]
        if not items:
            raise ValueError("empty list")
        return tuple(parse(s) for s in items)

    return inner


def _complex(text: str) -> complex:
    parts = [s for s in text.split(",")]
    if len(parts) == 1:
        return complex(_float(parts[0]), 0.0)
    if len(parts) == 2:
        return complex(_float(parts[0]), _float(parts[1]))
    raise ValueError(f"expected 're' or 're,im', got {text!r}")


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _str(text: str) -> str:
    t = text.strip()
    if not t:
        raise ValueError("empty value")
    return t


def _check(parse, pred, msg):
    def inner(text):
        v = parse(text)
        if not pred(v):
            raise ValueError(f"{msg} (got {text.strip()})")
        return v

    return inner


def _choice(*options):
    def inner(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)} (got {t})")
        return t

    return inner


def _exponent(v):
    return v >= 1 or math.isinf(v)


def _kind_prefix(*kinds):
    def inner(text):
        t = _str(text)
        kind = t.split(":", 1)[0].strip()
        if kind not in kinds:
            raise ValueError(f"kind must be one of {', '.join(kinds)} (got {kind})")
        return t

    return inner


_pos = lambda v: v > 0  # noqa: E731
_pow2_ge8 = lambda v: all(n >= 8 and n & (n - 1) == 0 for n in v)  # noqa: E731

#: key -> (parser, default)
SCHEMA = {
    "seed": (_check(_int, lambda v: v >= 0, "must be a nonnegative integer"), 0),
    "grid.sizes": (_check(_list(_int), _pow2_ge8, "sizes must be powers of two >= 8"), (64,)),
    "grid.periods": (_check(_list(_float), lambda v: all(x > 0 and math.isfinite(x) for x in v),
                            "periods must be positive"), (2 * math.pi,)),
    "input.file": (_str, None),
    "weight": (_kind_prefix("constant", "power", "table"), "constant:1.0"),
    "partition.profile": (_choice("cos2", "polynomial"), "cos2"),
    "besov.s": (_check(_float, math.isfinite, "must be finite"), 0.0),
    "besov.q": (_check(_float, _exponent, "must be >= 1 or inf"), 2.0),
    "besov.r": (_check(_float, _exponent, "must be >= 1 or inf"), 2.0),
    "operator": (_kind_prefix("identity", "diag", "matrix"), "identity:1"),
    "operator.phi": (_check(_float, lambda v: 0 <= v < math.pi, "must lie in [0, pi)"), 0.5 * math.pi),
    "symbol.order": (_check(_int, lambda v: v >= 2 and v % 2 == 0, "must be an even integer >= 2"), 2),
    "lambda": (_complex, 1 + 0j),
    "rhs": (_kind_prefix("random", "file"), "random"),
    "rhs.cutoff": (_check(_float, _pos, "must be positive"), 0.0),
    "sweep.lambdas": (_check(_list(_float), lambda v: all(x > 0 for x in v), "must be positive"),
                      (1.0, 10.0, 100.0, 1000.0)),
    "sweep.probes": (_check(_int, lambda v: v >= 0, "must be >= 0"), 8),
    "ap.p": (_check(_float, lambda v: 1 < v < math.inf, "must lie in (1, inf)"), 2.0),
    "ap.levels": (_check(_int, lambda v: 1 <= v <= 8, "must lie in 1..8"), 4),
    "ap.base": (_check(_int, lambda v: v >= 8 and v & (v - 1) == 0, "must be a power of two >= 8"), 64),
    "multiplier.symbols": (_list(_str), ("random:4", "xi")),
    "multiplier.d": (_check(_int, lambda v: v >= 1, "must be >= 1"), 2),
    "multiplier.space.q": (_check(_float, _exponent, "must be >= 1 or inf"), 2.0),
    "multiplier.l": (_check(_int, lambda v: v >= 1, "must be >= 1"), 0),
    "multiplier.probes": (_check(_int, lambda v: v >= 0, "must be >= 0"), 16),
    "multiplier.c_fit": (_check(_float, _pos, "must be positive"), 1.0),
    "embed.l": (_check(_list(_int), lambda v: all(x >= 1 for x in v), "orders must be >= 1"), (2,)),
    "embed.alpha": (_check(_list(_int), lambda v: all(x >= 0 for x in v), "must be >= 0"), (1,)),
    "embed.mu": (_check(_float, lambda v: 0 <= v <= 1, "must lie in [0, 1]"), 0.0),
    "embed.t": (_check(_list(_float), lambda v: all(x > 0 for x in v), "must be positive"), (1.0,)),
    "embed.h": (_check(_list(_float), lambda v: all(x > 0 for x in v), "must be positive"),
                tuple(2.0**-j for j in range(6, -1, -1))),
    "embed.functions": (_check(_int, lambda v: v >= 1, "must be >= 1"), 10),
    "embed.diagnostic": (_bool, False),
    "time.dt": (_check(_float, _pos, "must be positive"), 0.01),
    "time.steps": (_check(_int, lambda v: v >= 1, "must be >= 1"), 20),
    "time.phi": (_check(_float, lambda v: 0.5 * math.pi < v < math.pi, "must lie in (pi/2, pi)"), 0.75 * math.pi),
    "forcing": (_kind_prefix("random", "constant", "dir"), "random"),
    "system.d": (_check(_int, lambda v: v >= 1, "must be >= 1"), 8),
    "system.sigma": (_check(_float, math.isfinite, "must be finite"), 1.0),
    "system.diagonal": (_kind_prefix("pow2", "table"), "pow2"),
    "system.modulation": (_check(_float, lambda v: 0 <= v < 1, "must lie in [0, 1)"), 0.0),
    "system.p": (_check(_float, _exponent, "must be >= 1 or inf"), 2.0),
}

#: pattern keys: prefix -> (parser, description)
PATTERNS = {
    "symbol.coeff.": (_complex, "principal coefficient"),
    "lower.": (_kind_prefix("constant", "field"), "lower-order coefficient"),
    "system.coupling.": (_kind_prefix("table", "tridiag"), "coupling table"),
}


def _alpha(text: str) -> tuple:
    parts = [p for p in re.split(r"[_,]", text.strip("() ")) if p != ""]
    if not parts or not all(p.isdigit() for p in parts):
        raise ValueError(f"bad multi-index {text!r}")
    return tuple(int(p) for p in parts)


def resolve_path(text: str, base_dir) -> Path:
    """Resolve ``package:<name>`` or a path relative to ``base_dir``."""
    if text.startswith("package:"):
        return Path(str(resources.files("besovkit") / "data" / text[len("package:"):]))
    p = Path(text)
    if not p.is_absolute() and base_dir is not None:
        p = Path(base_dir) / p
    return p


def _referenced_path(key: str, value: str):
    """Path named by a value, or None if the value names no file."""
    if key == "input.file":
        return value
    kind, _, rest = value.partition(":")
    if kind in ("table", "matrix", "file", "constant", "dir", "field") and rest:
        path = rest.split(",")[0].strip()
        if kind == "constant" and key == "weight":
            return None
        return path
    return None


@dataclass
class RunConfig:
    """Validated configuration: schema values, pattern entries and provenance."""

    values: dict
    coefficients: dict = field(default_factory=dict)
    lower: dict = field(default_factory=dict)
    couplings: dict = field(default_factory=dict)
    base_dir: Path | None = None
    warnings: list = field(default_factory=list)
    explicit: set = field(default_factory=set)

    def __getitem__(self, key):
        return self.values[key]

    def path(self, text: str) -> Path:
        return resolve_path(text, self.base_dir)

    def echo(self) -> str:
        """Canonical, deterministic listing of every effective value."""

        def fmt(v):
            if isinstance(v, tuple):
                return ",".join(fmt(x) for x in v)
            if isinstance(v, complex):
                return f"{v.real!r},{v.imag!r}"
            if isinstance(v, float):
                return repr(v)
            return str(v)

        lines = [f"{k} = {fmt(v)}" for k, v in sorted(self.values.items()) if v is not None]
        for name, table in (("symbol.coeff", self.coefficients), ("lower", self.lower),
                            ("system.coupling", self.couplings)):
            for a, v in sorted(table.items()):
                lines.append(f"{name}.{'_'.join(map(str, a))} = {fmt(v)}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str, base_dir=None, check_files: bool = True) -> RunConfig:
    """Parse and validate configuration text; raise :class:`ConfigError` listing every issue."""
    issues, warnings = [], []
    raw = {}
    section = ""
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = re.split(r"\s#|\s;", line, maxsplit=1)[0].strip()
        if not stripped or stripped.startswith(("#", ";")):
            continue
        m = re.fullmatch(r"\[\s*([A-Za-z0-9_.]*)\s*\]", stripped)
        if m:
            section = m.group(1)
            continue
        if "=" not in stripped:
            issues.append(ConfigIssue(section or "<top>", lineno, f"expected 'key = value', got {stripped!r}"))
            continue
        k, v = (s.strip() for s in stripped.split("=", 1))
        if not k:
            issues.append(ConfigIssue(section or "<top>", lineno, "missing key"))
            continue
        key = f"{section}.{k}" if section else k
        if key in raw:
            warnings.append(f"line {lineno}: duplicate key {key} (first at line {raw[key][1]}); last value wins")
        raw[key] = (v, lineno)

    values = {k: d for k, (_, d) in SCHEMA.items()}
    cfg = RunConfig(values, base_dir=Path(base_dir) if base_dir is not None else None, warnings=warnings)
    for key, (v, lineno) in raw.items():
        if key in SCHEMA:
            try:
                values[key] = SCHEMA[key][0](v)
                cfg.explicit.add(key)
            except ValueError as exc:
                issues.append(ConfigIssue(key, lineno, str(exc)))
                continue
        else:
            for prefix, (parse, _) in PATTERNS.items():
                if key.startswith(prefix) and len(key) > len(prefix):
                    try:
                        alpha = _alpha(key[len(prefix):])
                        val = parse(v)
                    except ValueError as exc:
                        issues.append(ConfigIssue(key, lineno, str(exc)))
                        break
                    target = {"symbol.coeff.": cfg.coefficients, "lower.": cfg.lower,
                              "system.coupling.": cfg.couplings}[prefix]
                    target[alpha] = val
                    break
            else:
                issues.append(ConfigIssue(key, lineno, "unknown key"))
                continue
        if check_files:
            path = _referenced_path(key, v)
            if path is not None:
                p = resolve_path(path, cfg.base_dir)
                exists = p.is_dir() if key == "forcing" and v.startswith("dir:") else p.is_file()
                if not exists:
                    issues.append(ConfigIssue(key, lineno, f"file not found: {p}"))

    sizes, periods = values["grid.sizes"], values["grid.periods"]
    if len(periods) == 1 and len(sizes) > 1:
        values["grid.periods"] = periods * len(sizes)
    elif len(periods) != len(sizes):
        issues.append(ConfigIssue("grid.periods", raw.get("grid.periods", ("", 0))[1],
                                  f"needs one period per axis ({len(sizes)})"))
    if len(sizes) > 3:
        issues.append(ConfigIssue("grid.sizes", raw.get("grid.sizes", ("", 0))[1], "at most 3 axes"))
    for a in cfg.coefficients:
        if len(a) != len(sizes):
            issues.append(ConfigIssue(f"symbol.coeff.{'_'.join(map(str, a))}", raw.get(
                f"symbol.coeff.{'_'.join(map(str, a))}", ("", 0))[1], "multi-index length differs from grid"))
    if issues:
        raise ConfigError(issues)
    return cfg


def parse_config(path, check_files: bool = True) -> RunConfig:
    """Read and validate a config file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError([ConfigIssue("--config", 0, f"cannot read {p}: {exc.strerror}")]) from exc
    return parse_config_text(text, p.parent, check_files)
