"""Command-line front end.

Every subcommand reads an optional config file, writes one or more CSV
files plus ``manifest.txt`` into ``--out`` and exits with

    0 success, 1 numerical failure, 2 usage, 3 configuration, 4 I/O.

CSV cells are written with ``repr`` precision and every header names the
quantity and its meaning, so identical config and seed give identical
bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, parse_config, parse_config_text
from .errors import BesovKitError, ConfigError, FormatError

__all__ = ["main", "build_parser", "COMMANDS"]


# -- output helpers ------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        v = complex(v)
        return f"{v.real!r}{'+' if v.imag >= 0 or math.isnan(v.imag) else '-'}{abs(v.imag)!r}j"
    if isinstance(v, (tuple, list)):
        return " ".join(_cell(x) for x in v)
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    """Write a CSV with ``\\n`` line endings and repr-formatted numbers."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    path.write_text(buf.getvalue())


class Run:
    """Per-invocation state: config, seed, thread cap, output directory."""

    def __init__(self, command: str, cfg: RunConfig, seed: int, threads: int, out: Path, only=None):
        self.command = command
        self.only = only
        self.cfg = cfg
        self.seed = seed
        self.threads = threads
        self.out = out
        self.files = []
        self.notes = []

    def csv(self, name: str, header, rows) -> Path:
        p = self.out / name
        write_csv(p, header, rows)
        self.files.append(name)
        return p

    def rng(self, stream: int = 0) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(stream,)))

    def manifest(self, status: int, elapsed: float) -> None:
        import scipy

        lines = [
            f"command = {self.command}",
            f"status = {status}",
            f"seed = {self.seed}",
            f"threads = {self.threads}",
            f"besovkit = {__version__}",
            f"numpy = {np.__version__}",
            f"scipy = {scipy.__version__}",
            f"python = {platform.python_version()}",
            f"wall_seconds = {elapsed:.3f}",
            "files = " + ",".join(self.files),
        ]
        lines += [f"warning = {w}" for w in self.cfg.warnings]
        lines += [f"note = {n}" for n in self.notes]
        lines += ["", "[config]", self.cfg.echo()]
        (self.out / "manifest.txt").write_text("\n".join(lines))


# -- builders from config ----------------------------------------------------------


def _grid(cfg: RunConfig):
    from .grid import Grid

    return Grid(cfg["grid.sizes"], cfg["grid.periods"])


def _params(cfg: RunConfig):
    from .littlewood_paley import BesovParams
    from .weights import Weight

    spec = cfg["weight"]
    if spec.startswith("table:"):
        spec = "table:" + str(cfg.path(spec[6:]))
    w = Weight.from_spec(spec, cfg.base_dir)
    return BesovParams(cfg["besov.s"], cfg["besov.q"], cfg["besov.r"], w, cfg["partition.profile"])


def _operator(cfg: RunConfig):
    from .operators import operator_from_spec

    spec = cfg["operator"]
    if spec.startswith("matrix:"):
        spec = "matrix:" + str(cfg.path(spec[7:]))
    return operator_from_spec(spec, cfg.base_dir, cfg["operator.phi"])


def _symbol(cfg: RunConfig, n: int):
    from .elliptic import EllipticSymbol

    l = cfg["symbol.order"] // 2
    if cfg.coefficients:
        return EllipticSymbol(l, dict(cfg.coefficients))
    return EllipticSymbol.positive_laplacian_power(n, l)


def _lower(cfg: RunConfig, grid, d: int) -> list:
    from .bsgf import read_grid_function, read_matrix
    from .elliptic import LowerTerm

    out = []
    for alpha, spec in sorted(cfg.lower.items()):
        kind, _, rest = spec.partition(":")
        path, *opts = [s.strip() for s in rest.split(",")]
        mu = 0.0
        for o in opts:
            k, _, v = o.partition("=")
            if k.strip() != "mu":
                raise ConfigError(f"lower.{'_'.join(map(str, alpha))}: unknown option {k.strip()!r}")
            mu = float(v)
        if kind == "constant":
            mat = read_matrix(cfg.path(path))
        else:
            f = read_grid_function(cfg.path(path))
            if f.grid != grid or f.fiber_dim != d * d:
                raise ConfigError(f"lower.{'_'.join(map(str, alpha))}: field must live on the grid with {d * d} channels")
            mat = f.values.reshape(grid.sizes + (d, d))
        out.append(LowerTerm(alpha, mat, mu))
    return out


def _input(cfg: RunConfig, grid=None, d: int | None = None, rng=None, key: str = "input.file"):
    """Grid function from ``input.file`` or a seeded random band-limited draw."""
    from .bsgf import read_grid_function
    from .grid import random_band_limited
    from .littlewood_paley import build_partition

    if cfg.values.get(key):
        f = read_grid_function(cfg.path(cfg[key]))
        if grid is not None and f.grid != grid:
            raise ConfigError(f"{key}: file grid {f.grid} differs from the configured grid")
        return f
    grid = grid or _grid(cfg)
    cutoff = cfg["rhs.cutoff"] or 2.0 ** build_partition(grid, cfg["partition.profile"]).k_max
    return random_band_limited(grid, d or 1, cutoff, rng)


def _rhs(run: Run, grid, d: int):
    cfg = run.cfg
    spec = cfg["rhs"]
    if spec.startswith("file:"):
        from .bsgf import read_grid_function

        f = read_grid_function(cfg.path(spec[5:]))
        if f.grid != grid or f.fiber_dim != d:
            raise ConfigError("rhs: file does not match the grid and operator size")
        return f
    return _input(run.cfg, grid, d, run.rng(1), key="__none__")


# -- subcommands -------------------------------------------------------------------


def cmd_besov_norm(run: Run) -> int:
    from .littlewood_paley import besov_norm

    cfg = run.cfg
    f = _input(cfg, None, 1, run.rng(0))
    params = _params(cfg)
    value = besov_norm(f, params)
    src = cfg["input.file"] or f"random(seed={run.seed})"
    run.csv(
        "besov_norm.csv",
        ["source[input]", "s[smoothness]", "q[spatial exponent]", "r[block exponent]", "profile[partition]",
         "weight[spec]", "besov_norm[B^s_qr value]"],
        [[src, params.s, params.q, params.r, params.profile, cfg["weight"], value]],
    )
    return 0


def cmd_check_ap(run: Run) -> int:
    from .weights import ap_refinement_sweep

    cfg = run.cfg
    params = _params(cfg)
    grid = _grid(cfg)
    reports = ap_refinement_sweep(params.weight, cfg["ap.p"], grid.periods[0], cfg["ap.base"], cfg["ap.levels"],
                                  grid.n)
    rows = [[j, cfg["ap.base"] * 2**j, r.min_scale, r.cube_count, r.estimate] for j, r in enumerate(reports)]
    run.csv("ap_sweep.csv",
            ["level[index]", "points[per axis]", "min_scale[cube side]", "cubes[count]", "ap_estimate[A_p constant]"],
            rows)
    return 0


def _multiplier_symbols(cfg: RunConfig, rng_for):
    from .multipliers import random_mikhlin_symbol

    d = cfg["multiplier.d"]
    eye = np.eye(d)
    out = []
    for item in cfg["multiplier.symbols"]:
        kind, _, arg = item.partition(":")
        if kind == "random":
            for i in range(int(arg or 1)):
                out.append((f"random{i}", random_mikhlin_symbol(len(cfg["grid.sizes"]), d, rng_for(100 + i))))
        elif kind == "xi":
            out.append(("xi", lambda xi: xi[..., 0][..., None, None] * eye))
        elif kind == "bessel":
            a = float(arg or 1)
            out.append((f"bessel{a!r}", lambda xi, a=a: (1 + np.sum(xi**2, -1))[..., None, None] ** (-a / 2) * eye))
        elif kind == "riesz":
            k = int(arg or 0)
            out.append((f"riesz{k}", lambda xi, k=k: (xi[..., k] / np.sqrt(1 + np.sum(xi**2, -1)))[..., None, None]
                        * eye))
        else:
            raise ConfigError(f"multiplier.symbols: unknown symbol kind {kind!r}")
    return out


def cmd_multiplier_check(run: Run) -> int:
    from .multipliers import LqSpace, Symbol, empirical_operator_norm, mikhlin_sweep, multiplier_report

    cfg = run.cfg
    grid = _grid(cfg)
    params = _params(cfg)
    space = LqSpace(cfg["multiplier.space.q"], params.weight)
    l = cfg["multiplier.l"] or grid.n + 1
    c_fit = cfg["multiplier.c_fit"]
    rows = []
    failed = False
    for name, fn in _multiplier_symbols(cfg, run.rng):
        m = Symbol.from_callable(grid, fn)
        rep = multiplier_report(m, space, l, probes=cfg["multiplier.probes"], seed=run.seed, threads=run.threads)
        emp_b = empirical_operator_norm(m, params, cfg["multiplier.probes"], run.seed, run.threads).value
        sweep = mikhlin_sweep(fn, [grid, grid.refine(2)], l)
        ok = sweep.compliant and max(rep.empirical, emp_b) <= c_fit * rep.surrogate
        failed |= name != "xi" and not ok
        rows.append([name, rep.mikhlin, rep.besov, rep.empirical, emp_b, max(rep.empirical, emp_b) / rep.surrogate,
                     sweep.compliant, ok])
    run.csv("multipliers.csv",
            ["symbol[name]", "mikhlin[constant]", "besov_functional[localized]", "empirical_lq[operator norm]",
             "empirical_besov[operator norm]", "ratio[empirical/min surrogate]", "mikhlin_compliant[flag]",
             "pass[ratio<=c_fit and compliant]"],
            rows)
    return 1 if failed else 0


def cmd_embed_check(run: Run) -> int:
    from .embedding import EmbeddingSpec, embedding_estimate_check, symbol_sup, xi_samples
    from .grid import random_band_limited
    from .littlewood_paley import build_partition

    cfg = run.cfg
    grid = _grid(cfg)
    A = _operator(cfg)
    params = _params(cfg)
    diag = cfg["embed.diagnostic"]
    t_vals, h_vals = cfg["embed.t"], cfg["embed.h"]
    spec = EmbeddingSpec(cfg["embed.l"], cfg["embed.alpha"], t_vals[0], h_vals[0], cfg["embed.mu"])
    xi = xi_samples(grid.nyquist_radius, 257 if grid.n == 1 else 33, grid.n)
    sup = symbol_sup(A, spec, xi, t_vals, h_vals, diag)
    rows = [[t, h, spec.mu, sup.table[i, j], "", ""] for i, t in enumerate(t_vals) for j, h in enumerate(h_vals)]
    part = build_partition(grid, params.profile)
    ratios = []
    for i in range(cfg["embed.functions"]):
        u = random_band_limited(grid, A.dim, 2.0**part.k_max, run.rng(10 + i), A.fiber_p, decay=float(i % 3))
        rep = embedding_estimate_check(u, A, spec, params, h_vals, part, diag)
        ratios.append(rep.ratio)
    rows.append(["summary", "", spec.mu, sup.value, max(ratios), float(np.median(ratios))])
    run.csv("embedding.csv",
            ["t[scaling]", "h[parameter]", "mu[exponent]", "symbol_sup[sampled norm]", "fitted_constant[max lhs/rhs]",
             "median_ratio[lhs/rhs]"],
            rows)
    return 0


def _elliptic_problem(run: Run, grid):
    from .elliptic import EllipticProblem

    cfg = run.cfg
    A = _operator(cfg)
    return EllipticProblem(grid, _symbol(cfg, grid.n), A, cfg["lambda"], tuple(_lower(cfg, grid, A.dim)),
                           _params(cfg))


def cmd_solve_elliptic(run: Run) -> int:
    from .bsgf import write_grid_function
    from .elliptic import solve_full

    grid = _grid(run.cfg)
    prob = _elliptic_problem(run, grid)
    f = _rhs(run, grid, prob.operator.dim)
    u, rep = solve_full(prob, f, seed=run.seed)
    write_grid_function(u, run.out / "solution.bsgf")
    run.files.append("solution.bsgf")
    keys = sorted(rep.norms)
    run.csv("solve_report.csv",
            ["residual[relative l2]", "coercive_ratio[top terms/f]", "iterations[neumann]", "contraction[factor]"]
            + [f"{k}[Besov norm]" for k in keys],
            [[rep.residual, rep.coercive_ratio, rep.iterations, rep.contraction] + [rep.norms[k] for k in keys]])
    return 0


def _table_rows(tab):
    return [[lam] + list(row) for lam, row in zip(tab.lams, tab.values)]


def cmd_sweep_resolvent(run: Run) -> int:
    from .elliptic import resolvent_sweep

    cfg = run.cfg
    grid = _grid(cfg)
    prob = _elliptic_problem(run, grid)
    tab = resolvent_sweep(prob, cfg["sweep.lambdas"], cfg["sweep.probes"], run.seed)
    run.csv("resolvent.csv", ["lambda[spectral parameter]"] + [f"{c}[scaled ratio]" for c in tab.columns],
            _table_rows(tab))
    var = tab.column_variation()
    run.csv("resolvent_variation.csv", ["column[name]", "variation[max/min over lambda]"],
            [[k, v] for k, v in var.items()])
    return 0


def _forcing(run: Run, grid, d: int, steps: int):
    from .bsgf import read_grid_function
    from .grid import random_band_limited
    from .littlewood_paley import build_partition

    cfg = run.cfg
    spec = cfg["forcing"]
    if spec.startswith("constant:"):
        f = read_grid_function(cfg.path(spec[9:]))
        if f.grid != grid or f.fiber_dim != d:
            raise ConfigError("forcing: file does not match the grid and operator size")
        return np.broadcast_to(f.values, (steps,) + f.values.shape)
    if spec.startswith("dir:"):
        files = sorted(cfg.path(spec[4:]).glob("*.bsgf"))
        if len(files) != steps:
            raise ConfigError(f"forcing: directory holds {len(files)} BSGF files, time.steps = {steps}")
        return np.stack([read_grid_function(p).values for p in files])
    cutoff = 2.0 ** build_partition(grid, cfg["partition.profile"]).k_max
    return np.stack([random_band_limited(grid, d, cutoff, run.rng(200 + m)).values for m in range(steps)])


def _parabolic_outputs(run: Run, u, rep):
    from .bsgf import write_grid_function
    from .grid import GridFunction

    grid = _grid(run.cfg)
    steps_dir = run.out / "steps"
    steps_dir.mkdir(exist_ok=True)
    for m, vals in enumerate(u):
        write_grid_function(GridFunction(grid, vals), steps_dir / f"u_{m:05d}.bsgf")
    run.files.append("steps/")
    keys = sorted(rep.norms)
    run.csv("parabolic_report.csv",
            ["residual[relative l2]", "ratio[max regularity]", "dt[time step]", "steps[count]"]
            + [f"{'du_dt' if k == 'dt' else k}[time-discrete Besov norm]" for k in keys],
            [[rep.residual, rep.ratio, rep.dt, rep.steps] + [rep.norms[k] for k in keys]])


def cmd_solve_parabolic(run: Run) -> int:
    from .parabolic import ParabolicProblem, solve_cauchy

    cfg = run.cfg
    grid = _grid(cfg)
    prob = _elliptic_problem(run, grid).with_lambda(0.0)
    pp = ParabolicProblem(prob, cfg["time.dt"], cfg["time.steps"], cfg["time.phi"])
    F = _forcing(run, grid, prob.operator.dim, pp.steps)
    u, rep = solve_cauchy(pp, F)
    _parabolic_outputs(run, u, rep)
    return 0


def _system(run: Run, grid):
    from .bsgf import read_grid_function, read_matrix
    from .systems import TruncatedSystem

    cfg = run.cfg
    d = cfg["system.d"]
    couplings = {}
    for alpha, spec in sorted(cfg.couplings.items()):
        kind, _, rest = spec.partition(":")
        if kind == "tridiag":
            couplings[alpha] = float(rest) * (np.eye(d, k=1) + np.eye(d, k=-1))
            continue
        path = cfg.path(rest.strip())
        try:
            couplings[alpha] = read_matrix(path)
        except FormatError:
            f = read_grid_function(path)
            if f.grid != grid or f.fiber_dim != d * d:
                raise ConfigError(f"system.coupling.{'_'.join(map(str, alpha))}: table must have {d * d} channels")
            couplings[alpha] = f.values.reshape(grid.sizes + (d, d))
    if cfg["system.diagonal"].startswith("table:"):
        tab = read_grid_function(cfg.path(cfg["system.diagonal"][6:]))
        if tab.grid != grid or tab.fiber_dim != d:
            raise ConfigError(f"system.diagonal: table must live on the grid with {d} channels")
        return TruncatedSystem(grid, tab.values, couplings, cfg["system.p"])
    amp = cfg["system.modulation"]
    mod = (lambda *x: amp * np.sin(2 * np.pi * x[0] / grid.periods[0])) if amp else None
    return TruncatedSystem.pow2(grid, d, cfg["system.sigma"], mod, couplings, cfg["system.p"])


def cmd_solve_system(run: Run) -> int:
    from .bsgf import write_grid_function
    from .elliptic import solve_full
    from .grid import GridFunction
    from .systems import build_system_problem, lpq_norm

    cfg = run.cfg
    grid = _grid(cfg)
    system = _system(run, grid)
    symbol = _symbol(cfg, grid.n)
    params = _params(cfg)
    prob = build_system_problem(system, symbol, cfg["lambda"], params)
    f = _rhs(run, grid, system.d)
    f = GridFunction(grid, f.values, system.p)
    u, rep = solve_full(prob, f, seed=run.seed)
    write_grid_function(u, run.out / "solution.bsgf")
    run.files.append("solution.bsgf")
    c1, c2 = system.comparability()
    run.csv("system_report.csv",
            ["d[channels]", "C1[min comparability]", "C2[max comparability]", "coupling_bound[surrogate sum]",
             "residual[relative l2]", "iterations[neumann]", "contraction[factor]", "lpq_norm[Besov l_p(Q)]",
             "f_norm[Besov l_p]"],
            [[system.d, c1, c2, system.coupling_bound(symbol.order), rep.residual, rep.iterations, rep.contraction,
              lpq_norm(u, system, params), rep.norms["f"]]])
    return 0


def cmd_sweep_system(run: Run) -> int:
    from .systems import system_resolvent_sweep

    cfg = run.cfg
    grid = _grid(cfg)
    system = _system(run, grid)
    tab = system_resolvent_sweep(system, _symbol(cfg, grid.n), cfg["sweep.lambdas"], _params(cfg),
                                 cfg["sweep.probes"], run.seed)
    run.csv("system_resolvent.csv", ["lambda[spectral parameter]"] + [f"{c}[scaled ratio]" for c in tab.columns],
            _table_rows(tab))
    return 0


def cmd_acceptance(run: Run) -> int:
    from .acceptance import run_acceptance

    results = run_acceptance(seed=run.seed, threads=run.threads, only=run.only, log=print)
    run.csv("acceptance.csv", ["criterion[index]", "name[label]", "passed[flag]", "detail[summary]"],
            [[r.index, r.name, r.passed, r.detail] for r in results])
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {
    "besov-norm": (cmd_besov_norm, "weighted Besov norm of a BSGF file or a seeded random function"),
    "check-ap": (cmd_check_ap, "A_p constant estimates under grid refinement"),
    "multiplier-check": (cmd_multiplier_check, "multiplier surrogates against empirical operator norms"),
    "embed-check": (cmd_embed_check, "symbol supremum lattice and embedding estimate ratios"),
    "solve-elliptic": (cmd_solve_elliptic, "solve the elliptic problem and report coercive norms"),
    "sweep-resolvent": (cmd_sweep_resolvent, "resolvent uniformity table over lambda"),
    "solve-parabolic": (cmd_solve_parabolic, "solve the Cauchy problem with per-step output"),
    "solve-system": (cmd_solve_system, "solve a truncated system"),
    "sweep-system": (cmd_sweep_system, "resolvent uniformity table for a truncated system"),
    "acceptance": (cmd_acceptance, "run the acceptance criteria"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="config file (sectioned key = value)")
    common.add_argument("--seed", type=int, help="seed (overrides the config value)")
    common.add_argument("--threads", type=int, default=1, help="worker cap for probe loops")
    common.add_argument("--out", type=Path, default=Path("besovkit-out"), help="output directory")
    parser = argparse.ArgumentParser(prog="besovkit", description="Weighted Besov analysis and spectral solvers.")
    parser.add_argument("--version", action="version", version=f"besovkit {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == "acceptance":
            p.add_argument("--only", type=str, help="comma-separated criterion numbers")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if args.seed is not None and args.seed < 0:
        parser.print_usage(sys.stderr)
        print("besovkit: error: --seed must be nonnegative", file=sys.stderr)
        return 2
    if args.threads < 1:
        parser.print_usage(sys.stderr)
        print("besovkit: error: --threads must be >= 1", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    try:
        cfg = parse_config(args.config) if args.config else parse_config_text("", Path.cwd())
        for w in cfg.warnings:
            print(f"warning: {w}", file=sys.stderr)
        seed = args.seed if args.seed is not None else cfg["seed"]
        args.out.mkdir(parents=True, exist_ok=True)
        only = None
        if getattr(args, "only", None):
            try:
                only = tuple(int(s) for s in args.only.split(","))
            except ValueError:
                print("besovkit: error: --only takes comma-separated integers", file=sys.stderr)
                return 2
        run = Run(args.command, cfg, seed, args.threads, args.out, only)
        status = COMMANDS[args.command][0](run)
        run.manifest(status, time.perf_counter() - t0)
        return status
    except ConfigError as exc:
        for issue in exc.issues:
            print(f"config error: {issue}", file=sys.stderr)
        return exc.exit_code
    except BesovKitError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
