"""Command-line driver: ``switchreg <subcommand> [--config PATH] [--out DIR] [--n INT] [--quiet]``.

A failed numerical check exits with status 1 and a configuration error with
status 2; otherwise the status is 0.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import closedform
from .expr import ExpressionEvalError, ExpressionSyntaxError, parse
from .grid import GridSpec
from .io import write_json
from .obstacle import ConvergenceError, EllipticConfig, InfeasibleObstaclesError
from .regularity import ClassifyThresholds, classify_point
from .switching import (
    ContinuationError,
    PenaltyFunction,
    ProblemSpec,
    SolverConfig,
    construct_nonminimal,
    continuation_solve,
    epsilon_sweep,
    example2_spec,
    read_pair_csv,
    residual_report,
    solve_minimal,
    validate_spec,
    write_pair_csv,
)

log = logging.getLogger("switchreg")

METHOD_CHOICES = ("minimal", "penalized", "both")
DEFAULT_SCHEDULE = tuple(2.0**-k for k in range(0, 11))


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemSection:
    f1: str = "0"
    f2: str = "0"
    psi1: str = "0"
    psi2: str = "0"
    g1: str = "0"
    g2: str = "0"
    xmin: float = -1.0
    xmax: float = 1.0
    ymin: float = -1.0
    ymax: float = 1.0
    nx: int = 65
    ny: int = 65


@dataclass(frozen=True)
class SolverSection:
    method: str = "minimal"
    eps_schedule: tuple = DEFAULT_SCHEDULE
    tol: float = 1e-10
    comp_tol: float = 1e-6
    omega: float = 1.8
    max_newton: int = 100
    eta: float = 1.0


@dataclass(frozen=True)
class RegularitySection:
    points: tuple = ((0.0, 0.0),)
    radii: tuple | None = None
    exponent_margin: float = 0.1
    s_r2_min: float = 0.95
    a_r2_min: float = 0.9
    a_tol: float | None = None
    bmo_constant: float = 10.0


@dataclass(frozen=True)
class OutputSection:
    dir: str = "out"
    formats: tuple = ("csv", "json")


@dataclass(frozen=True)
class NonminimalSection:
    psi: str = "0"
    M: float = 1.0
    q: tuple = ("0", "1")
    g1: str = "0"


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSection
    solver: SolverSection = field(default_factory=SolverSection)
    regularity: RegularitySection = field(default_factory=RegularitySection)
    output: OutputSection = field(default_factory=OutputSection)
    nonminimal: NonminimalSection = field(default_factory=NonminimalSection)

    def to_dict(self) -> dict:
        return asdict(self)

    def grid(self) -> GridSpec:
        p = self.problem
        return GridSpec(p.xmin, p.xmax, p.ymin, p.ymax, p.nx, p.ny)

    def problem_spec(self) -> ProblemSpec:
        p = self.problem
        return ProblemSpec(p.f1, p.f2, p.psi1, p.psi2, p.g1, p.g2, grid=self.grid())

    def solver_config(self) -> SolverConfig:
        s = self.solver
        return SolverConfig(tol=s.tol, max_newton=s.max_newton, penalty=PenaltyFunction(s.eta),
                            elliptic=EllipticConfig(tol=s.tol, comp_tol=s.comp_tol, omega=s.omega))

    def thresholds(self) -> ClassifyThresholds:
        r = self.regularity
        return ClassifyThresholds(r.exponent_margin, r.s_r2_min, r.a_r2_min, r.a_tol, r.bmo_constant)

    def with_n(self, n: int | None) -> "RunConfig":
        if n is None:
            return self
        return replace(self, problem=replace(self.problem, nx=n, ny=n))


_SECTIONS = {
    "problem": ProblemSection, "solver": SolverSection, "regularity": RegularitySection,
    "output": OutputSection, "nonminimal": NonminimalSection,
}
_EXPRESSION_KEYS = {("problem", k) for k in ("f1", "f2", "psi1", "psi2", "g1", "g2")} | {
    ("nonminimal", "psi"), ("nonminimal", "g1")}


def _number(name, v, kind=float):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {v!r}")
    if kind is int:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(f"{name}: expected an integer, got {v!r}")
        return int(v)
    if not math.isfinite(v):
        raise ConfigError(f"{name}: must be finite")
    return float(v)


def _expression(name, v):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = repr(float(v))
    if not isinstance(v, str):
        raise ConfigError(f"{name}: expected an expression string, got {v!r}")
    try:
        parse(v)
    except ExpressionSyntaxError as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    return v


def _convert(section: str, key: str, value, default):
    name = f"{section}.{key}"
    if (section, key) in _EXPRESSION_KEYS:
        return _expression(name, value)
    if section == "nonminimal" and key == "q":
        vals = value if isinstance(value, list) else [value]
        return tuple(_expression(name, v) for v in vals)
    if key == "eps_schedule":
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{name}: expected a non-empty list")
        sched = tuple(_number(name, v) for v in value)
        if any(e <= 0 for e in sched):
            raise ConfigError(f"{name}: entries must be positive")
        if any(b >= a for a, b in zip(sched, sched[1:])):
            raise ConfigError(f"{name}: schedule not decreasing")
        return sched
    if key == "points":
        if not isinstance(value, list) or not all(isinstance(p, list) and len(p) == 2 for p in value):
            raise ConfigError(f"{name}: expected a list of [x, y] pairs")
        return tuple((_number(name, p[0]), _number(name, p[1])) for p in value)
    if key == "radii":
        if not isinstance(value, list) or len(value) < 4:
            raise ConfigError(f"{name}: expected a list of at least 4 radii")
        radii = tuple(_number(name, v) for v in value)
        if any(b >= a for a, b in zip(radii, radii[1:])) or radii[-1] <= 0:
            raise ConfigError(f"{name}: radii must be positive and strictly decreasing")
        return radii
    if key == "formats":
        vals = tuple(value) if isinstance(value, list) else (value,)
        if not set(vals) <= {"csv", "json"}:
            raise ConfigError(f"{name}: formats must be among csv, json")
        return vals
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{name}: expected a string")
        return value
    if key in ("nx", "ny", "max_newton"):
        return _number(name, value, int)
    return _number(name, value)


def _build(raw: dict) -> RunConfig:
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    if "problem" not in raw:
        raise ConfigError("missing required section [problem]")
    parts = {}
    for sec, cls in _SECTIONS.items():
        table = raw.get(sec, {})
        if not isinstance(table, dict):
            raise ConfigError(f"{sec}: expected a table")
        known = {f.name: f for f in fields(cls)}
        defaults = cls()
        kw = {}
        for key, value in table.items():
            if key not in known:
                raise ConfigError(f"{sec}.{key}: unknown key")
            kw[key] = _convert(sec, key, value, getattr(defaults, key))
        parts[sec] = cls(**kw)
    cfg = RunConfig(**parts)
    p, s = cfg.problem, cfg.solver
    if p.nx < 3 or p.ny < 3:
        raise ConfigError("problem.nx/ny: need at least 3 nodes per direction")
    if not (p.xmin < p.xmax and p.ymin < p.ymax):
        raise ConfigError("problem: empty domain rectangle")
    if s.method not in METHOD_CHOICES:
        raise ConfigError(f"solver.method: must be one of {sorted(METHOD_CHOICES)}, got {s.method!r}")
    if not 0.0 < s.omega < 2.0:
        raise ConfigError("solver.omega: must lie in (0, 2)")
    if s.tol <= 0 or s.comp_tol <= 0 or s.eta <= 0:
        raise ConfigError("solver: tolerances and eta must be positive")
    if s.max_newton < 1:
        raise ConfigError("solver.max_newton: must be at least 1")
    return cfg


def load_config(path) -> RunConfig:
    """Read and validate a TOML run configuration; missing optional values take defaults."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return _build(raw)


def config_from_dict(raw: dict) -> RunConfig:
    return _build(raw)


# --- helpers -----------------------------------------------------------------

def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SWITCHREG_THREADS", "1")))
    except ValueError:
        return 1


class _Run:
    def __init__(self, args, cfg: RunConfig | None):
        self.args = args
        self.cfg = cfg
        out = args.out or (cfg.output.dir if cfg else "out")
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.formats = cfg.output.formats if cfg else ("csv", "json")

    def say(self, msg: str) -> None:
        if not self.args.quiet:
            print(msg)

    def json(self, name: str, payload: dict) -> None:
        if "json" in self.formats:
            write_json(self.out / name, payload)

    def csv(self, name: str, spec, pair) -> None:
        if "csv" in self.formats:
            write_pair_csv(spec, pair, self.out / name)


def _penalized_tolerance(spec, schedule) -> float:
    return spec.tol_sys + 10.0 * schedule[-1] * spec.scale


def _solve(run: _Run, spec, method: str):
    cfg = run.cfg
    pairs = {}
    if method in ("minimal", "both"):
        pairs["minimal"] = solve_minimal(spec, cfg.solver_config())
    if method in ("penalized", "both"):
        pairs["penalized"] = continuation_solve(spec, cfg.solver.eps_schedule, cfg.solver_config())
    return pairs


def _validation_failure(run: _Run, spec, name: str) -> int | None:
    report = validate_spec(spec)
    if report.passed:
        return None
    for m in report.messages():
        print(f"validation failed: {m}", file=sys.stderr)
    run.json(name, {"config": run.cfg.to_dict(), "validation": report.to_dict(), "passed": False})
    return 1


# --- subcommands ---------------------------------------------------------------

def cmd_solve(run: _Run) -> int:
    cfg = run.cfg
    spec = cfg.problem_spec()
    bad = _validation_failure(run, spec, "residuals.json")
    if bad is not None:
        return bad
    pairs = _solve(run, spec, cfg.solver.method)
    results = {}
    ok = True
    for name, pair in pairs.items():
        rep = residual_report(spec, pair).to_dict()
        if name == "minimal":
            passed = rep["minimal_ok"]
        else:
            tol = _penalized_tolerance(spec, cfg.solver.eps_schedule)
            rep["penalized_tolerance"] = tol
            passed = max(rep["eq1_max"], rep["eq2_max"]) <= tol
        rep["passed"] = bool(passed)
        rep["iterations"] = list(pair.iterations)
        results[name] = rep
        ok &= bool(passed)
        run.csv(f"solution_{name}.csv", spec, pair)
        run.say(f"{name}: eq1={rep['eq1_max']:.3e} eq2={rep['eq2_max']:.3e} eq3={rep['eq3_max']:.3e} "
                f"{'PASS' if passed else 'FAIL'}")
    payload = {"config": cfg.to_dict(), "validation": validate_spec(spec).to_dict(), "results": results,
               "passed": ok}
    if len(pairs) == 2:
        diff = pairs["minimal"].max_diff(pairs["penalized"])
        payload["minimal_vs_penalized_max_diff"] = diff
        run.say(f"max |minimal - penalized| = {diff:.3e}")
    run.json("residuals.json", payload)
    return 0 if ok else 1


def cmd_residuals(run: _Run) -> int:
    cfg = run.cfg
    spec = cfg.problem_spec()
    pair = read_pair_csv(run.args.solution, spec)
    rep = residual_report(spec, pair).to_dict()
    run.json("residuals.json", {"config": cfg.to_dict(), "solution": str(run.args.solution), "residuals": rep,
                                "passed": rep["system_ok"]})
    run.say(f"eq1={rep['eq1_max']:.3e} eq2={rep['eq2_max']:.3e} eq3={rep['eq3_max']:.3e} "
            f"tol={rep['tol_sys']:.3e} {'PASS' if rep['system_ok'] else 'FAIL'}")
    return 0 if rep["system_ok"] else 1


def cmd_regularity(run: _Run) -> int:
    cfg = run.cfg
    spec = cfg.problem_spec()
    if run.args.solution:
        pair = read_pair_csv(run.args.solution, spec)
    else:
        bad = _validation_failure(run, spec, "regularity.json")
        if bad is not None:
            return bad
        pair = solve_minimal(spec, cfg.solver_config())
    radii = cfg.regularity.radii
    th = cfg.thresholds()

    def one(point):
        return classify_point(spec, pair, point, radii, th)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        reports = list(pool.map(one, cfg.regularity.points))
    ok = all(r.bmo_ok for r in reports)
    for r in reports:
        run.say(f"{r.center}: {r.classification} (S exponent {r.S_exponent}, log coefficient {r.A_log_coefficient})")
    run.json("regularity.json", {"config": cfg.to_dict(), "reports": [r.to_dict() for r in reports], "passed": ok})
    return 0 if ok else 1


def cmd_counterexample(run: _Run) -> int:
    n = run.args.n or 257
    grid = GridSpec.square(n)
    h = grid.h
    tol = 100.0 * h * h * (1.0 + abs(math.log(h)))
    rho = run.args.rho if run.args.rho is not None else max(0.05, 4.0 * h)
    ver = closedform.verify_counterexample(grid, rho, tol)
    spec = closedform.counterexample_spec(n)
    pair = solve_minimal(spec)
    oracle = closedform.oracle_pair(grid)
    rep = residual_report(spec, pair).to_dict()
    err = pair.max_diff(oracle)
    ok = bool(ver["passed"] and rep["minimal_ok"])
    run.csv("counterexample_minimal.csv", spec, pair)
    run.csv("counterexample_oracle.csv", spec, oracle)
    run.json("counterexample.json", {
        "config": {"command": "counterexample", "n": n, "rho_excl": rho, "tol": tol},
        "n": n, "rho_excl": rho, "tol": tol, "oracle_check": ver, "minimal_residuals": rep,
        "minimal_vs_oracle_max_error": err, "passed": ok,
    })
    run.say(f"oracle residual check {'PASS' if ver['passed'] else 'FAIL'} "
            f"(eq1 {ver['eq1_max']:.3e}, eq2 {ver['eq2_max']:.3e}, tol {tol:.3e})")
    run.say(f"minimal solve: residuals {'PASS' if rep['minimal_ok'] else 'FAIL'}, max error vs oracle {err:.3e}")
    return 0 if ok else 1


def cmd_sweep_eps(run: _Run) -> int:
    cfg = run.cfg
    spec = cfg.problem_spec()
    bad = _validation_failure(run, spec, "sweep.json")
    if bad is not None:
        return bad
    sweep = epsilon_sweep(spec, cfg.solver.eps_schedule, cfg.solver_config())
    slope, r2 = sweep["slope"], sweep["r2"]
    ok = slope is not None and 0.8 <= slope <= 1.2 and r2 >= 0.95
    run.json("sweep.json", {"config": cfg.to_dict(), "rows": sweep["rows"], "slope": slope, "r2": r2,
                            "passed": bool(ok)})
    for row in sweep["rows"]:
        run.say(f"eps={row['eps']:.6g} violation={row['violation']:.6e} newton={row['newton_iterations']}")
    run.say(f"slope={slope} r2={r2} {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_nonminimal(run: _Run) -> int:
    cfg = run.cfg
    nm = cfg.nonminimal
    grid = cfg.grid()
    spec = example2_spec(nm.psi, nm.M, nm.g1, grid)
    bad = _validation_failure(run, spec, "nonminimal.json")
    if bad is not None:
        return bad
    scfg = cfg.solver_config()
    minimal = solve_minimal(spec, scfg)
    tol = 1e-6 * spec.scale
    members = []
    ok = True
    for k, q in enumerate(nm.q):
        pair = construct_nonminimal(nm.psi, nm.M, q, nm.g1, grid, scfg)
        rep = residual_report(spec, pair).to_dict()
        below = bool(np.all(minimal.u1.values <= pair.u1.values + tol)
                     and np.all(minimal.u2.values <= pair.u2.values + tol))
        ok &= below
        members.append({"q": q, "residuals": rep, "minimal_below": below,
                        "third_equation_violation": rep["eq3_max"],
                        "distance_from_minimal": pair.max_diff(minimal)})
        run.csv(f"nonminimal_{k}.csv", spec, pair)
        run.say(f"q={q}: third-equation violation {rep['eq3_max']:.3e}, minimal below: {below}")
    run.csv("nonminimal_minimal.csv", spec, minimal)
    run.json("nonminimal.json", {"config": cfg.to_dict(), "minimal_residuals": residual_report(spec, minimal).to_dict(),
                                 "members": members, "tolerance": tol, "passed": ok})
    return 0 if ok else 1


COMMANDS = {
    "solve": cmd_solve,
    "residuals": cmd_residuals,
    "regularity": cmd_regularity,
    "counterexample": cmd_counterexample,
    "sweep-eps": cmd_sweep_eps,
    "nonminimal": cmd_nonminimal,
}
NEEDS_CONFIG = {"solve", "residuals", "regularity", "sweep-eps", "nonminimal"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--out", type=Path, help="output directory (default: [output].dir or ./out)")
    common.add_argument("--n", type=int, help="override the grid size (nx = ny = n)")
    common.add_argument("--quiet", action="store_true", help="suppress the console summary")
    parser = argparse.ArgumentParser(prog="switchreg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve and write solution CSV plus residual JSON")
    p = sub.add_parser("residuals", parents=[common], help="residual report for a solution CSV")
    p.add_argument("--solution", type=Path, required=True)
    p = sub.add_parser("regularity", parents=[common], help="classify probe points")
    p.add_argument("--solution", type=Path, help="use this solution CSV instead of solving")
    p = sub.add_parser("counterexample", parents=[common], help="check the closed-form counterexample")
    p.add_argument("--rho", type=float, help="exclusion radius around the origin (default max(0.05, 4h))")
    sub.add_parser("sweep-eps", parents=[common], help="constraint violation against the penalty parameter")
    sub.add_parser("nonminimal", parents=[common], help="non-unique family and the minimality comparison")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = None
        if args.command in NEEDS_CONFIG:
            if args.config is None:
                raise ConfigError(f"{args.command} requires --config")
            cfg = load_config(args.config).with_n(args.n)
        elif args.config is not None:
            cfg = load_config(args.config)
        if args.n is not None and args.n < 3:
            raise ConfigError("--n must be at least 3")
        run = _Run(args, cfg)
        return COMMANDS[args.command](run)
    except (ConvergenceError, ContinuationError, InfeasibleObstaclesError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ExpressionSyntaxError, ExpressionEvalError, ValueError) as exc:
        # remaining ValueErrors are input problems: grid mismatch, violated preconditions
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
