"""Command line: ``nowpac solve|bench|sweep``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from typing import List, Optional

from .bench.problems import get_problem, problem_names
from .bench.runner import (BenchmarkCase, NoiseSpec, aggregate, default_suite, emit_table,
                           noise_sweep, run_benchmark)
from .blackbox import NoisyProblem
from .core import SolverConfig, optimize, write_history
from .errors import ConfigRangeError, NowpacError, UnknownProblemId

EXIT_OK, EXIT_SOLVER, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclasses.dataclass
class CliInvocation:
    subcommand: str
    problem: Optional[str]
    config: SolverConfig
    output_dir: Optional[str]
    format: str = "csv"
    noise_f: List[float] = dataclasses.field(default_factory=lambda: [0.0])
    noise_c: List[float] = dataclasses.field(default_factory=lambda: [0.0])
    replicates: int = 1
    sc: Optional[float] = None


_FIELDS = {f.name: f for f in dataclasses.fields(SolverConfig)}


def _coerce(key: str, text: str, flag: str):
    if key not in _FIELDS:
        raise UsageError(f"{flag}: unknown parameter {key!r} (known: {', '.join(_FIELDS)})")
    kind = type(getattr(SolverConfig(), key))
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            value = float(text)
            if not value.is_integer():
                raise ValueError(text)
            return int(value)
        return float(text)
    except ValueError:
        raise UsageError(f"{flag}: {key} expects a {kind.__name__}, got {text!r}") from None


def read_config_file(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"--config: {path}:{lineno}: expected 'key = value'")
        key, value = (t.strip() for t in line.split("=", 1))
        out[key] = _coerce(key, value, f"--config {path}:{lineno}")
    return out


def _floats(text: str, flag: str) -> List[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{flag}: expected a number or comma-separated list, got {text!r}") from None
    if not vals or any(v < 0 for v in vals):
        raise UsageError(f"{flag}: noise levels must be nonnegative")
    return vals


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a solver parameter (repeatable)")
    common.add_argument("--config", metavar="FILE", help="file of 'key = value' solver parameters")
    common.add_argument("--out", metavar="DIR", help="directory for history files (default: $NOWPAC_OUT)")
    common.add_argument("--format", choices=("csv", "markdown"), default="csv")
    common.add_argument("--seed", type=int, help="random seed (noise draws)")
    common.add_argument("--noise-f", default="0", metavar="X[,X..]", help="objective noise half-width(s)")
    common.add_argument("--noise-c", default="0", metavar="X[,X..]", help="constraint noise half-width(s)")
    common.add_argument("--replicates", type=int, default=None)
    common.add_argument("--sc", type=float, help="stopping threshold rho_min for bench/sweep cases")
    common.add_argument("--no-early-termination", action="store_true",
                        help="ignore the noise indicator and run to rho_min")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="nowpac", description="Derivative-free constrained trust-region solver.")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    p = sub.add_parser("solve", parents=[common], help="solve one problem")
    p.add_argument("problem", help=f"one of {', '.join(problem_names())}")
    p = sub.add_parser("bench", parents=[common], help="run the benchmark suite")
    p.add_argument("problem", nargs="?", help="restrict the suite to this problem")
    p = sub.add_parser("sweep", parents=[common], help="noise sweep on one problem")
    p.add_argument("problem", nargs="?", default="rosenbrock")
    return parser


def parse_args(argv: Optional[List[str]] = None) -> CliInvocation:
    ns = _build_parser().parse_args(argv)
    values = {}
    if ns.config:
        values.update(read_config_file(ns.config))
    for item in ns.set:
        if "=" not in item:
            raise UsageError(f"--set: expected KEY=VALUE, got {item!r}")
        key, text = item.split("=", 1)
        values[key.strip()] = _coerce(key.strip(), text, "--set")
    if ns.seed is not None:
        values["seed"] = ns.seed
    if ns.no_early_termination:
        values["early_termination"] = False
    config = dataclasses.replace(SolverConfig(), **values).validate()

    replicates = ns.replicates
    if replicates is None:
        replicates = 100 if ns.subcommand == "sweep" else 1
    if replicates < 1:
        raise UsageError("--replicates: must be at least 1")
    if ns.sc is not None and not ns.sc > 0:
        raise UsageError("--sc: must be positive")
    if ns.verbose:
        logging.basicConfig(level=logging.INFO)
    return CliInvocation(ns.subcommand, ns.problem, config, ns.out or os.environ.get("NOWPAC_OUT"),
                         ns.format, _floats(ns.noise_f, "--noise-f"), _floats(ns.noise_c, "--noise-c"),
                         replicates, ns.sc)


def _solve(inv: CliInvocation, out) -> int:
    base = get_problem(inv.problem)
    df, dc = inv.noise_f[0], inv.noise_c[0]
    problem = NoisyProblem(base, df, dc, inv.config.seed) if (df or dc) else base
    res = optimize(problem, inv.config)
    if inv.output_dir:
        os.makedirs(inv.output_dir, exist_ok=True)
        write_history(res, os.path.join(inv.output_dir, f"{base.name}_{inv.config.rho_min:g}_{inv.config.seed}.hist"))
    out.write(f"x_best={','.join(format(v, '.17g') for v in res.x_best)}\n")
    out.write(f"f_best={res.f_best:.17g}\n")
    out.write(f"n_evals={res.n_evals}\n")
    out.write(f"terminated_by={res.termination_reason}\n")
    return EXIT_OK


def _bench(inv: CliInvocation, out) -> int:
    cases = default_suite()
    if inv.problem:
        name = get_problem(inv.problem).name
        cases = [c for c in cases if c.problem.name == name]
    rows = []
    for case in cases:
        sc = inv.sc if inv.sc is not None else case.sc
        df, dc = inv.noise_f[0], inv.noise_c[0]
        noise = NoiseSpec(df, dc, list(range(inv.config.seed, inv.config.seed + inv.replicates))) if (df or dc) else None
        case = BenchmarkCase(case.problem, sc, noise, inv.replicates)
        rows.append(aggregate(run_benchmark(case, inv.config, inv.output_dir)))
    out.write(emit_table(rows, inv.format))
    return EXIT_OK


def _sweep(inv: CliInvocation, out) -> int:
    problem = get_problem(inv.problem)
    deltas_f = inv.noise_f if any(inv.noise_f) else [1e-2, 1e-3, 1e-4]
    rows = noise_sweep(problem, deltas_f, inv.noise_c, inv.replicates,
                       inv.sc if inv.sc is not None else inv.config.rho_min, inv.config,
                       inv.output_dir, seed0=inv.config.seed)
    out.write(emit_table(rows, inv.format))
    return EXIT_OK


def run(inv: CliInvocation, out=None) -> int:
    out = out or sys.stdout
    handler = {"solve": _solve, "bench": _bench, "sweep": _sweep}[inv.subcommand]
    return handler(inv, out)


def main(argv: Optional[List[str]] = None, out=None, err=None) -> int:
    err = err or sys.stderr
    try:
        inv = parse_args(argv)
        return run(inv, out)
    except (UsageError, ConfigRangeError, UnknownProblemId) as exc:
        msg = exc.args[0] if exc.args else str(exc)
        err.write(f"nowpac: error: {msg}\n")
        return EXIT_USAGE
    except (NowpacError, FloatingPointError) as exc:
        err.write(f"nowpac: solver error: {type(exc).__name__}: {exc}\n")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
