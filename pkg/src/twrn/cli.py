"""Command-line experiment runner.

Commands
--------
solve   one strategy at one rate pair, prints a single table row
sweep   every configured strategy over every configured rate pair
verify  oracle and inequality suites, one report line per check

Examples
--------
  twrn sweep --config configs/symmetric_sweep.conf
  twrn solve --strategy DNC_SUP --lambda1 0.3 --lambda2 0.6 --samples 100000
  twrn verify --seed 7 --checks oracle,static

A run configuration is flat ``key = value`` text; ``#`` starts a comment.
Keys: the ``FadingSpec`` and ``SolverConfig`` field names, ``strategies``
(comma-separated ids, ``popt`` allowed), ``lambdas`` (symmetric sweep values)
and/or ``pairs`` (``l1:l2`` items), and ``output_path``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import logging
import math
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import oracle
from .errors import ConfigurationError, SolverError, TwrnError
from .fading import Distribution, FadingSpec, sample_channels
from .solvers import POPT_CANDIDATES, RateRequirement, SolverConfig, Strategy, pick_optimal, solve

log = logging.getLogger("twrn")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

COLUMNS = ("strategy", "lambda1", "lambda2", "total_energy", "f1", "f2", "f3", "f5", "f6",
           "gamma", "iterations", "converged")
POPT = "POPT"
STRATEGY_IDS = tuple(s.value for s in Strategy) + (POPT,)

_FADING_KEYS = {f.name: f.type for f in dataclasses.fields(FadingSpec)}
_SOLVER_KEYS = {f.name: f.type for f in dataclasses.fields(SolverConfig)}
_INT_KEYS = {"n_samples", "seed", "max_iter"}
_OTHER_KEYS = {"strategies", "lambdas", "pairs", "output_path"}


@dataclass(frozen=True)
class RunConfig:
    fading: FadingSpec = FadingSpec()
    solver: SolverConfig = SolverConfig()
    strategies: tuple = (Strategy.PNC_SUP.value, Strategy.DNC_SUP.value, Strategy.CW_SUP.value, POPT)
    sweep: tuple = ()  # (lambda1, lambda2) pairs in output order
    output_path: Path | None = None

    def __post_init__(self):
        if not self.strategies:
            raise ConfigurationError("strategies", "at least one strategy is required")
        for s in self.strategies:
            if s not in STRATEGY_IDS:
                raise ConfigurationError("strategies", f"unknown strategy {s!r}; choose from {', '.join(STRATEGY_IDS)}")
        if not self.sweep:
            raise ConfigurationError("lambdas", "the sweep needs at least one rate point")
        for l1, l2 in self.sweep:
            RateRequirement(l1, l2)


# -- configuration -----------------------------------------------------------------

def _line_of(text: str, key: str) -> int | None:
    for i, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
            return i
    return None


def _number(key: str, raw: str, text: str):
    try:
        if key in _INT_KEYS:
            return int(raw, 0)
        return float(raw)
    except ValueError:
        where = _line_of(text, key)
        raise ConfigurationError(key, f"{raw!r} is not a number" + (f" (line {where})" if where else "")) from None


def _distribution(raw: str, text: str) -> Distribution:
    try:
        return Distribution(raw)
    except ValueError:
        where = _line_of(text, "distribution")
        choices = ", ".join(d.value for d in Distribution)
        raise ConfigurationError("distribution", f"{raw!r} is not one of {choices}"
                                 + (f" (line {where})" if where else "")) from None


def _floats(key: str, raw: str, text: str):
    return tuple(_number(key, item.strip(), text) for item in raw.split(",") if item.strip())


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse flat ``key = value`` text into a :class:`RunConfig`.

    ``overrides`` (already typed) replace file values; they come from flags.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",),
                                       interpolation=None, strict=True)
    try:
        parser.read_string("[run]\n" + text)
    except configparser.ParsingError as exc:
        lines = ", ".join(str(lineno - 1) for lineno, _ in exc.errors)
        raise ConfigurationError("config", f"cannot parse line(s) {lines}") from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigurationError(exc.option, f"given twice (line {exc.lineno - 1})") from None
    except configparser.Error as exc:
        raise ConfigurationError("config", str(exc)) from None

    raw = dict(parser["run"])
    unknown = set(raw) - set(_FADING_KEYS) - set(_SOLVER_KEYS) - _OTHER_KEYS
    if unknown:
        key = sorted(unknown)[0]
        where = _line_of(text, key)
        raise ConfigurationError(key, "unknown key" + (f" (line {where})" if where else ""))

    fading, solver = {}, {}
    for key, value in raw.items():
        if key in _FADING_KEYS:
            fading[key] = _distribution(value, text) if key == "distribution" else _number(key, value, text)
        elif key in _SOLVER_KEYS:
            solver[key] = _number(key, value, text)

    sweep = [(v, v) for v in _floats("lambdas", raw.get("lambdas", ""), text)]
    for item in (p.strip() for p in raw.get("pairs", "").split(",") if p.strip()):
        parts = item.split(":")
        if len(parts) != 2:
            raise ConfigurationError("pairs", f"expected 'lambda1:lambda2', got {item!r}")
        sweep.append(tuple(_number("pairs", p.strip(), text) for p in parts))

    strategies = tuple(s.strip().upper() for s in raw.get("strategies", "").split(",") if s.strip())
    if "strategies" not in raw:
        strategies = RunConfig.strategies
    output = raw.get("output_path")

    overrides = overrides or {}
    if overrides.get("strategies"):
        strategies = tuple(overrides["strategies"])
    if overrides.get("sweep"):
        sweep = list(overrides["sweep"])
    for key in ("seed", "n_samples"):
        if overrides.get(key) is not None:
            fading[key] = overrides[key]
    if fading.get("distribution") is Distribution.STATIC and "n_samples" not in fading:
        fading["n_samples"] = 1
    return RunConfig(
        fading=FadingSpec(**fading),
        solver=SolverConfig(**solver),
        strategies=strategies,
        sweep=tuple(sweep),
        output_path=Path(overrides["output_path"] or output) if (overrides.get("output_path") or output) else None,
    )


# -- sweep -------------------------------------------------------------------------

def _row(label: str, l1: float, l2: float, sol) -> dict:
    row = {"strategy": label, "lambda1": l1, "lambda2": l2}
    if sol is None:
        row.update({c: math.nan for c in COLUMNS[3:10]})
        row.update(iterations=0, converged=False)
        return row
    row["total_energy"] = sol.total_energy
    for mode in ("1", "2", "3", "5", "6"):
        row[f"f{mode}"] = sol.fractions.get(mode, 0.0)
    row.update(gamma=sol.gamma, iterations=sol.iterations, converged=sol.converged)
    return row


def run_sweep(config: RunConfig) -> tuple[list[dict], int]:
    """Solve every configured strategy at every rate point on one shared sample set.

    Returns the rows in configuration order and the exit code (0 iff every
    solve converged).
    """
    samples = sample_channels(config.fading)
    rows, ok = [], True
    for l1, l2 in config.sweep:
        req = RateRequirement(l1, l2)
        solved = {}

        def get(strategy: Strategy):
            if strategy not in solved:
                try:
                    solved[strategy] = solve(strategy, req, samples, config.solver, strict=False)
                except SolverError as exc:
                    log.error("%s at (%g, %g): %s", strategy.value, l1, l2, exc)
                    solved[strategy] = None
            return solved[strategy]

        for name in config.strategies:
            if name == POPT:
                candidates = [get(s) for s in POPT_CANDIDATES]
                sol = None if any(c is None for c in candidates) else pick_optimal(candidates)
                if sol is not None and not all(c.converged for c in candidates):
                    sol = dataclasses.replace(sol, converged=False)
            else:
                sol = get(Strategy(name))
            row = _row(name, l1, l2, sol)
            ok &= bool(row["converged"])
            rows.append(row)
    return rows, EXIT_OK if ok else EXIT_FAILURE


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(rows, stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_format(row[c]) for c in COLUMNS])


# -- verify ------------------------------------------------------------------------

CHECK_GROUPS = ("oracle", "lemma3", "lemma4", "static")


def _seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([master, index]).generate_state(1, np.uint64)[0])


def run_verify(master_seed: int = 0, lemma_trials: int = 100_000, oracle_trials: int = 1000,
               checks=CHECK_GROUPS, grid: oracle.GridSpec = oracle.GridSpec(), out=None):
    """Run the oracle suites and print one report line per check.

    Returns ``(results, exit_code)``.
    """
    out = out or sys.stdout
    if lemma_trials < 1 or oracle_trials < 1:
        raise ConfigurationError("trials", "trial counts must be positive")
    unknown = set(checks) - set(CHECK_GROUPS)
    if unknown or not checks:
        raise ConfigurationError("checks", f"choose from {', '.join(CHECK_GROUPS)}")
    results = []
    if "oracle" in checks:
        for i, name in enumerate(oracle.ALLOCATORS):
            results.append(oracle.allocator_agreement(name, oracle_trials, _seed(master_seed, i), grid=grid))
            print(results[-1].line(), file=out, flush=True)
    if "lemma3" in checks:
        results.append(oracle.lemma3_sweep(lemma_trials, _seed(master_seed, 10)))
        print(results[-1].line(), file=out, flush=True)
    if "lemma4" in checks:
        results.append(oracle.lemma4_sweep(lemma_trials, _seed(master_seed, 11)))
        r = results[-1]
        print(r.line(), file=out, flush=True)
        print(f"      failures by proof case {r.details['failures_by_case']} "
              f"of trials by case {r.details['trials_by_case']}", file=out)
    if "static" in checks:
        results.append(oracle.static_matrix(grid=grid))
        print(results[-1].line(), file=out, flush=True)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed"
          + (f"; failed: {', '.join(failed)}" if failed else ""), file=out)
    return results, EXIT_FAILURE if failed else EXIT_OK


# -- entry point -------------------------------------------------------------------

def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twrn", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="run configuration file")
    common.add_argument("--seed", type=_u64, help="overrides the configured seed")
    common.add_argument("--samples", type=int, help="overrides n_samples")

    p = sub.add_parser("solve", parents=[common], help="one strategy at one rate pair")
    p.add_argument("--strategy", required=True, type=str.upper, choices=STRATEGY_IDS)
    p.add_argument("--lambda1", type=float, required=True)
    p.add_argument("--lambda2", type=float, required=True)

    p = sub.add_parser("sweep", parents=[common], help="all configured strategies and rate points")
    p.add_argument("--output", type=Path, help="overrides output_path ('-' for stdout)")

    p = sub.add_parser("verify", help="oracle and inequality suites")
    p.add_argument("--seed", type=_u64, default=0, help="master seed")
    p.add_argument("--trials", type=int, default=100_000, help="trials per lemma sweep")
    p.add_argument("--oracle-trials", type=int, default=1000, help="trials per allocator")
    p.add_argument("--points", type=int, default=200, help="grid points per axis")
    p.add_argument("--checks", default=",".join(CHECK_GROUPS),
                   help=f"comma-separated subset of {', '.join(CHECK_GROUPS)}")
    return parser


def _load(args, **overrides) -> RunConfig:
    try:
        text = args.config.read_text() if args.config else ""
    except OSError as exc:
        raise ConfigurationError("config", f"cannot read {args.config}: {exc.strerror}") from None
    overrides.update(seed=args.seed, n_samples=args.samples, output_path=getattr(args, "output", None))
    return parse_config(text, overrides)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "verify":
            checks = tuple(c.strip() for c in args.checks.split(",") if c.strip())
            _, code = run_verify(args.seed, args.trials, args.oracle_trials, checks,
                                 oracle.GridSpec(points_per_axis=args.points))
            return code

        if args.command == "solve":
            if args.config is None and args.samples is None:
                args.samples = 20000
            config = _load(args, strategies=(args.strategy,), sweep=((args.lambda1, args.lambda2),))
            config = dataclasses.replace(config, output_path=None)
        else:
            if args.config is None:
                raise ConfigurationError("config", "sweep needs --config")
            config = _load(args)

        start = time.perf_counter()
        rows, code = run_sweep(config)
        log.info("%d rows in %.1fs", len(rows), time.perf_counter() - start)
        if config.output_path is None or str(config.output_path) == "-":
            write_table(rows, sys.stdout)
        else:
            buffer = io.StringIO()
            write_table(rows, buffer)
            config.output_path.parent.mkdir(parents=True, exist_ok=True)
            config.output_path.write_text(buffer.getvalue())
            print(f"wrote {len(rows)} rows to {config.output_path}")
        return code
    except ConfigurationError as exc:
        print(f"twrn: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"twrn: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except TwrnError as exc:
        print(f"twrn: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
